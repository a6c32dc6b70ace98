#include <vector>

#include "dgkd/cli.hpp"

int main(int argc, char** argv) {
  return dgkd::run_cli(std::vector<std::string>(argv, argv + argc));
}
