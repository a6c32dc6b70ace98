#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dgkd/rng.hpp"
#include "dgkd/tensor.hpp"

namespace dgkd::testing {

inline bool close(double a, double b, double rel = 1e-9, double abs_floor = 1e-12) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

struct GradCompare {
  double worst_abs = 0.0;
  bool ok = true;
};

inline GradCompare compare_grads(const std::vector<std::vector<double>>& got,
                                 const std::vector<std::vector<double>>& want,
                                 double rel = 1e-5, double abs_floor = 1e-8) {
  GradCompare r;
  for (std::size_t t = 0; t < got.size(); ++t) {
    for (std::size_t i = 0; i < got[t].size(); ++i) {
      const double diff = std::abs(got[t][i] - want[t][i]);
      r.worst_abs = std::max(r.worst_abs, diff);
      if (diff > std::max(abs_floor,
                          rel * std::max(std::abs(got[t][i]), std::abs(want[t][i])))) {
        r.ok = false;
      }
    }
  }
  return r;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

inline std::vector<int> random_labels(std::size_t batch, int classes, Rng& rng) {
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    labels[i] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
  }
  return labels;
}

/// Central differences of a scalar function of a logit tensor.
inline std::vector<double> fd_logits(const std::function<double(const Tensor&)>& f,
                                     Tensor z, double eps = 1e-5) {
  std::vector<double> g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double orig = z[i];
    z[i] = orig + eps;
    const double up = f(z);
    z[i] = orig - eps;
    const double down = f(z);
    z[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

}  // namespace dgkd::testing
