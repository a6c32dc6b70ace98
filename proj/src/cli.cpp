#include "dgkd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dgkd/config.hpp"
#include "dgkd/error.hpp"
#include "dgkd/metrics.hpp"
#include "dgkd/orchestrator.hpp"

namespace dgkd {

namespace fs = std::filesystem;

namespace {

void print_usage(std::ostream& out) {
  out << "usage: dgkd <run|sweep-t|compare-modes|report> [options]\n"
         "  run            execute every (plan, seed) in the config\n"
         "  sweep-t        vary the stochastic dropping trials t on one plan\n"
         "  compare-modes  run one ladder under direct_kd, chain, dense and\n"
         "                 dense_stochastic\n"
         "  report         recompute the CSV/JSON tables from stored reports\n"
         "options:\n"
         "  --config <path>    experiment config (JSON)\n"
         "  --out <dir>        output directory (default: config output_dir)\n"
         "  --seeds s1,s2,...  override the config seed list\n"
         "exit status: 0 ok, 2 usage/config error, 3 runtime error\n";
}

struct CliOptions {
  std::string subcommand;
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  bool help = false;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty()) throw ConfigError("empty entry in --seeds list");
    std::size_t used = 0;
    std::uint64_t value = 0;
    try {
      value = std::stoull(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("--seeds entry '" + item + "' is not an integer");
    }
    if (used != item.size()) {
      throw ConfigError("--seeds entry '" + item + "' is not an integer");
    }
    seeds.push_back(value);
    pos = comma + 1;
  }
  return seeds;
}

CliOptions parse_args(const std::vector<std::string>& args) {
  CliOptions opts;
  if (args.size() < 2) throw ConfigError("missing subcommand");
  opts.subcommand = args[1];
  if (opts.subcommand == "--help" || opts.subcommand == "-h") {
    opts.help = true;
    return opts;
  }
  if (opts.subcommand != "run" && opts.subcommand != "sweep-t" &&
      opts.subcommand != "compare-modes" && opts.subcommand != "report") {
    throw ConfigError("unknown subcommand '" + opts.subcommand + "'");
  }
  for (std::size_t i = 2; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--help" || a == "-h") {
      opts.help = true;
    } else if (a == "--config" && i + 1 < args.size()) {
      opts.config_path = args[++i];
    } else if (a == "--out" && i + 1 < args.size()) {
      opts.out_dir = args[++i];
    } else if (a == "--seeds" && i + 1 < args.size()) {
      opts.seeds = parse_seed_list(args[++i]);
    } else {
      throw ConfigError("unknown or incomplete option '" + a + "'");
    }
  }
  return opts;
}

std::string sanitize_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "plan" : out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void sort_reports(std::vector<PlanReport>& reports) {
  std::sort(reports.begin(), reports.end(),
            [](const PlanReport& a, const PlanReport& b) {
              return std::tie(a.plan_name, a.seed) < std::tie(b.plan_name, b.seed);
            });
}

void write_tables(const std::vector<PlanReport>& reports, const fs::path& out_dir) {
  const std::vector<StageRow> stages = stage_rows(reports);
  const std::vector<PlanRow> plans = plan_rows(reports);
  const std::vector<PlanSummaryRow> summary = summarize_plans(reports);
  write_text(out_dir / "stages.csv", stages_csv(stages));
  write_text(out_dir / "stages.json", stages_json(stages).dump(2) + "\n");
  write_text(out_dir / "plans.csv", plans_csv(plans));
  write_text(out_dir / "plans.json", plans_json(plans).dump(2) + "\n");
  write_text(out_dir / "summary.csv", summary_csv(summary));
  write_text(out_dir / "summary.json", summary_json(summary).dump(2) + "\n");
}

void write_manifest(const fs::path& out_dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), out_dir);
    if (rel == "manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::json manifest;
  manifest["created_utc"] = utc_timestamp();
  nlohmann::json arr = nlohmann::json::array();
  for (const fs::path& f : files) {
    arr.push_back({{"path", f.generic_string()},
                   {"bytes", fs::file_size(out_dir / f)}});
  }
  manifest["files"] = arr;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Persists reports, tables, the resolved config and the manifest.
void emit_results(const nlohmann::json& resolved_config,
                  std::vector<PlanReport> reports, const fs::path& out_dir) {
  fs::create_directories(out_dir / "reports");
  write_text(out_dir / "resolved_config.json", resolved_config.dump(2) + "\n");
  sort_reports(reports);
  for (const PlanReport& r : reports) {
    const nlohmann::json j = r;
    write_text(out_dir / "reports" /
                   (sanitize_name(r.plan_name) + "__seed" + std::to_string(r.seed) +
                    ".json"),
               j.dump(2) + "\n");
  }
  write_tables(reports, out_dir);
  write_manifest(out_dir);
}

std::vector<PlanConfig> expand_plans(const ExperimentConfig& cfg,
                                     const std::string& subcommand) {
  if (subcommand == "run") return cfg.plans;
  if (cfg.plans.size() != 1) {
    throw ConfigError(subcommand + " needs exactly one plan in the config, got " +
                      std::to_string(cfg.plans.size()));
  }
  const PlanConfig& base = cfg.plans.front();
  std::vector<PlanConfig> out;
  if (subcommand == "sweep-t") {
    const int max_trials = std::max(0, static_cast<int>(base.depths.size()) - 2);
    for (int t = 0; t <= max_trials; ++t) {
      PlanConfig p = base;
      p.mode = "dense_stochastic";
      p.drop_trials = t;
      p.name = base.name + "-t" + std::to_string(t);
      out.push_back(std::move(p));
    }
  } else {  // compare-modes
    for (const char* mode : {"direct_kd", "chain", "dense", "dense_stochastic"}) {
      PlanConfig p = base;
      p.mode = mode;
      p.name = base.name + "-" + mode;
      if (p.mode == "dense_stochastic") {
        p.drop_trials = std::min(
            p.drop_trials, std::max(0, static_cast<int>(p.depths.size()) - 2));
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

int cmd_report(const CliOptions& opts) {
  if (opts.out_dir.empty()) {
    throw ConfigError("report needs --out <dir> with stored reports");
  }
  const fs::path reports_dir = fs::path(opts.out_dir) / "reports";
  std::vector<PlanReport> reports;
  if (fs::is_directory(reports_dir)) {
    for (const auto& entry : fs::directory_iterator(reports_dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) {
        throw ConfigError("report file '" + entry.path().string() +
                          "' is not valid JSON");
      }
      reports.push_back(j.get<PlanReport>());
    }
  }
  if (reports.empty()) {
    throw ConfigError("no reports found in '" + reports_dir.string() + "'");
  }
  sort_reports(reports);
  write_tables(reports, opts.out_dir);
  std::cout << "recomputed tables from " << reports.size() << " report(s) in "
            << opts.out_dir << "\n";
  return kExitOk;
}

int cmd_experiment(const CliOptions& opts) {
  if (opts.config_path.empty()) {
    throw ConfigError(opts.subcommand + " needs --config <path>");
  }
  ExperimentConfig cfg = parse_config(opts.config_path);
  cfg.plans = expand_plans(cfg, opts.subcommand);
  if (!opts.seeds.empty()) cfg.seeds = opts.seeds;
  if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
  // Derived plans re-validate before anything runs.
  for (std::size_t i = 0; i < cfg.plans.size(); ++i) {
    cfg.make_plan(i, cfg.seeds.front()).validate();
  }

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);

  const LabeledDataset dataset = build_dataset(cfg.dataset);
  std::vector<PlanReport> reports;
  for (std::size_t i = 0; i < cfg.plans.size(); ++i) {
    for (const std::uint64_t seed : cfg.seeds) {
      DistillationPlan plan = cfg.make_plan(i, seed);
      const fs::path run_dir =
          out_dir / "runs" /
          (sanitize_name(plan.name) + "__seed" + std::to_string(seed));
      PlanReport report = run_plan(plan, dataset, run_dir);
      std::cout << plan.name << " seed " << seed << ": student "
                << report.student_stage().model_id << " top1 "
                << format_double(report.student_stage().final_top1) << "\n";
      reports.push_back(std::move(report));
    }
  }
  emit_results(cfg.resolved(), std::move(reports), out_dir);
  std::cout << "wrote tables and manifest to " << cfg.output_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CliOptions opts;
  try {
    opts = parse_args(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    print_usage(std::cerr);
    return kExitUsage;
  }
  if (opts.help) {
    print_usage(std::cout);
    return kExitOk;
  }
  try {
    if (opts.subcommand == "report") return cmd_report(opts);
    return cmd_experiment(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace dgkd
