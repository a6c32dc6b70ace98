#include "dgkd/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dgkd/error.hpp"

namespace dgkd {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      fail(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

const json* maybe(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

int get_int(const json& obj, const std::string& path, const std::string& key,
            int fallback) {
  const json* v = maybe(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) fail(join_path(path, key), "expected an integer");
  return v->get<int>();
}

double get_double(const json& obj, const std::string& path, const std::string& key,
                  double fallback) {
  const json* v = maybe(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) fail(join_path(path, key), "expected a number");
  return v->get<double>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key,
              bool fallback) {
  const json* v = maybe(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(join_path(path, key), "expected a boolean");
  return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& path,
                       const std::string& key, const std::string& fallback) {
  const json* v = maybe(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) fail(join_path(path, key), "expected a string");
  return v->get<std::string>();
}

std::string require_string(const json& obj, const std::string& path,
                           const std::string& key) {
  const json* v = maybe(obj, key);
  if (!v) fail(join_path(path, key), "required key is missing");
  if (!v->is_string()) fail(join_path(path, key), "expected a string");
  return v->get<std::string>();
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path fp(p);
  if (fp.is_relative()) fp = base / fp;
  return fp.lexically_normal().string();
}

void require_file(const std::string& p, const std::string& key_path) {
  if (!std::filesystem::is_regular_file(p)) {
    fail(key_path, "referenced file '" + p + "' does not exist");
  }
}

int scan_idx_label_classes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open IDX label file '" + path + "'");
  unsigned char header[8];
  if (!in.read(reinterpret_cast<char*>(header), 8)) {
    throw ConfigError("IDX label file '" + path + "' is truncated");
  }
  int max_label = 1;
  int c;
  while ((c = in.get()) != EOF) max_label = std::max(max_label, c);
  return max_label + 1;
}

DatasetConfig parse_dataset(const json& obj, const std::filesystem::path& base) {
  if (!obj.is_object()) fail("dataset", "expected an object");
  DatasetConfig ds;
  ds.kind = require_string(obj, "dataset", "kind");
  if (ds.kind == "synthetic_spiral" || ds.kind == "synthetic_blobs") {
    check_keys(obj, "dataset",
               {"kind", "classes", "train_per_class", "test_per_class", "noise",
                "seed", "augment"});
    ds.classes = get_int(obj, "dataset", "classes", ds.classes);
    ds.train_per_class = get_int(obj, "dataset", "train_per_class", ds.train_per_class);
    ds.test_per_class = get_int(obj, "dataset", "test_per_class", ds.test_per_class);
    ds.noise = get_double(obj, "dataset", "noise", ds.noise);
    ds.seed = static_cast<std::uint64_t>(get_int(obj, "dataset", "seed", 1));
    ds.augment = get_bool(obj, "dataset", "augment", false);
    if (ds.classes < 2) fail("dataset.classes", "need at least 2 classes");
    if (ds.train_per_class < 1 || ds.test_per_class < 1) {
      fail("dataset.train_per_class", "per-class counts must be positive");
    }
    if (ds.noise < 0.0) fail("dataset.noise", "noise must be nonnegative");
    if (ds.augment) {
      fail("dataset.augment", "augmentation applies to image datasets only");
    }
    ds.num_classes = ds.classes;
  } else if (ds.kind == "idx") {
    check_keys(obj, "dataset",
               {"kind", "train_images", "train_labels", "test_images",
                "test_labels", "num_classes", "augment", "normalize"});
    ds.train_images = resolve_path(require_string(obj, "dataset", "train_images"), base);
    ds.train_labels = resolve_path(require_string(obj, "dataset", "train_labels"), base);
    ds.test_images = resolve_path(require_string(obj, "dataset", "test_images"), base);
    ds.test_labels = resolve_path(require_string(obj, "dataset", "test_labels"), base);
    require_file(ds.train_images, "dataset.train_images");
    require_file(ds.train_labels, "dataset.train_labels");
    require_file(ds.test_images, "dataset.test_images");
    require_file(ds.test_labels, "dataset.test_labels");
    ds.num_classes = get_int(obj, "dataset", "num_classes", 0);
    if (ds.num_classes == 0) {
      ds.num_classes = std::max(scan_idx_label_classes(ds.train_labels),
                                scan_idx_label_classes(ds.test_labels));
    }
    ds.augment = get_bool(obj, "dataset", "augment", true);
    ds.normalize = get_bool(obj, "dataset", "normalize", false);
  } else if (ds.kind == "cifar_binary") {
    check_keys(obj, "dataset",
               {"kind", "train_files", "test_files", "num_classes", "augment",
                "normalize"});
    const json* train = maybe(obj, "train_files");
    const json* test = maybe(obj, "test_files");
    if (!train || !train->is_array() || train->empty()) {
      fail("dataset.train_files", "expected a non-empty array of paths");
    }
    if (!test || !test->is_array() || test->empty()) {
      fail("dataset.test_files", "expected a non-empty array of paths");
    }
    for (const json& p : *train) {
      if (!p.is_string()) fail("dataset.train_files", "expected string paths");
      ds.train_files.push_back(resolve_path(p.get<std::string>(), base));
      require_file(ds.train_files.back(), "dataset.train_files");
    }
    for (const json& p : *test) {
      if (!p.is_string()) fail("dataset.test_files", "expected string paths");
      ds.test_files.push_back(resolve_path(p.get<std::string>(), base));
      require_file(ds.test_files.back(), "dataset.test_files");
    }
    ds.num_classes = get_int(obj, "dataset", "num_classes", 10);
    if (ds.num_classes < 2) fail("dataset.num_classes", "need at least 2 classes");
    ds.augment = get_bool(obj, "dataset", "augment", true);
    ds.normalize = get_bool(obj, "dataset", "normalize", false);
  } else {
    fail("dataset.kind", "unknown dataset kind '" + ds.kind +
                             "' (expected synthetic_spiral, synthetic_blobs, idx "
                             "or cifar_binary)");
  }
  return ds;
}

PlanConfig parse_plan(const json& obj, const std::string& path, std::size_t index) {
  if (!obj.is_object()) fail(path, "expected an object");
  check_keys(obj, path,
             {"name", "family", "depths", "width", "base_channels", "mode",
              "lambda", "temperature", "drop_trials", "per_source_lambda",
              "normalize_by_sources", "stochastic_for_tas", "epochs",
              "batch_size", "lr", "momentum", "weight_decay", "lr_schedule",
              "cache_trainer_logits"});
  PlanConfig p;
  p.name = get_string(obj, path, "name", "plan" + std::to_string(index));
  p.family = get_string(obj, path, "family", p.family);
  if (p.family != "mlp" && p.family != "plain_cnn") {
    fail(join_path(path, "family"), "expected 'mlp' or 'plain_cnn'");
  }
  const json* depths = maybe(obj, "depths");
  if (!depths || !depths->is_array() || depths->empty()) {
    fail(join_path(path, "depths"), "expected a non-empty array of depths");
  }
  for (const json& d : *depths) {
    if (!d.is_number_integer() || d.get<int>() < 1) {
      fail(join_path(path, "depths"), "depths must be positive integers");
    }
    p.depths.push_back(d.get<int>());
  }
  p.width = get_int(obj, path, "width", p.width);
  p.base_channels = get_int(obj, path, "base_channels", p.base_channels);
  if (p.width < 1) fail(join_path(path, "width"), "width must be positive");
  if (p.base_channels < 1) {
    fail(join_path(path, "base_channels"), "base_channels must be positive");
  }
  p.mode = get_string(obj, path, "mode", p.mode);
  try {
    mode_from_name(p.mode);
  } catch (const Error& e) {
    fail(join_path(path, "mode"), e.what());
  }
  p.lambda = get_double(obj, path, "lambda", p.lambda);
  p.temperature = get_double(obj, path, "temperature", p.temperature);
  p.drop_trials = get_int(obj, path, "drop_trials", p.drop_trials);
  if (const json* psl = maybe(obj, "per_source_lambda")) {
    if (!psl->is_array()) {
      fail(join_path(path, "per_source_lambda"), "expected an array of numbers");
    }
    for (const json& l : *psl) {
      if (!l.is_number()) {
        fail(join_path(path, "per_source_lambda"), "expected an array of numbers");
      }
      p.per_source_lambda.push_back(l.get<double>());
    }
  }
  p.normalize_by_sources =
      get_bool(obj, path, "normalize_by_sources", p.normalize_by_sources);
  p.stochastic_for_tas = get_bool(obj, path, "stochastic_for_tas", p.stochastic_for_tas);
  p.epochs = get_int(obj, path, "epochs", p.epochs);
  p.batch_size = get_int(obj, path, "batch_size", p.batch_size);
  p.lr = get_double(obj, path, "lr", p.lr);
  p.momentum = get_double(obj, path, "momentum", p.momentum);
  p.weight_decay = get_double(obj, path, "weight_decay", p.weight_decay);
  p.lr_schedule = get_string(obj, path, "lr_schedule", p.lr_schedule);
  if (p.lr_schedule != "constant" && p.lr_schedule != "step") {
    fail(join_path(path, "lr_schedule"), "expected 'constant' or 'step'");
  }
  p.cache_trainer_logits =
      get_bool(obj, path, "cache_trainer_logits", p.cache_trainer_logits);
  if (p.epochs < 0) fail(join_path(path, "epochs"), "epochs must be nonnegative");
  if (p.batch_size < 1) {
    fail(join_path(path, "batch_size"), "batch_size must be positive");
  }
  return p;
}

}  // namespace

ModelSpec ExperimentConfig::make_spec(const PlanConfig& plan, int depth) const {
  ModelSpec spec;
  spec.family = family_from_name(plan.family);
  spec.depth = depth;
  spec.hidden_width = plan.width;
  if (spec.family == ModelFamily::kPlainCnn) {
    spec.channel_schedule =
        default_channel_schedule(depth, plan.base_channels, 4 * plan.base_channels);
  }
  spec.num_classes = resolved_classes;
  spec.input_signature = input_signature;
  return spec;
}

DistillationPlan ExperimentConfig::make_plan(std::size_t plan_index,
                                             std::uint64_t seed) const {
  const PlanConfig& p = plans.at(plan_index);
  DistillationPlan plan;
  plan.name = p.name;
  for (int depth : p.depths) plan.ladder.push_back(make_spec(p, depth));
  plan.mode = mode_from_name(p.mode);
  plan.cfg.lambda = p.lambda;
  plan.cfg.temperature = p.temperature;
  plan.cfg.per_source_lambda = p.per_source_lambda;
  plan.cfg.normalize_by_sources = p.normalize_by_sources;
  plan.drop_trials = p.drop_trials;
  plan.stochastic_for_tas = p.stochastic_for_tas;
  plan.hyper.lr = p.lr;
  plan.hyper.momentum = p.momentum;
  plan.hyper.weight_decay = p.weight_decay;
  plan.hyper.epochs = p.epochs;
  plan.hyper.batch_size = p.batch_size;
  plan.hyper.schedule =
      p.lr_schedule == "step" ? LrSchedule::kStep : LrSchedule::kConstant;
  plan.hyper.cache_trainer_logits = p.cache_trainer_logits;
  plan.seed = seed;
  return plan;
}

ExperimentConfig parse_config_json(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(doc, "",
             {"schema_version", "dataset", "plan", "plans", "seeds", "output_dir"});
  ExperimentConfig cfg;
  cfg.schema_version = get_int(doc, "", "schema_version", 1);
  if (cfg.schema_version != 1) {
    fail("schema_version", "unsupported schema version " +
                               std::to_string(cfg.schema_version));
  }
  const json* dataset = maybe(doc, "dataset");
  if (!dataset) fail("dataset", "required key is missing");
  cfg.dataset = parse_dataset(*dataset, base_dir);

  const json* plan = maybe(doc, "plan");
  const json* plans = maybe(doc, "plans");
  if ((plan == nullptr) == (plans == nullptr)) {
    fail("plans", "give exactly one of 'plan' (object) or 'plans' (array)");
  }
  if (plan) {
    cfg.plans.push_back(parse_plan(*plan, "plan", 0));
  } else {
    if (!plans->is_array() || plans->empty()) {
      fail("plans", "expected a non-empty array of plan objects");
    }
    for (std::size_t i = 0; i < plans->size(); ++i) {
      cfg.plans.push_back(
          parse_plan((*plans)[i], "plans[" + std::to_string(i) + "]", i));
    }
  }
  std::set<std::string> names;
  for (const PlanConfig& p : cfg.plans) {
    if (!names.insert(p.name).second) {
      fail("plans", "duplicate plan name '" + p.name + "'");
    }
  }

  const json* seeds = maybe(doc, "seeds");
  if (!seeds || !seeds->is_array() || seeds->empty()) {
    fail("seeds", "expected a non-empty array of integer seeds");
  }
  for (const json& s : *seeds) {
    if (!s.is_number_integer() || (s.is_number_integer() && s.get<long long>() < 0)) {
      fail("seeds", "seeds must be nonnegative integers");
    }
    cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  cfg.output_dir = get_string(doc, "", "output_dir", cfg.output_dir);

  // Dataset shape, for ladder validation.
  if (cfg.dataset.is_synthetic()) {
    cfg.input_signature = {2};
    cfg.resolved_classes = cfg.dataset.classes;
  } else if (cfg.dataset.kind == "idx") {
    try {
      const std::vector<std::size_t> dims =
          peek_idx_image_shape(cfg.dataset.train_images);
      cfg.input_signature = {dims[1], dims[2], dims[3]};
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail("dataset.train_images", e.what());
    }
    cfg.resolved_classes = cfg.dataset.num_classes;
  } else {
    cfg.input_signature = {3, 32, 32};
    cfg.resolved_classes = cfg.dataset.num_classes;
  }

  for (std::size_t i = 0; i < cfg.plans.size(); ++i) {
    const PlanConfig& p = cfg.plans[i];
    const std::string path =
        plan ? "plan" : "plans[" + std::to_string(i) + "]";
    if (p.family == "plain_cnn" && cfg.dataset.is_synthetic()) {
      fail(join_path(path, "family"),
           "plain_cnn needs image data, not 2-D synthetic points");
    }
    if (!p.per_source_lambda.empty()) {
      if (p.mode != "dense" && p.mode != "dense_stochastic") {
        fail(join_path(path, "per_source_lambda"),
             "per-source lambdas require a dense mode");
      }
      if (p.per_source_lambda.size() != p.depths.size() - 1) {
        fail(join_path(path, "per_source_lambda"),
             "expected one lambda per student-stage source (" +
                 std::to_string(p.depths.size() - 1) + ")");
      }
    }
    // Full structural validation (capacity ordering, ranges) via the plan type.
    try {
      DistillationPlan built = cfg.make_plan(i, cfg.seeds.front());
      built.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(path, e.what());
    }
  }
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  }
  return parse_config_json(doc, path.parent_path());
}

nlohmann::json ExperimentConfig::resolved() const {
  json out;
  out["schema_version"] = schema_version;
  json ds;
  ds["kind"] = dataset.kind;
  if (dataset.is_synthetic()) {
    ds["classes"] = dataset.classes;
    ds["train_per_class"] = dataset.train_per_class;
    ds["test_per_class"] = dataset.test_per_class;
    ds["noise"] = dataset.noise;
    ds["seed"] = dataset.seed;
    ds["augment"] = dataset.augment;
  } else if (dataset.kind == "idx") {
    ds["train_images"] = dataset.train_images;
    ds["train_labels"] = dataset.train_labels;
    ds["test_images"] = dataset.test_images;
    ds["test_labels"] = dataset.test_labels;
    ds["num_classes"] = dataset.num_classes;
    ds["augment"] = dataset.augment;
    ds["normalize"] = dataset.normalize;
  } else {
    ds["train_files"] = dataset.train_files;
    ds["test_files"] = dataset.test_files;
    ds["num_classes"] = dataset.num_classes;
    ds["augment"] = dataset.augment;
    ds["normalize"] = dataset.normalize;
  }
  out["dataset"] = ds;
  json plan_arr = json::array();
  for (const PlanConfig& p : plans) {
    json jp;
    jp["name"] = p.name;
    jp["family"] = p.family;
    jp["depths"] = p.depths;
    jp["width"] = p.width;
    jp["base_channels"] = p.base_channels;
    jp["mode"] = p.mode;
    jp["lambda"] = p.lambda;
    jp["temperature"] = p.temperature;
    jp["drop_trials"] = p.drop_trials;
    jp["per_source_lambda"] = p.per_source_lambda;
    jp["normalize_by_sources"] = p.normalize_by_sources;
    jp["stochastic_for_tas"] = p.stochastic_for_tas;
    jp["epochs"] = p.epochs;
    jp["batch_size"] = p.batch_size;
    jp["lr"] = p.lr;
    jp["momentum"] = p.momentum;
    jp["weight_decay"] = p.weight_decay;
    jp["lr_schedule"] = p.lr_schedule;
    jp["cache_trainer_logits"] = p.cache_trainer_logits;
    plan_arr.push_back(std::move(jp));
  }
  out["plans"] = plan_arr;
  out["seeds"] = seeds;
  out["output_dir"] = output_dir;
  return out;
}

LabeledDataset build_dataset(const DatasetConfig& cfg) {
  if (cfg.is_synthetic()) {
    SyntheticParams params;
    params.classes = cfg.classes;
    params.train_per_class = cfg.train_per_class;
    params.test_per_class = cfg.test_per_class;
    params.noise = cfg.noise;
    const SyntheticKind kind = cfg.kind == "synthetic_spiral"
                                   ? SyntheticKind::kSpiral
                                   : SyntheticKind::kBlobs;
    return generate_synthetic_dataset(kind, params, cfg.seed);
  }
  LabeledDataset merged;
  if (cfg.kind == "idx") {
    const LabeledDataset train = load_idx_dataset(cfg.train_images, cfg.train_labels);
    const LabeledDataset test = load_idx_dataset(cfg.test_images, cfg.test_labels);
    merged = merge_splits(train, test,
                          "idx:" + std::filesystem::path(cfg.train_images)
                                       .filename()
                                       .string());
  } else if (cfg.kind == "cifar_binary") {
    std::vector<std::filesystem::path> train_paths(cfg.train_files.begin(),
                                                   cfg.train_files.end());
    std::vector<std::filesystem::path> test_paths(cfg.test_files.begin(),
                                                  cfg.test_files.end());
    const LabeledDataset train = load_cifar_binary(train_paths, cfg.num_classes);
    const LabeledDataset test = load_cifar_binary(test_paths, cfg.num_classes);
    merged = merge_splits(train, test,
                          "cifar:" + std::filesystem::path(cfg.train_files.front())
                                         .filename()
                                         .string());
  } else {
    throw ConfigError("unknown dataset kind '" + cfg.kind + "'");
  }
  if (cfg.num_classes > 0) {
    if (merged.num_classes > cfg.num_classes) {
      throw DataFormatError("dataset labels exceed the configured class count");
    }
    merged.num_classes = cfg.num_classes;
  }
  if (cfg.normalize) normalize_per_channel(merged);
  merged.augment = cfg.augment;
  merged.validate();
  return merged;
}

}  // namespace dgkd
