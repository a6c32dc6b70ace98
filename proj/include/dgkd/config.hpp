#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgkd/dataset.hpp"
#include "dgkd/orchestrator.hpp"

namespace dgkd {

struct DatasetConfig {
  std::string kind;  // synthetic_spiral | synthetic_blobs | idx | cifar_binary
  // synthetic
  int classes = 10;
  int train_per_class = 500;
  int test_per_class = 200;
  double noise = 0.2;
  std::uint64_t seed = 1;
  // idx (paths resolved against the config file's directory)
  std::string train_images, train_labels, test_images, test_labels;
  // cifar_binary
  std::vector<std::string> train_files, test_files;
  // shared
  int num_classes = 0;   // resolved; images only
  bool augment = false;  // resolved default: on for image kinds, off otherwise
  bool normalize = false;

  bool is_synthetic() const {
    return kind == "synthetic_spiral" || kind == "synthetic_blobs";
  }
};

struct PlanConfig {
  std::string name;
  std::string family = "mlp";
  std::vector<int> depths;
  int width = 32;          // mlp
  int base_channels = 16;  // plain_cnn
  std::string mode = "dense";
  double lambda = 0.5;
  double temperature = 4.0;
  int drop_trials = 1;
  std::vector<double> per_source_lambda;
  bool normalize_by_sources = false;
  bool stochastic_for_tas = false;
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::string lr_schedule = "constant";
  bool cache_trainer_logits = false;
};

/// Fully resolved experiment description. Every knob that affects results is
/// echoed by resolved(), and parse(resolved()) reproduces the same config.
struct ExperimentConfig {
  int schema_version = 1;
  DatasetConfig dataset;
  std::vector<PlanConfig> plans;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";

  // derived at parse time (dataset shape drives ladder validation)
  std::vector<std::size_t> input_signature;
  int resolved_classes = 0;

  nlohmann::json resolved() const;
  ModelSpec make_spec(const PlanConfig& plan, int depth) const;
  DistillationPlan make_plan(std::size_t plan_index, std::uint64_t seed) const;
};

/// Parses and fully validates a config file. Unknown keys, type mismatches,
/// missing referenced files and invalid ladders are all rejected here, with
/// the offending key path in the message.
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Same, from an already-parsed document; relative paths resolve against
/// base_dir.
ExperimentConfig parse_config_json(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir);

/// Materializes the dataset the config describes.
LabeledDataset build_dataset(const DatasetConfig& cfg);

}  // namespace dgkd
