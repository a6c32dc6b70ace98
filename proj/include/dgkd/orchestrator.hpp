#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dgkd/dataset.hpp"
#include "dgkd/losses.hpp"
#include "dgkd/model.hpp"
#include "dgkd/optimizer.hpp"
#include "dgkd/report.hpp"

namespace dgkd {

enum class GuidanceMode { kDirectKd, kChain, kDense, kDenseStochastic };

std::string mode_name(GuidanceMode mode);
GuidanceMode mode_from_name(const std::string& name);

enum class LrSchedule { kConstant, kStep };  // step: x0.1 at 50% and 75% of epochs

struct TrainHyper {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 30;
  int batch_size = 32;
  LrSchedule schedule = LrSchedule::kConstant;
  /// Reuses trainer logits across epochs, keyed by example index. Only legal
  /// without augmentation (augmented inputs never repeat).
  bool cache_trainer_logits = false;
};

/// A capacity-descending model ladder plus guidance mode and stage
/// hyperparameters. Stage k's trainers are earlier checkpoints only:
/// the one directly above it in chain mode, all of them in dense modes,
/// just the teacher in direct-KD mode (intermediate specs are skipped).
struct DistillationPlan {
  std::string name = "plan";
  std::vector<ModelSpec> ladder;
  GuidanceMode mode = GuidanceMode::kDense;
  DistillConfig cfg;
  std::vector<DistillConfig> per_stage_cfg;  // optional; index = stage
  int drop_trials = 1;                       // dense_stochastic only
  bool stochastic_for_tas = false;
  TrainHyper hyper;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> stage_seeds;  // optional explicit override

  void validate() const;
  std::uint64_t stage_seed(std::size_t stage) const;
  DistillConfig stage_config(std::size_t stage) const;
  /// Role labels along the executed ladder, e.g. {"T8","A6","S2"}.
  std::vector<std::string> role_labels() const;
  std::string path_string() const;
};

/// A trained model plus the metadata needed to reproduce or resume it.
struct Checkpoint {
  ModelSpec spec;
  ParameterSet params;
  std::uint32_t stage_index = 0;
  std::uint32_t epochs_completed = 0;
  std::uint64_t rng_state = 0;
  double final_top1 = 0.0;
  double final_train_loss = 0.0;
};

/// Trains from labels only (cross-entropy). Deterministic per seed.
std::pair<Checkpoint, StageReport> train_supervised(const ModelSpec& spec,
                                                    const LabeledDataset& dataset,
                                                    const TrainHyper& hyper,
                                                    std::uint64_t seed);

/// Trains one model against frozen trainer checkpoints with the dense
/// multi-source loss. Every trainer must have strictly more parameters than
/// the trainee. With stochastic_trials > 0 a fresh gate mask is sampled per
/// mini-batch.
std::pair<Checkpoint, StageReport> train_with_trainers(
    const ModelSpec& spec, const std::vector<Checkpoint>& trainers,
    const DistillConfig& cfg, int stochastic_trials, const LabeledDataset& dataset,
    const TrainHyper& hyper, std::uint64_t seed);

/// Executes all stages of a plan in ladder order. When artifact_dir is
/// non-empty every stage checkpoint and the plan report are persisted there;
/// on a stage failure the completed artifacts stay on disk and the partial
/// report is written before the error propagates.
PlanReport run_plan(const DistillationPlan& plan, const LabeledDataset& dataset,
                    const std::filesystem::path& artifact_dir = {});

/// Pure frozen-model inference; never mutates the checkpoint.
Tensor trainer_logits(const Checkpoint& checkpoint, const Tensor& batch);

/// Binary checkpoint file: little-endian, magic "DGKD", format version u32,
/// length-prefixed UTF-8 descriptor (spec + training metadata), tensor count
/// u32, then per tensor {name, dtype tag, rank, extents, f64 payload}.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the serialized bytes; used to assert trainer immutability.
std::uint64_t checkpoint_digest(const Checkpoint& checkpoint);

}  // namespace dgkd
