#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dgkd {

/// Sorted misclassified test-example indices of one trained model.
struct ErrorSet {
  std::string dataset_id;
  std::string model_id;
  std::vector<std::size_t> indices;

  void validate(std::size_t dataset_size) const;
};

/// Outcome of one training stage.
struct StageReport {
  int stage_index = 0;
  std::string model_id;             // role label, e.g. "T8", "A6", "S2"
  std::string spec_id;              // e.g. "mlp-d8"
  std::vector<std::string> trainer_ids;
  std::vector<double> train_loss;   // per epoch
  std::vector<double> test_top1;    // per epoch
  double final_top1 = 0.0;
  double final_train_loss = 0.0;
  std::vector<std::size_t> error_indices;  // sorted test-set indices
};

/// Outcome of a full distillation plan on one seed.
struct PlanReport {
  std::string plan_name;
  std::string mode;
  std::string path;  // e.g. "T8->A6->A4->S2"
  std::uint64_t seed = 0;
  std::string dataset_id;
  std::size_t test_size = 0;
  std::vector<StageReport> stages;
  // overlap[i][j] = |E_i intersect E_j| / |E_j| (stage i above stage j)
  std::vector<std::vector<double>> overlap;
  double wall_seconds = 0.0;
  std::string aborted_stage;  // empty unless the plan stopped early

  /// Mean of overlap[k][k+1] along the executed ladder.
  double mean_adjacent_overlap() const;
  const StageReport& student_stage() const;
};

void to_json(nlohmann::json& j, const StageReport& r);
void from_json(const nlohmann::json& j, StageReport& r);
void to_json(nlohmann::json& j, const PlanReport& r);
void from_json(const nlohmann::json& j, PlanReport& r);

}  // namespace dgkd
