#pragma once

#include <string>
#include <vector>

#include "dgkd/dataset.hpp"
#include "dgkd/orchestrator.hpp"
#include "dgkd/report.hpp"
#include "dgkd/tensor.hpp"

namespace dgkd {

/// Index of the row maximum; ties resolve to the lowest class index.
std::size_t argmax_row(const double* row, std::size_t n);

/// Fraction of rows whose argmax equals the label.
double top1_accuracy(const Tensor& logits, const std::vector<int>& labels);

/// Misclassified test-split indices of a trained model.
ErrorSet error_set(const Checkpoint& checkpoint, const LabeledDataset& dataset);

/// Which error set's size normalizes the overlap. The paper's "proportion"
/// does not pin a denominator; the lower (smaller) model is the default and
/// the alternatives stay available for sensitivity checks.
enum class OverlapDenominator { kLower, kUpper, kUnion };

/// |E_upper intersect E_lower| / |denominator|; 0 when the denominator set is
/// empty. Both sets must come from the same dataset.
double error_overlap_rate(const ErrorSet& upper, const ErrorSet& lower,
                          OverlapDenominator denom = OverlapDenominator::kLower);

/// Pairwise matrix m[i][j] = overlap(sets[i] as upper, sets[j] as lower).
std::vector<std::vector<double>> overlap_matrix(const std::vector<ErrorSet>& sets);

/// One comparison row per plan name, aggregated over seeds.
struct PlanSummaryRow {
  std::string plan_name;
  std::string mode;
  std::string path;
  int n_assistants = 0;
  int seeds = 0;
  double student_top1_mean = 0.0;
  double student_top1_stddev = 0.0;
  double adjacent_overlap_mean = 0.0;
  double adjacent_overlap_stddev = 0.0;
};

std::vector<PlanSummaryRow> summarize_plans(const std::vector<PlanReport>& reports);

/// Table rows in emission order: one per (plan, seed, stage).
struct StageRow {
  std::string plan_name;
  std::string mode;
  std::string path;
  std::uint64_t seed = 0;
  int stage = 0;
  std::string model_id;
  std::string trainers;  // '+'-joined role labels
  int epochs = 0;
  double final_top1 = 0.0;
  double final_train_loss = 0.0;
  std::size_t error_count = 0;
};

/// One row per (plan, seed): the student outcome.
struct PlanRow {
  std::string plan_name;
  std::string mode;
  std::string path;
  std::uint64_t seed = 0;
  double student_top1 = 0.0;
  double adjacent_overlap = 0.0;
};

std::vector<StageRow> stage_rows(const std::vector<PlanReport>& reports);
std::vector<PlanRow> plan_rows(const std::vector<PlanReport>& reports);

/// Shortest-round-trip decimal rendering ('.' separator, no grouping).
std::string format_double(double v);

// CSV (header row, UTF-8) and JSON mirrors with identical field names.
std::string stages_csv(const std::vector<StageRow>& rows);
nlohmann::json stages_json(const std::vector<StageRow>& rows);
std::string plans_csv(const std::vector<PlanRow>& rows);
nlohmann::json plans_json(const std::vector<PlanRow>& rows);
std::string summary_csv(const std::vector<PlanSummaryRow>& rows);
nlohmann::json summary_json(const std::vector<PlanSummaryRow>& rows);

}  // namespace dgkd
