#include "dgkd/report.hpp"

#include "dgkd/error.hpp"

namespace dgkd {

void ErrorSet::validate(std::size_t dataset_size) const {
  for (std::size_t i = 0; i + 1 < indices.size(); ++i) {
    if (indices[i] >= indices[i + 1]) {
      throw StructuralError("error-set indices must be strictly increasing");
    }
  }
  if (!indices.empty() && indices.back() >= dataset_size) {
    throw StructuralError("error-set index " + std::to_string(indices.back()) +
                          " outside dataset of size " + std::to_string(dataset_size));
  }
}

double PlanReport::mean_adjacent_overlap() const {
  if (stages.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < stages.size(); ++k) sum += overlap[k][k + 1];
  return sum / static_cast<double>(stages.size() - 1);
}

const StageReport& PlanReport::student_stage() const {
  if (stages.empty()) throw StructuralError("plan report has no stages");
  return stages.back();
}

void to_json(nlohmann::json& j, const StageReport& r) {
  j = nlohmann::json{{"stage_index", r.stage_index},
                     {"model_id", r.model_id},
                     {"spec_id", r.spec_id},
                     {"trainer_ids", r.trainer_ids},
                     {"train_loss", r.train_loss},
                     {"test_top1", r.test_top1},
                     {"final_top1", r.final_top1},
                     {"final_train_loss", r.final_train_loss},
                     {"error_indices", r.error_indices}};
}

void from_json(const nlohmann::json& j, StageReport& r) {
  j.at("stage_index").get_to(r.stage_index);
  j.at("model_id").get_to(r.model_id);
  j.at("spec_id").get_to(r.spec_id);
  j.at("trainer_ids").get_to(r.trainer_ids);
  j.at("train_loss").get_to(r.train_loss);
  j.at("test_top1").get_to(r.test_top1);
  j.at("final_top1").get_to(r.final_top1);
  j.at("final_train_loss").get_to(r.final_train_loss);
  j.at("error_indices").get_to(r.error_indices);
}

void to_json(nlohmann::json& j, const PlanReport& r) {
  j = nlohmann::json{{"plan_name", r.plan_name},
                     {"mode", r.mode},
                     {"path", r.path},
                     {"seed", r.seed},
                     {"dataset_id", r.dataset_id},
                     {"test_size", r.test_size},
                     {"stages", r.stages},
                     {"overlap", r.overlap},
                     {"wall_seconds", r.wall_seconds},
                     {"aborted_stage", r.aborted_stage}};
}

void from_json(const nlohmann::json& j, PlanReport& r) {
  j.at("plan_name").get_to(r.plan_name);
  j.at("mode").get_to(r.mode);
  j.at("path").get_to(r.path);
  j.at("seed").get_to(r.seed);
  j.at("dataset_id").get_to(r.dataset_id);
  j.at("test_size").get_to(r.test_size);
  j.at("stages").get_to(r.stages);
  j.at("overlap").get_to(r.overlap);
  j.at("wall_seconds").get_to(r.wall_seconds);
  j.at("aborted_stage").get_to(r.aborted_stage);
}

}  // namespace dgkd
