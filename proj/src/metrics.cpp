#include "dgkd/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "dgkd/error.hpp"

namespace dgkd {

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

double top1_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.extent(0) != labels.size()) {
    throw StructuralError("top1_accuracy: logits " + shape_to_string(logits.shape()) +
                          " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.extent(0), classes = logits.extent(1);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (static_cast<int>(argmax_row(logits.data() + b * classes, classes)) ==
        labels[b]) {
      ++correct;
    }
  }
  return batch == 0 ? 0.0
                    : static_cast<double>(correct) / static_cast<double>(batch);
}

ErrorSet error_set(const Checkpoint& checkpoint, const LabeledDataset& dataset) {
  dataset.validate();
  constexpr std::size_t kEvalBatch = 256;
  ErrorSet es;
  es.dataset_id = dataset.id;
  es.model_id = checkpoint.spec.id();
  const std::vector<std::size_t>& rows = dataset.test_indices;
  for (std::size_t begin = 0; begin < rows.size(); begin += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, rows.size() - begin);
    const std::span<const std::size_t> chunk(rows.data() + begin, count);
    const Tensor logits = trainer_logits(checkpoint, dataset.gather(chunk));
    const std::size_t classes = logits.extent(1);
    for (std::size_t r = 0; r < count; ++r) {
      if (static_cast<int>(argmax_row(logits.data() + r * classes, classes)) !=
          dataset.labels[chunk[r]]) {
        es.indices.push_back(chunk[r]);
      }
    }
  }
  std::sort(es.indices.begin(), es.indices.end());
  return es;
}

double error_overlap_rate(const ErrorSet& upper, const ErrorSet& lower,
                          OverlapDenominator denom) {
  if (upper.dataset_id != lower.dataset_id) {
    throw StructuralError("error overlap across datasets '" + upper.dataset_id +
                          "' and '" + lower.dataset_id + "'");
  }
  std::vector<std::size_t> a = upper.indices;
  std::vector<std::size_t> b = lower.indices;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(inter));
  std::size_t d = 0;
  switch (denom) {
    case OverlapDenominator::kLower: d = b.size(); break;
    case OverlapDenominator::kUpper: d = a.size(); break;
    case OverlapDenominator::kUnion: d = a.size() + b.size() - inter.size(); break;
  }
  if (d == 0) return 0.0;
  return static_cast<double>(inter.size()) / static_cast<double>(d);
}

std::vector<std::vector<double>> overlap_matrix(const std::vector<ErrorSet>& sets) {
  const std::size_t n = sets.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m[i][j] = error_overlap_rate(sets[i], sets[j]);
    }
  }
  return m;
}

namespace {

int assistants_in_path(const std::string& path) {
  int n = 0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i] == 'A') ++n;
  }
  return n;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

MeanStd mean_stddev(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

}  // namespace

std::vector<PlanSummaryRow> summarize_plans(const std::vector<PlanReport>& reports) {
  if (reports.empty()) throw ParameterError("summarize_plans: no reports");
  std::map<std::string, std::vector<const PlanReport*>> groups;
  for (const PlanReport& r : reports) groups[r.plan_name].push_back(&r);
  std::vector<PlanSummaryRow> rows;
  for (const auto& [name, group] : groups) {
    PlanSummaryRow row;
    row.plan_name = name;
    row.mode = group.front()->mode;
    row.path = group.front()->path;
    row.n_assistants = assistants_in_path(row.path);
    row.seeds = static_cast<int>(group.size());
    std::vector<double> top1s, overlaps;
    for (const PlanReport* r : group) {
      top1s.push_back(r->student_stage().final_top1);
      overlaps.push_back(r->mean_adjacent_overlap());
    }
    const MeanStd t = mean_stddev(top1s);
    const MeanStd o = mean_stddev(overlaps);
    row.student_top1_mean = t.mean;
    row.student_top1_stddev = t.stddev;
    row.adjacent_overlap_mean = o.mean;
    row.adjacent_overlap_stddev = o.stddev;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<StageRow> stage_rows(const std::vector<PlanReport>& reports) {
  std::vector<StageRow> rows;
  for (const PlanReport& r : reports) {
    for (const StageReport& s : r.stages) {
      StageRow row;
      row.plan_name = r.plan_name;
      row.mode = r.mode;
      row.path = r.path;
      row.seed = r.seed;
      row.stage = s.stage_index;
      row.model_id = s.model_id;
      for (std::size_t i = 0; i < s.trainer_ids.size(); ++i) {
        if (i) row.trainers += "+";
        row.trainers += s.trainer_ids[i];
      }
      row.epochs = static_cast<int>(s.train_loss.size());
      row.final_top1 = s.final_top1;
      row.final_train_loss = s.final_train_loss;
      row.error_count = s.error_indices.size();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<PlanRow> plan_rows(const std::vector<PlanReport>& reports) {
  std::vector<PlanRow> rows;
  for (const PlanReport& r : reports) {
    PlanRow row;
    row.plan_name = r.plan_name;
    row.mode = r.mode;
    row.path = r.path;
    row.seed = r.seed;
    row.student_top1 = r.student_stage().final_top1;
    row.adjacent_overlap = r.mean_adjacent_overlap();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

}  // namespace

std::string stages_csv(const std::vector<StageRow>& rows) {
  std::string out =
      "plan,mode,path,seed,stage,model,trainers,epochs,final_top1,"
      "final_train_loss,error_count\n";
  for (const StageRow& r : rows) {
    out += csv_escape(r.plan_name) + "," + r.mode + "," + r.path + "," +
           std::to_string(r.seed) + "," + std::to_string(r.stage) + "," +
           r.model_id + "," + r.trainers + "," + std::to_string(r.epochs) + "," +
           format_double(r.final_top1) + "," + format_double(r.final_train_loss) +
           "," + std::to_string(r.error_count) + "\n";
  }
  return out;
}

nlohmann::json stages_json(const std::vector<StageRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const StageRow& r : rows) {
    arr.push_back({{"plan", r.plan_name},
                   {"mode", r.mode},
                   {"path", r.path},
                   {"seed", r.seed},
                   {"stage", r.stage},
                   {"model", r.model_id},
                   {"trainers", r.trainers},
                   {"epochs", r.epochs},
                   {"final_top1", r.final_top1},
                   {"final_train_loss", r.final_train_loss},
                   {"error_count", r.error_count}});
  }
  return arr;
}

std::string plans_csv(const std::vector<PlanRow>& rows) {
  std::string out = "plan,mode,path,seed,student_top1,adjacent_overlap\n";
  for (const PlanRow& r : rows) {
    out += csv_escape(r.plan_name) + "," + r.mode + "," + r.path + "," +
           std::to_string(r.seed) + "," + format_double(r.student_top1) + "," +
           format_double(r.adjacent_overlap) + "\n";
  }
  return out;
}

nlohmann::json plans_json(const std::vector<PlanRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PlanRow& r : rows) {
    arr.push_back({{"plan", r.plan_name},
                   {"mode", r.mode},
                   {"path", r.path},
                   {"seed", r.seed},
                   {"student_top1", r.student_top1},
                   {"adjacent_overlap", r.adjacent_overlap}});
  }
  return arr;
}

std::string summary_csv(const std::vector<PlanSummaryRow>& rows) {
  std::string out =
      "plan,mode,path,n_assistants,seeds,student_top1_mean,student_top1_stddev,"
      "adjacent_overlap_mean,adjacent_overlap_stddev\n";
  for (const PlanSummaryRow& r : rows) {
    out += csv_escape(r.plan_name) + "," + r.mode + "," + r.path + "," +
           std::to_string(r.n_assistants) + "," + std::to_string(r.seeds) + "," +
           format_double(r.student_top1_mean) + "," +
           format_double(r.student_top1_stddev) + "," +
           format_double(r.adjacent_overlap_mean) + "," +
           format_double(r.adjacent_overlap_stddev) + "\n";
  }
  return out;
}

nlohmann::json summary_json(const std::vector<PlanSummaryRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PlanSummaryRow& r : rows) {
    arr.push_back({{"plan", r.plan_name},
                   {"mode", r.mode},
                   {"path", r.path},
                   {"n_assistants", r.n_assistants},
                   {"seeds", r.seeds},
                   {"student_top1_mean", r.student_top1_mean},
                   {"student_top1_stddev", r.student_top1_stddev},
                   {"adjacent_overlap_mean", r.adjacent_overlap_mean},
                   {"adjacent_overlap_stddev", r.adjacent_overlap_stddev}});
  }
  return arr;
}

}  // namespace dgkd
