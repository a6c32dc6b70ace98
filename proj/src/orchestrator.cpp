#include "dgkd/orchestrator.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dgkd/error.hpp"
#include "dgkd/metrics.hpp"

namespace dgkd {

std::string mode_name(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kDirectKd: return "direct_kd";
    case GuidanceMode::kChain: return "chain";
    case GuidanceMode::kDense: return "dense";
    case GuidanceMode::kDenseStochastic: return "dense_stochastic";
  }
  throw ParameterError("unknown guidance mode");
}

GuidanceMode mode_from_name(const std::string& name) {
  if (name == "direct_kd") return GuidanceMode::kDirectKd;
  if (name == "chain") return GuidanceMode::kChain;
  if (name == "dense") return GuidanceMode::kDense;
  if (name == "dense_stochastic") return GuidanceMode::kDenseStochastic;
  throw ParameterError("unknown guidance mode '" + name + "'");
}

void DistillationPlan::validate() const {
  if (ladder.empty()) throw LadderError("plan '" + name + "' has an empty ladder");
  for (const ModelSpec& s : ladder) s.validate();
  // capacity_order re-ranks and rejects ties; the given order must match it.
  const std::vector<ModelSpec> ordered = capacity_order(ladder);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] == ordered[i])) {
      throw LadderError("plan '" + name + "' ladder is not capacity-descending: " +
                        ladder[i].id() + " is out of place (expected " +
                        ordered[i].id() + ")");
    }
  }
  cfg.validate();
  if (!per_stage_cfg.empty() && per_stage_cfg.size() != ladder.size()) {
    throw ParameterError("per-stage configs must cover every ladder stage");
  }
  for (const DistillConfig& c : per_stage_cfg) c.validate();
  if (!stage_seeds.empty() && stage_seeds.size() != ladder.size()) {
    throw ParameterError("stage seed list must cover every ladder stage");
  }
  if (mode == GuidanceMode::kDenseStochastic) {
    const int max_trials = std::max(0, static_cast<int>(ladder.size()) - 2);
    if (drop_trials < 0 || drop_trials > max_trials) {
      throw ParameterError("drop_trials " + std::to_string(drop_trials) +
                           " out of range [0," + std::to_string(max_trials) +
                           "] for a ladder of " + std::to_string(ladder.size()) +
                           " models");
    }
  }
  if (hyper.epochs < 0) throw ParameterError("epochs must be nonnegative");
  if (hyper.batch_size < 1) throw ParameterError("batch size must be positive");
  if (!(hyper.lr >= 0.0) || !std::isfinite(hyper.lr)) {
    throw ParameterError("learning rate must be finite and nonnegative");
  }
}

std::uint64_t DistillationPlan::stage_seed(std::size_t stage) const {
  if (!stage_seeds.empty()) return stage_seeds[stage];
  return derive_seed(seed, "stage", stage);
}

DistillConfig DistillationPlan::stage_config(std::size_t stage) const {
  return per_stage_cfg.empty() ? cfg : per_stage_cfg[stage];
}

std::vector<std::string> DistillationPlan::role_labels() const {
  // Roles follow the executed ladder; direct_kd skips the intermediates.
  std::vector<const ModelSpec*> executed;
  if (mode == GuidanceMode::kDirectKd && ladder.size() > 1) {
    executed = {&ladder.front(), &ladder.back()};
  } else {
    for (const ModelSpec& s : ladder) executed.push_back(&s);
  }
  std::vector<std::string> roles;
  for (std::size_t i = 0; i < executed.size(); ++i) {
    const char* role = i == 0 ? "T" : (i + 1 == executed.size() ? "S" : "A");
    roles.push_back(role + std::to_string(executed[i]->depth));
  }
  return roles;
}

std::string DistillationPlan::path_string() const {
  const std::vector<std::string> roles = role_labels();
  std::string out;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (i) out += "->";
    out += roles[i];
  }
  return out;
}

namespace {

struct TestEval {
  double top1 = 0.0;
  std::vector<std::size_t> error_indices;
};

TestEval evaluate_test(const ParameterSet& params, const ModelSpec& spec,
                       const LabeledDataset& dataset) {
  constexpr std::size_t kEvalBatch = 256;
  TestEval ev;
  const std::vector<std::size_t>& rows = dataset.test_indices;
  for (std::size_t begin = 0; begin < rows.size(); begin += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, rows.size() - begin);
    const std::span<const std::size_t> chunk(rows.data() + begin, count);
    const Tensor logits = forward_logits(params, spec, dataset.gather(chunk));
    const std::size_t classes = logits.extent(1);
    for (std::size_t r = 0; r < count; ++r) {
      const std::size_t pred = argmax_row(logits.data() + r * classes, classes);
      if (static_cast<int>(pred) != dataset.labels[chunk[r]]) {
        ev.error_indices.push_back(chunk[r]);
      }
    }
  }
  std::sort(ev.error_indices.begin(), ev.error_indices.end());
  const std::size_t n = rows.size();
  ev.top1 = n == 0 ? 0.0
                   : static_cast<double>(n - ev.error_indices.size()) /
                         static_cast<double>(n);
  return ev;
}

double epoch_lr(const TrainHyper& hyper, int epoch) {
  if (hyper.schedule == LrSchedule::kConstant) return hyper.lr;
  double lr = hyper.lr;
  if (2 * epoch >= hyper.epochs) lr *= 0.1;
  if (4 * epoch >= 3 * hyper.epochs) lr *= 0.1;
  return lr;
}

// Core stage loop shared by supervised and distillation training. An empty
// trainer list means plain cross-entropy supervision.
std::pair<Checkpoint, StageReport> train_stage(const ModelSpec& spec,
                                               const std::vector<Checkpoint>& trainers,
                                               DistillConfig cfg,
                                               int stochastic_trials,
                                               const LabeledDataset& dataset,
                                               const TrainHyper& hyper,
                                               std::uint64_t seed) {
  spec.validate();
  dataset.validate();
  if (hyper.epochs < 0) throw ParameterError("epochs must be nonnegative");
  if (hyper.batch_size < 1) throw ParameterError("batch size must be positive");
  if (dataset.train_indices.empty()) {
    throw StructuralError("dataset has no training split");
  }
  const std::size_t trainee_size = parameter_count(spec);
  for (const Checkpoint& tr : trainers) {
    if (parameter_count(tr.spec) <= trainee_size) {
      throw LadderError("trainer " + tr.spec.id() + " (" +
                        std::to_string(parameter_count(tr.spec)) +
                        " params) is not larger than trainee " + spec.id() + " (" +
                        std::to_string(trainee_size) + " params)");
    }
  }
  cfg.n_sources = static_cast<int>(trainers.size());
  if (!trainers.empty()) cfg.validate();
  if (stochastic_trials < 0 ||
      (!trainers.empty() &&
       stochastic_trials > static_cast<int>(trainers.size()) - 1)) {
    throw ParameterError("stochastic trials out of range for " +
                         std::to_string(trainers.size()) + " sources");
  }
  if (hyper.cache_trainer_logits && dataset.augment && !trainers.empty()) {
    throw ParameterError("the trainer-logit cache needs augmentation-free data");
  }

  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  Rng gate_rng(derive_seed(seed, "gates"));
  Rng augment_rng(derive_seed(seed, "augment"));

  Checkpoint ck;
  ck.spec = spec;
  ck.params = build_model(spec, seed);
  OptimizerState opt = OptimizerState::create(
      ck.params, {hyper.lr, hyper.momentum, hyper.weight_decay});

  StageReport report;
  report.model_id = spec.id();
  report.spec_id = spec.id();
  for (const Checkpoint& tr : trainers) report.trainer_ids.push_back(tr.spec.id());

  // Optional cache: frozen-trainer logits per train example, computed once.
  std::vector<Tensor> cached_logits;
  if (hyper.cache_trainer_logits && !trainers.empty()) {
    for (const Checkpoint& tr : trainers) {
      Tensor all({std::max<std::size_t>(dataset.example_count(), 1),
                  static_cast<std::size_t>(spec.num_classes)});
      constexpr std::size_t kEvalBatch = 256;
      const auto& rows = dataset.train_indices;
      for (std::size_t begin = 0; begin < rows.size(); begin += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, rows.size() - begin);
        const std::span<const std::size_t> chunk(rows.data() + begin, count);
        const Tensor logits = trainer_logits(tr, dataset.gather(chunk));
        for (std::size_t r = 0; r < count; ++r) {
          std::copy(logits.data() + r * logits.extent(1),
                    logits.data() + (r + 1) * logits.extent(1),
                    all.data() + chunk[r] * logits.extent(1));
        }
      }
      cached_logits.push_back(std::move(all));
    }
  }

  std::vector<std::size_t> order = dataset.train_indices;
  const std::size_t n_train = order.size();
  const std::size_t batch_size = static_cast<std::size_t>(hyper.batch_size);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    opt.options.lr = epoch_lr(hyper, epoch);
    // Fisher-Yates on the training order.
    for (std::size_t i = n_train; i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n_train; begin += batch_size) {
      const std::size_t count = std::min(batch_size, n_train - begin);
      const std::span<const std::size_t> rows(order.data() + begin, count);
      Tensor batch = dataset.gather(rows);
      if (dataset.augment) batch = augment_batch(batch, augment_rng);
      std::vector<int> labels = dataset.gather_labels(rows);

      std::vector<Tensor> source_logits;
      source_logits.reserve(trainers.size());
      for (std::size_t t = 0; t < trainers.size(); ++t) {
        if (!cached_logits.empty()) {
          Tensor sel({count, static_cast<std::size_t>(spec.num_classes)});
          const std::size_t classes = sel.extent(1);
          for (std::size_t r = 0; r < count; ++r) {
            std::copy(cached_logits[t].data() + rows[r] * classes,
                      cached_logits[t].data() + (rows[r] + 1) * classes,
                      sel.data() + r * classes);
          }
          source_logits.push_back(std::move(sel));
        } else {
          source_logits.push_back(trainer_logits(trainers[t], batch));
        }
      }

      double loss_value;
      ForwardResult fr;
      try {
        fr = forward(ck.params, spec, batch, /*train=*/true);
        NodeId loss;
        if (trainers.empty()) {
          loss = cross_entropy_node(fr.tape, fr.logits, std::move(labels));
        } else {
          const GateMask gates =
              stochastic_trials > 0
                  ? sample_gates(cfg.n_sources, stochastic_trials, gate_rng)
                  : GateMask::all_on(cfg.n_sources);
          loss = dgkd_total_node(fr.tape, fr.logits, source_logits, labels, cfg,
                                 gates);
        }
        loss_value = fr.tape.value(loss)[0];
        if (std::isfinite(loss_value)) {
          fr.tape.backward(loss);
        }
      } catch (const NumericError& e) {
        // Parameters blew up; the losses reject non-finite logits.
        throw TrainingDivergence("training " + spec.id() + " diverged at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(begin / batch_size) + ": " +
                                 e.what());
      }
      if (!std::isfinite(loss_value)) {
        throw TrainingDivergence("non-finite loss training " + spec.id() +
                                 " at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(begin / batch_size) +
                                 "; stage aborted");
      }
      std::vector<std::vector<double>> grads;
      grads.reserve(fr.param_nodes.size());
      for (NodeId id : fr.param_nodes) grads.push_back(fr.tape.grad(id));
      sgd_momentum_step(ck.params, grads, opt);
      loss_sum += loss_value * static_cast<double>(count);
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(n_train));
    report.test_top1.push_back(evaluate_test(ck.params, spec, dataset).top1);
  }

  const TestEval final_eval = evaluate_test(ck.params, spec, dataset);
  report.final_top1 = final_eval.top1;
  report.final_train_loss =
      report.train_loss.empty() ? 0.0 : report.train_loss.back();
  report.error_indices = final_eval.error_indices;

  ck.epochs_completed = static_cast<std::uint32_t>(hyper.epochs);
  ck.rng_state = shuffle_rng.state();
  ck.final_top1 = report.final_top1;
  ck.final_train_loss = report.final_train_loss;
  return {std::move(ck), std::move(report)};
}

}  // namespace

std::pair<Checkpoint, StageReport> train_supervised(const ModelSpec& spec,
                                                    const LabeledDataset& dataset,
                                                    const TrainHyper& hyper,
                                                    std::uint64_t seed) {
  return train_stage(spec, {}, DistillConfig{}, 0, dataset, hyper, seed);
}

std::pair<Checkpoint, StageReport> train_with_trainers(
    const ModelSpec& spec, const std::vector<Checkpoint>& trainers,
    const DistillConfig& cfg, int stochastic_trials, const LabeledDataset& dataset,
    const TrainHyper& hyper, std::uint64_t seed) {
  if (trainers.empty()) {
    throw LadderError("train_with_trainers needs at least one trainer");
  }
  return train_stage(spec, trainers, cfg, stochastic_trials, dataset, hyper, seed);
}

Tensor trainer_logits(const Checkpoint& checkpoint, const Tensor& batch) {
  return forward_logits(checkpoint.params, checkpoint.spec, batch);
}

PlanReport run_plan(const DistillationPlan& plan, const LabeledDataset& dataset,
                    const std::filesystem::path& artifact_dir) {
  plan.validate();
  dataset.validate();
  const auto started = std::chrono::steady_clock::now();

  std::vector<const ModelSpec*> executed;
  if (plan.mode == GuidanceMode::kDirectKd && plan.ladder.size() > 1) {
    executed = {&plan.ladder.front(), &plan.ladder.back()};
  } else {
    for (const ModelSpec& s : plan.ladder) executed.push_back(&s);
  }
  const std::vector<std::string> roles = plan.role_labels();

  PlanReport pr;
  pr.plan_name = plan.name;
  pr.mode = mode_name(plan.mode);
  pr.path = plan.path_string();
  pr.seed = plan.seed;
  pr.dataset_id = dataset.id;
  pr.test_size = dataset.test_indices.size();

  if (!artifact_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(artifact_dir, ec);
    if (ec) throw IoError("cannot create '" + artifact_dir.string() + "'");
  }
  const auto persist_report = [&]() {
    if (artifact_dir.empty()) return;
    nlohmann::json j = pr;
    std::ofstream out(artifact_dir / "plan_report.json");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("cannot write plan report in '" + artifact_dir.string() + "'");
  };

  std::vector<Checkpoint> checkpoints;
  std::vector<ErrorSet> error_sets;
  for (std::size_t k = 0; k < executed.size(); ++k) {
    const ModelSpec& spec = *executed[k];
    // Stage k reads checkpoints with index < k only.
    std::vector<Checkpoint> trainers;
    if (k > 0) {
      if (plan.mode == GuidanceMode::kChain) {
        trainers.push_back(checkpoints.back());
      } else {
        trainers = checkpoints;
      }
    }
    DistillConfig cfg = plan.stage_config(k);
    cfg.n_sources = static_cast<int>(trainers.size());
    // Early stages see fewer sources than the student; per-source lambdas
    // stay associated with their trainer (entry i belongs to checkpoint i).
    if (!cfg.per_source_lambda.empty() &&
        cfg.per_source_lambda.size() > trainers.size()) {
      cfg.per_source_lambda.resize(trainers.size());
    }
    int trials = 0;
    const bool is_student = k + 1 == executed.size();
    if (plan.mode == GuidanceMode::kDenseStochastic && k > 0 &&
        (is_student || plan.stochastic_for_tas)) {
      // Early TA stages have fewer sources than the configured trial count.
      trials = std::min(plan.drop_trials, static_cast<int>(trainers.size()) - 1);
    }
    const std::uint64_t seed_k = plan.stage_seed(k);
    try {
      auto [ck, stage] = k == 0
                             ? train_supervised(spec, dataset, plan.hyper, seed_k)
                             : train_with_trainers(spec, trainers, cfg, trials,
                                                   dataset, plan.hyper, seed_k);
      ck.stage_index = static_cast<std::uint32_t>(k);
      stage.stage_index = static_cast<int>(k);
      stage.model_id = roles[k];
      stage.trainer_ids.clear();
      if (k > 0) {
        if (plan.mode == GuidanceMode::kChain) {
          stage.trainer_ids.push_back(roles[k - 1]);
        } else {
          for (std::size_t i = 0; i < k; ++i) stage.trainer_ids.push_back(roles[i]);
        }
      }
      ErrorSet es;
      es.dataset_id = dataset.id;
      es.model_id = stage.model_id;
      es.indices = stage.error_indices;
      error_sets.push_back(std::move(es));
      pr.stages.push_back(std::move(stage));
      if (!artifact_dir.empty()) {
        save_checkpoint(ck, artifact_dir / ("stage" + std::to_string(k) + "_" +
                                            roles[k] + ".dgkd"));
      }
      checkpoints.push_back(std::move(ck));
    } catch (const Error&) {
      pr.aborted_stage = roles[k];
      pr.overlap = overlap_matrix(error_sets);
      pr.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
              .count();
      persist_report();
      throw;
    }
  }

  pr.overlap = overlap_matrix(error_sets);
  pr.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  persist_report();
  return pr;
}

namespace {

void put_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 8);
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

void take_bytes(std::istream& in, void* data, std::size_t n) {
  if (!in.read(static_cast<char*>(data), static_cast<std::streamsize>(n))) {
    throw CheckpointError("checkpoint file is truncated or corrupt");
  }
}

std::uint32_t take_u32(std::istream& in) {
  unsigned char b[4];
  take_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t take_u64(std::istream& in) {
  unsigned char b[8];
  take_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double take_f64(std::istream& in) { return std::bit_cast<double>(take_u64(in)); }

std::string take_string(std::istream& in, std::size_t max_len = 1u << 20) {
  const std::uint32_t len = take_u32(in);
  if (len > max_len) throw CheckpointError("checkpoint string field is oversized");
  std::string s(len, '\0');
  take_bytes(in, s.data(), len);
  return s;
}

constexpr char kMagic[4] = {'D', 'G', 'K', 'D'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

void write_checkpoint_stream(const Checkpoint& ck, std::ostream& out) {
  put_bytes(out, kMagic, 4);
  put_u32(out, kFormatVersion);
  nlohmann::json meta;
  meta["spec"] = nlohmann::json::parse(ck.spec.descriptor());
  meta["stage_index"] = ck.stage_index;
  meta["epochs_completed"] = ck.epochs_completed;
  meta["rng_state"] = ck.rng_state;
  meta["params_seed"] = ck.params.seed;
  meta["final_top1"] = ck.final_top1;
  meta["final_train_loss"] = ck.final_train_loss;
  put_string(out, meta.dump());
  put_u32(out, static_cast<std::uint32_t>(ck.params.tensors.size()));
  for (const auto& [name, t] : ck.params.tensors) {
    put_string(out, name);
    const std::uint8_t dtype = kDtypeF64;
    put_bytes(out, &dtype, 1);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_u64(out, e);
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint_stream(checkpoint, out);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4];
  take_bytes(in, magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw CheckpointError("'" + path.string() + "' is not a DGKD checkpoint");
  }
  const std::uint32_t version = take_u32(in);
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
  }
  const std::string meta_text = take_string(in);
  nlohmann::json meta = nlohmann::json::parse(meta_text, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) {
    throw CheckpointError("checkpoint descriptor is not valid JSON");
  }
  Checkpoint ck;
  try {
    ck.spec = ModelSpec::from_descriptor(meta.at("spec").dump());
    ck.stage_index = meta.at("stage_index").get<std::uint32_t>();
    ck.epochs_completed = meta.at("epochs_completed").get<std::uint32_t>();
    ck.rng_state = meta.at("rng_state").get<std::uint64_t>();
    ck.params.seed = meta.at("params_seed").get<std::uint64_t>();
    ck.final_top1 = meta.at("final_top1").get<double>();
    ck.final_train_loss = meta.at("final_train_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint descriptor: ") + e.what());
  }
  const std::uint32_t tensor_count = take_u32(in);
  for (std::uint32_t t = 0; t < tensor_count; ++t) {
    const std::string name = take_string(in);
    std::uint8_t dtype = 0;
    take_bytes(in, &dtype, 1);
    if (dtype != kDtypeF64) {
      throw CheckpointError("unsupported dtype tag " + std::to_string(dtype));
    }
    const std::uint32_t rank = take_u32(in);
    if (rank > 8) throw CheckpointError("implausible tensor rank in checkpoint");
    std::vector<std::size_t> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(take_u64(in));
    }
    const std::size_t size = shape_size(shape);
    if (size > (1u << 28)) throw CheckpointError("implausible tensor size in checkpoint");
    std::vector<double> data(size);
    for (std::size_t i = 0; i < size; ++i) data[i] = take_f64(in);
    Tensor tensor(std::move(shape), std::move(data));
    if (!tensor.all_finite()) {
      throw CheckpointError("checkpoint tensor '" + name + "' has non-finite values");
    }
    tensor.requires_grad = true;
    ck.params.tensors.emplace_back(name, std::move(tensor));
  }
  // Reject the spec/parameter combination rather than fail later.
  const std::vector<LayerShape> expect = layer_shapes(ck.spec);
  if (expect.size() != ck.params.tensors.size()) {
    throw CheckpointError("checkpoint tensor count does not match its spec");
  }
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (expect[i].name != ck.params.tensors[i].first ||
        expect[i].shape != ck.params.tensors[i].second.shape()) {
      throw CheckpointError("checkpoint tensor '" + ck.params.tensors[i].first +
                            "' does not match spec layer '" + expect[i].name + "'");
    }
  }
  return ck;
}

std::uint64_t checkpoint_digest(const Checkpoint& checkpoint) {
  std::ostringstream buffer(std::ios::binary);
  write_checkpoint_stream(checkpoint, buffer);
  const std::string bytes = buffer.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dgkd
