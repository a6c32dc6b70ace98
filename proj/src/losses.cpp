#include "dgkd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dgkd/error.hpp"

namespace dgkd {

void DistillConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("temperature must be positive and finite");
  }
  if (n_sources < 1) throw ParameterError("n_sources must be >= 1");
  if (per_source_lambda.empty()) {
    if (lambda < 0.0 || lambda > 1.0) {
      throw ParameterError("lambda must lie in [0,1]");
    }
  } else {
    if (per_source_lambda.size() != static_cast<std::size_t>(n_sources)) {
      throw ParameterError("per-source lambda list must have n_sources entries");
    }
    for (double l : per_source_lambda) {
      if (l < 0.0 || l > 1.0) throw ParameterError("lambda must lie in [0,1]");
    }
  }
}

double DistillConfig::source_lambda(int i) const {
  return per_source_lambda.empty() ? lambda
                                   : per_source_lambda[static_cast<std::size_t>(i)];
}

int GateMask::drop_trials() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), 0));
}

int GateMask::active_count() const {
  return static_cast<int>(bits.size()) - drop_trials();
}

void GateMask::validate() const {
  if (bits.empty()) throw ParameterError("gate mask is empty");
  for (int b : bits) {
    if (b != 0 && b != 1) throw ParameterError("gate bits must be 0 or 1");
  }
  if (active_count() == 0) {
    throw ParameterError("gate mask drops every source; at least one must stay active");
  }
}

GateMask GateMask::all_on(int n_sources) {
  GateMask m;
  m.bits.assign(static_cast<std::size_t>(n_sources), 1);
  return m;
}

GateMask sample_gates(int n_sources, int trials, Rng& rng) {
  if (n_sources < 1) throw ParameterError("n_sources must be >= 1");
  if (trials < 0 || trials > n_sources - 1) {
    throw ParameterError("drop trials " + std::to_string(trials) +
                         " out of range [0," + std::to_string(n_sources - 1) + "]");
  }
  // Partial Fisher-Yates over the source indices; the first `trials` slots
  // are the dropped sources. Draws exactly `trials` randoms.
  std::vector<int> order(static_cast<std::size_t>(n_sources));
  for (int i = 0; i < n_sources; ++i) order[static_cast<std::size_t>(i)] = i;
  GateMask m = GateMask::all_on(n_sources);
  for (int k = 0; k < trials; ++k) {
    const std::size_t pick =
        static_cast<std::size_t>(k) +
        rng.uniform_index(static_cast<std::uint64_t>(n_sources - k));
    std::swap(order[static_cast<std::size_t>(k)], order[pick]);
    m.bits[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 0;
  }
  return m;
}

namespace {

NodeId const_leaf(Tape& tape, const Tensor& t) {
  Tensor copy = t;
  copy.requires_grad = false;
  copy.grad.reset();
  return tape.leaf(std::move(copy));
}

void check_trainer_shapes(const Tensor& student,
                          const std::vector<Tensor>& trainers) {
  for (const Tensor& t : trainers) {
    if (!student.same_shape(t)) {
      throw StructuralError("trainer logits " + shape_to_string(t.shape()) +
                            " do not match student logits " +
                            shape_to_string(student.shape()));
    }
  }
}

}  // namespace

NodeId cross_entropy_node(Tape& tape, NodeId student_logits,
                          std::vector<int> labels) {
  return tape.cross_entropy(student_logits, std::move(labels));
}

NodeId distillation_node(Tape& tape, NodeId student_logits,
                         const Tensor& trainer_logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("temperature must be positive and finite");
  }
  return tape.softened_kl(student_logits, trainer_logits, temperature);
}

NodeId kd_total_node(Tape& tape, NodeId student_logits,
                     const Tensor& teacher_logits, const std::vector<int>& labels,
                     const DistillConfig& cfg) {
  cfg.validate();
  if (cfg.n_sources != 1) {
    throw ParameterError("kd_total_loss is the single-source form; use "
                         "dgkd_total_loss for " +
                         std::to_string(cfg.n_sources) + " sources");
  }
  return dgkd_total_node(tape, student_logits, {teacher_logits}, labels, cfg,
                         GateMask::all_on(1));
}

NodeId dgkd_total_node(Tape& tape, NodeId student_logits,
                       const std::vector<Tensor>& trainer_logits,
                       const std::vector<int>& labels, const DistillConfig& cfg,
                       const GateMask& gates) {
  cfg.validate();
  gates.validate();
  if (trainer_logits.size() != static_cast<std::size_t>(cfg.n_sources) ||
      gates.bits.size() != trainer_logits.size()) {
    throw StructuralError("dgkd_total_loss: " + std::to_string(trainer_logits.size()) +
                          " trainer sources, cfg.n_sources=" +
                          std::to_string(cfg.n_sources) + ", " +
                          std::to_string(gates.bits.size()) + " gate bits");
  }
  check_trainer_shapes(tape.value(student_logits), trainer_logits);

  std::vector<NodeId> terms;
  std::vector<double> weights;
  double ce_weight = 0.0;
  for (int i = 0; i < cfg.n_sources; ++i) ce_weight += 1.0 - cfg.source_lambda(i);
  terms.push_back(tape.cross_entropy(student_logits, labels));
  weights.push_back(ce_weight);
  // Gates drop only the KD terms; the supervision term always stays.
  for (int i = 0; i < cfg.n_sources; ++i) {
    terms.push_back(tape.softened_kl(student_logits,
                                     trainer_logits[static_cast<std::size_t>(i)],
                                     cfg.temperature));
    weights.push_back(gates.bits[static_cast<std::size_t>(i)] == 1
                          ? cfg.source_lambda(i)
                          : 0.0);
  }
  if (cfg.normalize_by_sources) {
    for (double& w : weights) w /= static_cast<double>(cfg.n_sources);
  }
  return tape.weighted_sum(std::move(terms), std::move(weights));
}

double cross_entropy_loss(const Tensor& student_logits,
                          const std::vector<int>& labels) {
  Tape tape;
  return tape.value(tape.cross_entropy(const_leaf(tape, student_logits), labels))[0];
}

double distillation_loss(const Tensor& student_logits,
                         const Tensor& trainer_logits, double temperature) {
  Tape tape;
  return tape.value(distillation_node(tape, const_leaf(tape, student_logits),
                                      trainer_logits, temperature))[0];
}

double kd_total_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                     const std::vector<int>& labels, const DistillConfig& cfg) {
  Tape tape;
  return tape.value(kd_total_node(tape, const_leaf(tape, student_logits),
                                  teacher_logits, labels, cfg))[0];
}

double dgkd_total_loss(const Tensor& student_logits,
                       const std::vector<Tensor>& trainer_logits,
                       const std::vector<int>& labels, const DistillConfig& cfg,
                       const GateMask& gates) {
  Tape tape;
  return tape.value(dgkd_total_node(tape, const_leaf(tape, student_logits),
                                    trainer_logits, labels, cfg, gates))[0];
}

}  // namespace dgkd
