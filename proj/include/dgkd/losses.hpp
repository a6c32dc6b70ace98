#pragma once

#include <vector>

#include "dgkd/autograd.hpp"
#include "dgkd/rng.hpp"
#include "dgkd/tensor.hpp"

namespace dgkd {

/// Temperature / balancing configuration shared by the distillation losses.
///
/// With per_source_lambda empty, the dense loss takes the shared-lambda form
///   n*(1-lambda)*L_CE + lambda * sum_i b_i * L_KD,i
/// over n trainer sources (teacher counts as a source). With per-source
/// lambdas it takes the per-source form
///   sum_i [ (1-lambda_i)*L_CE + lambda_i * b_i * L_KD,i ].
struct DistillConfig {
  double temperature = 4.0;
  double lambda = 0.5;
  std::vector<double> per_source_lambda;  // empty -> shared lambda
  int n_sources = 1;
  /// Divide the total by n_sources; off by default (the literal dense form
  /// inflates the effective CE weight by the source count).
  bool normalize_by_sources = false;

  void validate() const;
  double source_lambda(int i) const;
};

/// Per-mini-batch activity bits over the trainer sources. Zeros mark dropped
/// sources; at least one source stays active.
struct GateMask {
  std::vector<int> bits;

  int drop_trials() const;
  int active_count() const;
  void validate() const;

  static GateMask all_on(int n_sources);
};

/// Drops exactly `trials` distinct sources, chosen uniformly without
/// replacement. With trials == 0 the rng is left untouched.
GateMask sample_gates(int n_sources, int trials, Rng& rng);

// Scalar evaluations (no gradient tracking).

/// Mean over the batch of -log softmax(z)[label].
double cross_entropy_loss(const Tensor& student_logits,
                          const std::vector<int>& labels);

/// T^2-scaled softened KL, trainer distribution as the target.
double distillation_loss(const Tensor& student_logits,
                         const Tensor& trainer_logits, double temperature);

/// Conventional KD: (1-lambda)*L_CE + lambda*L_KD. Requires n_sources == 1.
double kd_total_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                     const std::vector<int>& labels, const DistillConfig& cfg);

/// Dense multi-source loss with stochastic gates; source 0 is the teacher,
/// later sources the assistants in descending capacity.
double dgkd_total_loss(const Tensor& student_logits,
                       const std::vector<Tensor>& trainer_logits,
                       const std::vector<int>& labels, const DistillConfig& cfg,
                       const GateMask& gates);

// Tape-building counterparts used during training. The student logits live on
// the tape; trainer logits are constants.

NodeId cross_entropy_node(Tape& tape, NodeId student_logits,
                          std::vector<int> labels);
NodeId distillation_node(Tape& tape, NodeId student_logits,
                         const Tensor& trainer_logits, double temperature);
NodeId kd_total_node(Tape& tape, NodeId student_logits,
                     const Tensor& teacher_logits, const std::vector<int>& labels,
                     const DistillConfig& cfg);
NodeId dgkd_total_node(Tape& tape, NodeId student_logits,
                       const std::vector<Tensor>& trainer_logits,
                       const std::vector<int>& labels, const DistillConfig& cfg,
                       const GateMask& gates);

}  // namespace dgkd
