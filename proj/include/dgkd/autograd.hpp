#pragma once

#include <cstddef>
#include <vector>

#include "dgkd/tensor.hpp"

namespace dgkd {

using NodeId = std::size_t;

/// Reverse-mode tape over a fixed primitive set: affine, 3x3 "same" conv,
/// ReLU, 2x2/stride-2 max-pool, flatten, plus scalar loss nodes
/// (cross-entropy, temperature-softened KL, weighted sum).
///
/// Usage is define-by-run: record leaves and ops, call backward(loss) once,
/// then read gradients via grad(). A tape is confined to one thread.
class Tape {
 public:
  /// Records an input tensor. Gradients are tracked iff t.requires_grad.
  NodeId leaf(Tensor t);

  /// y[B,O] = x[B,I] * w[I,O] + b[O]
  NodeId affine(NodeId x, NodeId w, NodeId b);

  /// y[B,K,H,W] = conv3x3(x[B,C,H,W], w[K,C,3,3]) + b[K], stride 1, zero
  /// padding "same".
  NodeId conv2d3x3(NodeId x, NodeId w, NodeId b);

  NodeId relu(NodeId x);

  /// 2x2 max-pool, stride 2, floor mode (odd trailing row/column dropped).
  /// Requires H >= 2 and W >= 2.
  NodeId max_pool2x2(NodeId x);

  /// [B, ...] -> [B, product(rest)]
  NodeId flatten(NodeId x);

  /// Mean over the batch of -log softmax(z)[label], log-sum-exp stabilized.
  NodeId cross_entropy(NodeId logits, std::vector<int> labels);

  /// T^2 * mean over the batch of KL(p_trainer || p_student) where
  /// p = softmax(z / T). The trainer logits are a constant: no gradient
  /// flows into them.
  NodeId softened_kl(NodeId student_logits, const Tensor& trainer_logits,
                     double temperature);

  /// Scalar combination sum_i weights[i] * terms[i], accumulated left to
  /// right.
  NodeId weighted_sum(std::vector<NodeId> terms, std::vector<double> weights);

  const Tensor& value(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }

  /// Populates gradients of `loss` (a scalar) w.r.t. every node that needs
  /// them. Grad-requiring leaves off the path from the loss get zeros.
  void backward(NodeId loss);

  /// Gradient buffer of a node after backward(); same length as its value.
  const std::vector<double>& grad(NodeId id) const;
  bool has_grad(NodeId id) const;

 private:
  enum class Op {
    kLeaf,
    kAffine,
    kConv2d,
    kRelu,
    kMaxPool,
    kFlatten,
    kCrossEntropy,
    kSoftenedKl,
    kWeightedSum,
  };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    std::vector<double> grad;
    bool needs_grad = false;
    // per-op context
    std::vector<int> labels;            // cross-entropy
    std::vector<std::size_t> indices;   // max-pool argmax (flat input offsets)
    std::vector<std::size_t> in_shape;  // flatten
    std::vector<double> cached;         // probs (CE) or dL/dz (softened KL)
    std::vector<double> weights;        // weighted sum
  };

  NodeId push(Node n);
  const Node& node(NodeId id) const;
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
};

}  // namespace dgkd
