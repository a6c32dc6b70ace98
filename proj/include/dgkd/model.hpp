#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dgkd/autograd.hpp"
#include "dgkd/tensor.hpp"

namespace dgkd {

enum class ModelFamily { kMlp, kPlainCnn };

std::string family_name(ModelFamily f);
ModelFamily family_from_name(const std::string& name);

/// A capacity-ranked member of a model family.
///
/// depth counts trainable weight layers: an MLP of depth k is k-1 hidden
/// affine+ReLU layers plus a classifier; a plain CNN of depth k is k-1
/// 3x3 convolutions (ReLU after each, max-pool after every second one, then
/// pooled down to at most 4x4) plus a flatten and an affine classifier.
struct ModelSpec {
  ModelFamily family = ModelFamily::kMlp;
  int depth = 1;
  int hidden_width = 32;                    // mlp
  std::vector<int> channel_schedule;        // plain_cnn; empty -> default
  int num_classes = 2;
  std::vector<std::size_t> input_signature;  // mlp {in...}; cnn {C,H,W}

  void validate() const;
  std::string id() const;  // e.g. "mlp-d8" / "cnn-d4"
  std::string descriptor() const;
  static ModelSpec from_descriptor(const std::string& text);

  bool operator==(const ModelSpec&) const = default;
};

/// Channel widths for the k-1 convolutions: doubling from `base`, capped.
std::vector<int> default_channel_schedule(int depth, int base = 16, int cap = 64);

/// Named, ordered parameter tensors; the order is the deterministic
/// construction/serialization order.
struct ParameterSet {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::uint64_t seed = 0;

  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  std::size_t scalar_count() const;
};

/// Shape plan for one trainable layer; fan_in drives He-uniform limits.
struct LayerShape {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t fan_in;  // 0 for biases (zero-initialized)
};

std::vector<LayerShape> layer_shapes(const ModelSpec& spec);

/// He-uniform weights, zero biases; bit-identical for identical (spec, seed).
ParameterSet build_model(const ModelSpec& spec, std::uint64_t seed);

/// Exact trainable-scalar count, by shape enumeration.
std::size_t parameter_count(const ModelSpec& spec);

/// Orders specs by strictly decreasing parameter_count (teacher first).
/// Ties are ambiguous ranks and raise LadderError.
std::vector<ModelSpec> capacity_order(const std::vector<ModelSpec>& specs);

struct ForwardResult {
  Tape tape;
  NodeId logits;
  std::vector<NodeId> param_nodes;  // parallel to ParameterSet.tensors
};

/// Records the full forward pass on a fresh tape. With train=true the
/// parameter leaves track gradients.
ForwardResult forward(const ParameterSet& params, const ModelSpec& spec,
                      const Tensor& batch, bool train = true);

/// Inference-only logits (no gradient tracking).
Tensor forward_logits(const ParameterSet& params, const ModelSpec& spec,
                      const Tensor& batch);

}  // namespace dgkd
