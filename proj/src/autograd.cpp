#include "dgkd/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dgkd/error.hpp"

namespace dgkd {

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

void Tape::check_id(NodeId id) const {
  if (id >= nodes_.size()) {
    throw StructuralError("node id " + std::to_string(id) + " is not on this tape");
  }
}

const Tape::Node& Tape::node(NodeId id) const {
  check_id(id);
  return nodes_[id];
}

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

bool Tape::has_grad(NodeId id) const { return !node(id).grad.empty(); }

const std::vector<double>& Tape::grad(NodeId id) const {
  const Node& n = node(id);
  if (n.grad.empty()) {
    throw StructuralError("node has no gradient; run backward() first");
  }
  return n.grad;
}

NodeId Tape::leaf(Tensor t) {
  Node n;
  n.op = Op::kLeaf;
  n.needs_grad = t.requires_grad;
  n.value = std::move(t);
  return push(std::move(n));
}

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 ||
      xv.extent(1) != wv.extent(0) || wv.extent(1) != bv.extent(0)) {
    throw StructuralError("affine shape mismatch: x" + shape_to_string(xv.shape()) +
                          " w" + shape_to_string(wv.shape()) + " b" +
                          shape_to_string(bv.shape()));
  }
  const std::size_t batch = xv.extent(0), in = xv.extent(1), out = wv.extent(1);
  Node n;
  n.op = Op::kAffine;
  n.inputs = {x, w, b};
  n.needs_grad = nodes_[x].needs_grad || nodes_[w].needs_grad || nodes_[b].needs_grad;
  n.value = Tensor({batch, out});
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = xv.data() + r * in;
    double* yr = n.value.data() + r * out;
    for (std::size_t j = 0; j < out; ++j) yr[j] = bv[j];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* wrow = wv.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xi * wrow[j];
    }
  }
  return push(std::move(n));
}

NodeId Tape::conv2d3x3(NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  if (xv.rank() != 4 || wv.rank() != 4 || bv.rank() != 1 ||
      wv.extent(2) != 3 || wv.extent(3) != 3 || wv.extent(1) != xv.extent(1) ||
      bv.extent(0) != wv.extent(0)) {
    throw StructuralError("conv2d3x3 shape mismatch: x" + shape_to_string(xv.shape()) +
                          " w" + shape_to_string(wv.shape()) + " b" +
                          shape_to_string(bv.shape()));
  }
  const std::size_t batch = xv.extent(0), cin = xv.extent(1);
  const std::size_t h = xv.extent(2), wd = xv.extent(3);
  const std::size_t cout = wv.extent(0);
  Node n;
  n.op = Op::kConv2d;
  n.inputs = {x, w, b};
  n.needs_grad = nodes_[x].needs_grad || nodes_[w].needs_grad || nodes_[b].needs_grad;
  n.value = Tensor({batch, cout, h, wd});
  const auto at_x = [&](std::size_t bb, std::size_t c, std::size_t i, std::size_t j) {
    return xv.data()[((bb * cin + c) * h + i) * wd + j];
  };
  for (std::size_t bb = 0; bb < batch; ++bb) {
    for (std::size_t k = 0; k < cout; ++k) {
      double* yk = n.value.data() + (bb * cout + k) * h * wd;
      const double* wk = wv.data() + k * cin * 9;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < wd; ++j) {
          double acc = bv[k];
          for (std::size_t c = 0; c < cin; ++c) {
            const double* wkc = wk + c * 9;
            for (int di = -1; di <= 1; ++di) {
              const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
              if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
              for (int dj = -1; dj <= 1; ++dj) {
                const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + dj;
                if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
                acc += at_x(bb, c, ii, jj) * wkc[(di + 1) * 3 + (dj + 1)];
              }
            }
          }
          yk[i * wd + j] = acc;
        }
      }
    }
  }
  return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::kRelu;
  n.inputs = {x};
  n.needs_grad = nodes_[x].needs_grad;
  n.value = xv;
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    if (n.value[i] < 0.0) n.value[i] = 0.0;
  }
  return push(std::move(n));
}

NodeId Tape::max_pool2x2(NodeId x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) {
    throw StructuralError("max_pool2x2 expects [B,C,H,W], got " +
                          shape_to_string(xv.shape()));
  }
  const std::size_t batch = xv.extent(0), ch = xv.extent(1);
  const std::size_t h = xv.extent(2), wd = xv.extent(3);
  if (h < 2 || wd < 2) {
    throw StructuralError("max_pool2x2 needs spatial dims >= 2, got " +
                          shape_to_string(xv.shape()));
  }
  const std::size_t oh = h / 2, ow = wd / 2;
  Node n;
  n.op = Op::kMaxPool;
  n.inputs = {x};
  n.needs_grad = nodes_[x].needs_grad;
  n.value = Tensor({batch, ch, oh, ow});
  n.indices.resize(n.value.size());
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < batch * ch; ++bc) {
    const double* plane = xv.data() + bc * h * wd;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j, ++o) {
        // First strictly-greater element wins, so ties break deterministically.
        std::size_t best = (2 * i) * wd + 2 * j;
        double bv = plane[best];
        for (int di = 0; di < 2; ++di) {
          for (int dj = 0; dj < 2; ++dj) {
            const std::size_t idx = (2 * i + di) * wd + (2 * j + dj);
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          }
        }
        n.value[o] = bv;
        n.indices[o] = bc * h * wd + best;
      }
    }
  }
  return push(std::move(n));
}

NodeId Tape::flatten(NodeId x) {
  const Tensor& xv = value(x);
  if (xv.rank() < 2) {
    throw StructuralError("flatten expects rank >= 2, got " +
                          shape_to_string(xv.shape()));
  }
  Node n;
  n.op = Op::kFlatten;
  n.inputs = {x};
  n.needs_grad = nodes_[x].needs_grad;
  n.in_shape = xv.shape();
  n.value = Tensor({xv.extent(0), xv.size() / xv.extent(0)}, xv.values());
  return push(std::move(n));
}

NodeId Tape::cross_entropy(NodeId logits, std::vector<int> labels) {
  const Tensor& zv = value(logits);
  if (zv.rank() != 2 || zv.extent(0) != labels.size()) {
    throw StructuralError("cross_entropy: logits " + shape_to_string(zv.shape()) +
                          " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = zv.extent(0), classes = zv.extent(1);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ParameterError("label " + std::to_string(y) + " out of range [0," +
                           std::to_string(classes) + ")");
    }
  }
  const Tensor logp = log_softmax_with_temperature(zv, 1.0);
  Node n;
  n.op = Op::kCrossEntropy;
  n.inputs = {logits};
  n.needs_grad = nodes_[logits].needs_grad;
  n.labels = std::move(labels);
  n.cached.resize(zv.size());
  for (std::size_t i = 0; i < zv.size(); ++i) n.cached[i] = std::exp(logp[i]);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    loss -= logp[b * classes + static_cast<std::size_t>(n.labels[b])];
  }
  n.value = Tensor::scalar(loss / static_cast<double>(batch));
  return push(std::move(n));
}

NodeId Tape::softened_kl(NodeId student_logits, const Tensor& trainer_logits,
                         double temperature) {
  const Tensor& zs = value(student_logits);
  if (!zs.same_shape(trainer_logits)) {
    throw StructuralError("softened_kl: student " + shape_to_string(zs.shape()) +
                          " vs trainer " + shape_to_string(trainer_logits.shape()));
  }
  const Tensor logp_s = log_softmax_with_temperature(zs, temperature);
  const Tensor logp_t = log_softmax_with_temperature(trainer_logits, temperature);
  const std::size_t batch = zs.extent(0);
  const double t2_over_b = temperature * temperature / static_cast<double>(batch);

  Node n;
  n.op = Op::kSoftenedKl;
  n.inputs = {student_logits};
  n.needs_grad = nodes_[student_logits].needs_grad;
  double kl = 0.0;
  n.cached.resize(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double pt = std::exp(logp_t[i]);
    kl += pt * (logp_t[i] - logp_s[i]);
    // dL/dz_s = T * (p_s - p_t) / B
    n.cached[i] =
        temperature * (std::exp(logp_s[i]) - pt) / static_cast<double>(batch);
  }
  n.value = Tensor::scalar(t2_over_b * kl);
  return push(std::move(n));
}

NodeId Tape::weighted_sum(std::vector<NodeId> terms, std::vector<double> weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw StructuralError("weighted_sum: need matching non-empty terms/weights");
  }
  Node n;
  n.op = Op::kWeightedSum;
  n.needs_grad = false;
  double acc = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Tensor& tv = value(terms[i]);
    if (tv.size() != 1) {
      throw StructuralError("weighted_sum terms must be scalars");
    }
    acc += weights[i] * tv[0];
    n.needs_grad = n.needs_grad || nodes_[terms[i]].needs_grad;
  }
  n.inputs = std::move(terms);
  n.weights = std::move(weights);
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  check_id(loss);
  if (nodes_[loss].value.size() != 1) {
    throw StructuralError("backward requires a scalar loss, got " +
                          shape_to_string(nodes_[loss].value.shape()));
  }
  // Zero buffers for every grad-needing node at or before the loss; leaves off
  // the loss path therefore end with zero gradients.
  for (std::size_t i = 0; i <= loss; ++i) {
    if (nodes_[i].needs_grad) {
      nodes_[i].grad.assign(nodes_[i].value.size(), 0.0);
    } else {
      nodes_[i].grad.clear();
    }
  }
  if (!nodes_[loss].needs_grad) return;
  nodes_[loss].grad[0] = 1.0;

  for (std::size_t idx = loss + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.needs_grad || n.op == Op::kLeaf) continue;
    const std::vector<double>& gy = n.grad;
    switch (n.op) {
      case Op::kAffine: {
        Node& xn = nodes_[n.inputs[0]];
        Node& wn = nodes_[n.inputs[1]];
        Node& bn = nodes_[n.inputs[2]];
        const std::size_t batch = xn.value.extent(0);
        const std::size_t in = xn.value.extent(1);
        const std::size_t out = wn.value.extent(1);
        for (std::size_t r = 0; r < batch; ++r) {
          const double* gyr = gy.data() + r * out;
          const double* xr = xn.value.data() + r * in;
          if (xn.needs_grad) {
            double* gxr = xn.grad.data() + r * in;
            for (std::size_t i = 0; i < in; ++i) {
              const double* wrow = wn.value.data() + i * out;
              double acc = 0.0;
              for (std::size_t j = 0; j < out; ++j) acc += gyr[j] * wrow[j];
              gxr[i] += acc;
            }
          }
          if (wn.needs_grad) {
            for (std::size_t i = 0; i < in; ++i) {
              double* gwrow = wn.grad.data() + i * out;
              const double xi = xr[i];
              for (std::size_t j = 0; j < out; ++j) gwrow[j] += xi * gyr[j];
            }
          }
          if (bn.needs_grad) {
            for (std::size_t j = 0; j < out; ++j) bn.grad[j] += gyr[j];
          }
        }
        break;
      }
      case Op::kConv2d: {
        Node& xn = nodes_[n.inputs[0]];
        Node& wn = nodes_[n.inputs[1]];
        Node& bn = nodes_[n.inputs[2]];
        const std::size_t batch = xn.value.extent(0), cin = xn.value.extent(1);
        const std::size_t h = xn.value.extent(2), wd = xn.value.extent(3);
        const std::size_t cout = wn.value.extent(0);
        for (std::size_t bb = 0; bb < batch; ++bb) {
          for (std::size_t k = 0; k < cout; ++k) {
            const double* gyk = gy.data() + (bb * cout + k) * h * wd;
            if (bn.needs_grad) {
              double acc = 0.0;
              for (std::size_t p = 0; p < h * wd; ++p) acc += gyk[p];
              bn.grad[k] += acc;
            }
            for (std::size_t c = 0; c < cin; ++c) {
              const double* xc = xn.value.data() + (bb * cin + c) * h * wd;
              double* gxc = xn.needs_grad
                                ? xn.grad.data() + (bb * cin + c) * h * wd
                                : nullptr;
              const double* wkc = wn.value.data() + (k * cin + c) * 9;
              double* gwkc =
                  wn.needs_grad ? wn.grad.data() + (k * cin + c) * 9 : nullptr;
              for (std::size_t i = 0; i < h; ++i) {
                for (std::size_t j = 0; j < wd; ++j) {
                  const double g = gyk[i * wd + j];
                  if (g == 0.0) continue;
                  for (int di = -1; di <= 1; ++di) {
                    const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
                    if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (int dj = -1; dj <= 1; ++dj) {
                      const std::ptrdiff_t jj =
                          static_cast<std::ptrdiff_t>(j) + dj;
                      if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
                      const std::size_t xoff =
                          static_cast<std::size_t>(ii) * wd +
                          static_cast<std::size_t>(jj);
                      const std::size_t woff =
                          static_cast<std::size_t>(di + 1) * 3 +
                          static_cast<std::size_t>(dj + 1);
                      if (gwkc) gwkc[woff] += g * xc[xoff];
                      if (gxc) gxc[xoff] += g * wkc[woff];
                    }
                  }
                }
              }
            }
          }
        }
        break;
      }
      case Op::kRelu: {
        Node& xn = nodes_[n.inputs[0]];
        if (xn.needs_grad) {
          for (std::size_t i = 0; i < gy.size(); ++i) {
            if (xn.value[i] > 0.0) xn.grad[i] += gy[i];
          }
        }
        break;
      }
      case Op::kMaxPool: {
        Node& xn = nodes_[n.inputs[0]];
        if (xn.needs_grad) {
          for (std::size_t i = 0; i < gy.size(); ++i) {
            xn.grad[n.indices[i]] += gy[i];
          }
        }
        break;
      }
      case Op::kFlatten: {
        Node& xn = nodes_[n.inputs[0]];
        if (xn.needs_grad) {
          for (std::size_t i = 0; i < gy.size(); ++i) xn.grad[i] += gy[i];
        }
        break;
      }
      case Op::kCrossEntropy: {
        Node& zn = nodes_[n.inputs[0]];
        if (zn.needs_grad) {
          const std::size_t batch = zn.value.extent(0);
          const std::size_t classes = zn.value.extent(1);
          const double g = gy[0] / static_cast<double>(batch);
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t y = static_cast<std::size_t>(n.labels[b]);
            for (std::size_t k = 0; k < classes; ++k) {
              const double p = n.cached[b * classes + k];
              zn.grad[b * classes + k] += g * (p - (k == y ? 1.0 : 0.0));
            }
          }
        }
        break;
      }
      case Op::kSoftenedKl: {
        Node& zn = nodes_[n.inputs[0]];
        if (zn.needs_grad) {
          for (std::size_t i = 0; i < zn.value.size(); ++i) {
            zn.grad[i] += gy[0] * n.cached[i];
          }
        }
        break;
      }
      case Op::kWeightedSum: {
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          Node& tn = nodes_[n.inputs[i]];
          if (tn.needs_grad) tn.grad[0] += gy[0] * n.weights[i];
        }
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
  // Mirror leaf gradients into the tensor grad slots.
  for (std::size_t i = 0; i <= loss; ++i) {
    if (nodes_[i].op == Op::kLeaf && nodes_[i].value.requires_grad) {
      nodes_[i].value.grad = nodes_[i].grad;
    }
  }
}

}  // namespace dgkd
