#include "dgkd/optimizer.hpp"

#include <cmath>
#include <string>

#include "dgkd/error.hpp"

namespace dgkd {

OptimizerState OptimizerState::create(const ParameterSet& params, SgdOptions opts) {
  OptimizerState state;
  state.options = opts;
  state.velocity.reserve(params.tensors.size());
  for (const auto& [name, t] : params.tensors) {
    state.velocity.emplace_back(t.size(), 0.0);
  }
  return state;
}

void sgd_momentum_step(ParameterSet& params,
                       const std::vector<std::vector<double>>& grads,
                       OptimizerState& state) {
  if (grads.size() != params.tensors.size() ||
      state.velocity.size() != params.tensors.size()) {
    throw StructuralError("optimizer step: parameter/gradient/velocity counts differ");
  }
  const SgdOptions& o = state.options;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    Tensor& p = params.tensors[t].second;
    const std::vector<double>& g = grads[t];
    std::vector<double>& v = state.velocity[t];
    if (g.size() != p.size() || v.size() != p.size()) {
      throw StructuralError("optimizer step: shape mismatch at parameter '" +
                            params.tensors[t].first + "'");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = g[i] + o.weight_decay * p[i];
      v[i] = o.momentum * v[i] + d;
      p[i] -= o.lr * (d + o.momentum * v[i]);
    }
  }
}

std::vector<std::vector<double>> finite_difference_gradient(
    const std::function<double(const ParameterSet&)>& f, ParameterSet params,
    double eps) {
  if (!(eps > 0.0)) throw ParameterError("finite-difference eps must be positive");
  std::vector<std::vector<double>> grads;
  grads.reserve(params.tensors.size());
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    Tensor& p = params.tensors[t].second;
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + eps;
      const double up = f(params);
      p[i] = orig - eps;
      const double down = f(params);
      p[i] = orig;
      g[i] = (up - down) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace dgkd
