#pragma once

#include <functional>
#include <vector>

#include "dgkd/model.hpp"

namespace dgkd {

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// Velocity buffers for SGD with Nesterov momentum, one per parameter tensor.
struct OptimizerState {
  SgdOptions options;
  std::vector<std::vector<double>> velocity;

  static OptimizerState create(const ParameterSet& params, SgdOptions opts);
};

/// One Nesterov-momentum update, weight decay added to the gradient first:
///   d = g + wd*p;  v = mu*v + d;  p -= lr*(d + mu*v)
/// Velocities start at zero, which makes the first step the plain d update.
void sgd_momentum_step(ParameterSet& params,
                       const std::vector<std::vector<double>>& grads,
                       OptimizerState& state);

/// Central-difference gradient of a scalar function of the parameters:
///   (f(p + eps*e_i) - f(p - eps*e_i)) / (2*eps)
/// Used as the independent oracle for backward().
std::vector<std::vector<double>> finite_difference_gradient(
    const std::function<double(const ParameterSet&)>& f, ParameterSet params,
    double eps = 1e-5);

}  // namespace dgkd
