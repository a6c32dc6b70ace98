#include <doctest.h>

#include <cmath>

#include "dgkd/error.hpp"
#include "dgkd/model.hpp"
#include "dgkd/optimizer.hpp"
#include "test_util.hpp"

using namespace dgkd;
using dgkd::testing::close;

namespace {

ParameterSet scalar_params(double value) {
  ParameterSet p;
  Tensor t({1}, {value});
  t.requires_grad = true;
  p.tensors.emplace_back("w", std::move(t));
  return p;
}

}  // namespace

TEST_CASE("zero momentum and decay reduces to plain SGD") {
  ParameterSet p = scalar_params(2.0);
  OptimizerState state = OptimizerState::create(p, {0.5, 0.0, 0.0});
  sgd_momentum_step(p, {{0.25}}, state);
  CHECK(p.tensors[0].second[0] == 2.0 - 0.5 * 0.25);
}

TEST_CASE("zero gradient with zero velocity and decay is a fixed point") {
  ParameterSet p = scalar_params(-1.5);
  OptimizerState state = OptimizerState::create(p, {0.5, 0.9, 0.0});
  sgd_momentum_step(p, {{0.0}}, state);
  CHECK(p.tensors[0].second[0] == -1.5);
}

TEST_CASE("lr=0 is the identity on parameters") {
  ParameterSet p = scalar_params(3.25);
  OptimizerState state = OptimizerState::create(p, {0.0, 0.9, 1e-4});
  sgd_momentum_step(p, {{1.7}}, state);
  sgd_momentum_step(p, {{-0.3}}, state);
  CHECK(p.tensors[0].second[0] == 3.25);
}

TEST_CASE("two steps match the hand-unrolled recurrence") {
  const double lr = 0.1, mu = 0.9, wd = 0.01;
  const double g1 = 0.5, g2 = -0.25;
  ParameterSet p = scalar_params(1.0);
  OptimizerState state = OptimizerState::create(p, {lr, mu, wd});

  // Hand-unrolled: d = g + wd*p; v = mu*v + d; p -= lr*(d + mu*v).
  double w = 1.0, v = 0.0;
  {
    const double d = g1 + wd * w;
    v = mu * v + d;
    w -= lr * (d + mu * v);
  }
  sgd_momentum_step(p, {{g1}}, state);
  CHECK(close(p.tensors[0].second[0], w, 1e-15));
  {
    const double d = g2 + wd * w;
    v = mu * v + d;
    w -= lr * (d + mu * v);
  }
  sgd_momentum_step(p, {{g2}}, state);
  CHECK(close(p.tensors[0].second[0], w, 1e-15));
}

TEST_CASE("nesterov lookahead differs from classical momentum") {
  // Second step: classical would give p - lr*(v2), nesterov p - lr*(d2 + mu*v2).
  const double lr = 0.1, mu = 0.9;
  ParameterSet p = scalar_params(0.0);
  OptimizerState state = OptimizerState::create(p, {lr, mu, 0.0});
  sgd_momentum_step(p, {{1.0}}, state);  // v=1, update d + mu*v = 1.9
  CHECK(close(p.tensors[0].second[0], -lr * 1.9, 1e-15));
}

TEST_CASE("optimizer shape mismatches are structural errors") {
  ParameterSet p = scalar_params(1.0);
  OptimizerState state = OptimizerState::create(p, {0.1, 0.9, 0.0});
  CHECK_THROWS_AS(sgd_momentum_step(p, {}, state), StructuralError);
  CHECK_THROWS_AS(sgd_momentum_step(p, {{1.0, 2.0}}, state), StructuralError);
}

TEST_CASE("finite differences are exact on quadratics") {
  ModelSpec spec;
  spec.family = ModelFamily::kMlp;
  spec.depth = 1;
  spec.num_classes = 3;
  spec.input_signature = {2};
  ParameterSet params = build_model(spec, 5);
  const auto quadratic = [](const ParameterSet& p) {
    double acc = 0.0;
    for (const auto& [name, t] : p.tensors) {
      for (std::size_t i = 0; i < t.size(); ++i) acc += 0.5 * t[i] * t[i];
    }
    return acc;
  };
  const auto grads = finite_difference_gradient(quadratic, params, 1e-4);
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    for (std::size_t i = 0; i < grads[t].size(); ++i) {
      CHECK(close(grads[t][i], params.tensors[t].second[i], 1e-9, 1e-11));
    }
  }
}

TEST_CASE("finite differences match the analytic gradient of a sine sum") {
  ModelSpec spec;
  spec.family = ModelFamily::kMlp;
  spec.depth = 1;
  spec.num_classes = 2;
  spec.input_signature = {3};
  ParameterSet params = build_model(spec, 11);
  const auto sines = [](const ParameterSet& p) {
    double acc = 0.0;
    for (const auto& [name, t] : p.tensors) {
      for (std::size_t i = 0; i < t.size(); ++i) acc += std::sin(t[i]);
    }
    return acc;
  };
  const auto grads = finite_difference_gradient(sines, params);
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    for (std::size_t i = 0; i < grads[t].size(); ++i) {
      CHECK(std::abs(grads[t][i] - std::cos(params.tensors[t].second[i])) <= 1e-8);
    }
  }
}

TEST_CASE("finite differences reject non-positive eps") {
  ParameterSet p = scalar_params(1.0);
  CHECK_THROWS_AS(
      finite_difference_gradient([](const ParameterSet&) { return 0.0; }, p, 0.0),
      ParameterError);
}
