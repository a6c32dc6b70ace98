#include <doctest.h>

#include <cmath>

#include "dgkd/autograd.hpp"
#include "dgkd/error.hpp"
#include "dgkd/losses.hpp"
#include "dgkd/model.hpp"
#include "dgkd/optimizer.hpp"
#include "test_util.hpp"

using namespace dgkd;
using dgkd::testing::close;

namespace {

// sum(x) realized as an affine with unit weights and zero bias.
NodeId sum_node(Tape& tape, NodeId x) {
  const std::size_t n = tape.value(x).extent(1);
  Tensor w({n, 1});
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0;
  return tape.affine(x, tape.leaf(w), tape.leaf(Tensor({1})));
}

}  // namespace

TEST_CASE("backward of a sum is all-ones") {
  Tape tape;
  Tensor x({1, 5}, {1.0, -2.0, 3.0, 0.5, 7.0});
  x.requires_grad = true;
  const NodeId xid = tape.leaf(x);
  const NodeId loss = sum_node(tape, xid);
  tape.backward(loss);
  for (double g : tape.grad(xid)) CHECK(g == 1.0);
}

TEST_CASE("off-path grad-requiring leaves get zero gradients") {
  Tape tape;
  Tensor x({1, 3}, {1.0, 2.0, 3.0});
  x.requires_grad = true;
  Tensor unused({1, 4}, {1.0, 1.0, 1.0, 1.0});
  unused.requires_grad = true;
  const NodeId uid = tape.leaf(unused);
  const NodeId xid = tape.leaf(x);
  tape.backward(sum_node(tape, xid));
  for (double g : tape.grad(uid)) CHECK(g == 0.0);
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Tensor x({2, 2}, {1.0, 2.0, 3.0, 4.0});
  x.requires_grad = true;
  const NodeId xid = tape.leaf(x);
  CHECK_THROWS_AS(tape.backward(tape.relu(xid)), StructuralError);
  CHECK_THROWS_AS(tape.grad(xid), StructuralError);
}

TEST_CASE("shape checks on primitives") {
  Tape tape;
  const NodeId x = tape.leaf(Tensor({2, 3}));
  const NodeId w = tape.leaf(Tensor({4, 5}));
  const NodeId b = tape.leaf(Tensor({5}));
  CHECK_THROWS_AS(tape.affine(x, w, b), StructuralError);
  CHECK_THROWS_AS(tape.max_pool2x2(x), StructuralError);
  const NodeId img = tape.leaf(Tensor({1, 1, 1, 3}));
  CHECK_THROWS_AS(tape.max_pool2x2(img), StructuralError);
  CHECK_THROWS_AS(tape.cross_entropy(x, {0, 1, 2}), StructuralError);
  CHECK_THROWS_AS(tape.cross_entropy(x, {0, 5}), ParameterError);
}

TEST_CASE("max-pool picks the first maximum and routes gradients to it") {
  Tape tape;
  Tensor x({1, 1, 2, 4}, {5.0, 5.0, 1.0, 2.0,
                          3.0, 4.0, 2.0, 1.0});
  x.requires_grad = true;
  const NodeId xid = tape.leaf(x);
  const NodeId pooled = tape.max_pool2x2(xid);
  CHECK(tape.value(pooled).shape() == std::vector<std::size_t>{1, 1, 1, 2});
  CHECK(tape.value(pooled)[0] == 5.0);
  CHECK(tape.value(pooled)[1] == 2.0);
  const NodeId flat = tape.flatten(pooled);
  tape.backward(sum_node(tape, flat));
  const std::vector<double>& g = tape.grad(xid);
  // The tied 5.0s resolve to the first scanned element.
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
  CHECK(g[3] == 1.0);
}

TEST_CASE("flatten is a reshape with pass-through gradients") {
  Tape tape;
  Tensor x({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  x.requires_grad = true;
  const NodeId xid = tape.leaf(x);
  const NodeId flat = tape.flatten(xid);
  CHECK(tape.value(flat).shape() == std::vector<std::size_t>{2, 4});
  tape.backward(sum_node(tape, flat));
  for (double g : tape.grad(xid)) CHECK(g == 1.0);
}

TEST_CASE("backward matches finite differences on random MLP instances") {
  Rng rng(101);
  int failures = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t batch = 1 + rng.uniform_index(4);
    const int classes = 2 + static_cast<int>(rng.uniform_index(5));
    ModelSpec spec;
    spec.family = ModelFamily::kMlp;
    spec.depth = 1 + static_cast<int>(rng.uniform_index(3));
    spec.hidden_width = 3 + static_cast<int>(rng.uniform_index(4));
    spec.num_classes = classes;
    spec.input_signature = {2 + rng.uniform_index(4)};
    ParameterSet params = build_model(spec, rng.next_u64());
    const Tensor batch_x =
        testing::random_tensor({batch, spec.input_signature[0]}, rng, 2.0);
    const std::vector<int> labels = testing::random_labels(batch, classes, rng);

    ForwardResult fr = forward(params, spec, batch_x);
    const NodeId loss = fr.tape.cross_entropy(fr.logits, labels);
    fr.tape.backward(loss);
    std::vector<std::vector<double>> got;
    for (NodeId id : fr.param_nodes) got.push_back(fr.tape.grad(id));

    const auto fd = finite_difference_gradient(
        [&](const ParameterSet& p) {
          return cross_entropy_loss(forward_logits(p, spec, batch_x), labels);
        },
        params);
    if (!testing::compare_grads(got, fd).ok) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("backward matches finite differences on random CNN instances") {
  Rng rng(202);
  int failures = 0;
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t batch = 1 + rng.uniform_index(2);
    const int classes = 2 + static_cast<int>(rng.uniform_index(3));
    ModelSpec spec;
    spec.family = ModelFamily::kPlainCnn;
    spec.depth = 2 + static_cast<int>(rng.uniform_index(2));  // 1-2 convs
    spec.channel_schedule.assign(spec.depth - 1, 2);
    spec.num_classes = classes;
    spec.input_signature = {1 + rng.uniform_index(2), 4, 4};
    ParameterSet params = build_model(spec, rng.next_u64());
    const Tensor batch_x = testing::random_tensor(
        {batch, spec.input_signature[0], 4, 4}, rng, 1.0);
    const std::vector<int> labels = testing::random_labels(batch, classes, rng);

    ForwardResult fr = forward(params, spec, batch_x);
    const NodeId loss = fr.tape.cross_entropy(fr.logits, labels);
    fr.tape.backward(loss);
    std::vector<std::vector<double>> got;
    for (NodeId id : fr.param_nodes) got.push_back(fr.tape.grad(id));

    const auto fd = finite_difference_gradient(
        [&](const ParameterSet& p) {
          return cross_entropy_loss(forward_logits(p, spec, batch_x), labels);
        },
        params);
    if (!testing::compare_grads(got, fd).ok) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("weighted_sum accumulates scalars with gradient fan-out") {
  Tape tape;
  Tensor x({1, 2}, {1.0, 2.0});
  x.requires_grad = true;
  const NodeId xid = tape.leaf(x);
  const NodeId s = sum_node(tape, xid);
  const NodeId total = tape.weighted_sum({s, s}, {2.0, 3.0});
  CHECK(tape.value(total)[0] == doctest::Approx(15.0));
  tape.backward(total);
  for (double g : tape.grad(xid)) CHECK(g == doctest::Approx(5.0));
  CHECK_THROWS_AS(tape.weighted_sum({}, {}), StructuralError);
  CHECK_THROWS_AS(tape.weighted_sum({xid}, {1.0}), StructuralError);
}
