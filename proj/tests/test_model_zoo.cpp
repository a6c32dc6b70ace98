#include <doctest.h>

#include <cmath>

#include "dgkd/error.hpp"
#include "dgkd/model.hpp"
#include "test_util.hpp"

using namespace dgkd;

namespace {

ModelSpec mlp_spec(int depth, int width = 32, int classes = 10,
                   std::size_t in = 2) {
  ModelSpec s;
  s.family = ModelFamily::kMlp;
  s.depth = depth;
  s.hidden_width = width;
  s.num_classes = classes;
  s.input_signature = {in};
  return s;
}

ModelSpec cnn_spec(int depth, int classes = 10,
                   std::vector<std::size_t> sig = {3, 32, 32}) {
  ModelSpec s;
  s.family = ModelFamily::kPlainCnn;
  s.depth = depth;
  s.num_classes = classes;
  s.input_signature = std::move(sig);
  return s;
}

bool identical(const ParameterSet& a, const ParameterSet& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].first != b.tensors[i].first) return false;
    if (a.tensors[i].second.values() != b.tensors[i].second.values()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("build_model is deterministic per (spec, seed)") {
  const ModelSpec spec = mlp_spec(3, 16);
  CHECK(identical(build_model(spec, 42), build_model(spec, 42)));
  CHECK_FALSE(identical(build_model(spec, 42), build_model(spec, 43)));
}

TEST_CASE("mlp depth=2 width=16 shapes") {
  const ParameterSet p = build_model(mlp_spec(2, 16, 10, 32), 1);
  REQUIRE(p.tensors.size() == 4);
  CHECK(p.tensors[0].first == "fc1.weight");
  CHECK(p.tensors[0].second.shape() == std::vector<std::size_t>{32, 16});
  CHECK(p.tensors[1].second.shape() == std::vector<std::size_t>{16});
  CHECK(p.tensors[2].first == "head.weight");
  CHECK(p.tensors[2].second.shape() == std::vector<std::size_t>{16, 10});
  CHECK(p.tensors[3].second.shape() == std::vector<std::size_t>{10});
  // Biases start at zero.
  for (double v : p.tensors[1].second.values()) CHECK(v == 0.0);
  for (double v : p.tensors[3].second.values()) CHECK(v == 0.0);
}

TEST_CASE("parameter_count exact values and consistency") {
  CHECK(parameter_count(mlp_spec(1, 32, 3, 4)) == 4 * 3 + 3);
  for (const ModelSpec& spec :
       {mlp_spec(4), cnn_spec(3, 10, {1, 8, 8}), cnn_spec(5, 4, {3, 16, 16})}) {
    const ParameterSet p = build_model(spec, 9);
    CHECK(parameter_count(spec) == p.scalar_count());
  }
}

TEST_CASE("plain_cnn counts grow with depth at fixed widths") {
  CHECK(parameter_count(cnn_spec(4)) > parameter_count(cnn_spec(2)));
  std::size_t prev = 0;
  for (int depth = 1; depth <= 10; ++depth) {
    const std::size_t count = parameter_count(cnn_spec(depth));
    CHECK(count > prev);
    prev = count;
  }
}

TEST_CASE("mlp counts grow with depth at fixed widths") {
  std::size_t prev = 0;
  for (int depth = 1; depth <= 10; ++depth) {
    const std::size_t count = parameter_count(mlp_spec(depth));
    CHECK(count > prev);
    prev = count;
  }
}

TEST_CASE("paper ladder depths give strictly decreasing counts") {
  for (bool cnn : {false, true}) {
    std::size_t prev = SIZE_MAX;
    for (int depth : {10, 8, 6, 4, 2}) {
      const std::size_t count =
          cnn ? parameter_count(cnn_spec(depth)) : parameter_count(mlp_spec(depth));
      CHECK(count < prev);
      prev = count;
    }
  }
}

TEST_CASE("capacity_order sorts descending and rejects ties") {
  const std::vector<ModelSpec> single = {mlp_spec(3)};
  CHECK(capacity_order(single)[0].depth == 3);

  const std::vector<ModelSpec> shuffled = {mlp_spec(2), mlp_spec(8), mlp_spec(4),
                                           mlp_spec(10), mlp_spec(6)};
  const std::vector<ModelSpec> ordered = capacity_order(shuffled);
  REQUIRE(ordered.size() == 5);
  CHECK(ordered[0].depth == 10);
  CHECK(ordered[1].depth == 8);
  CHECK(ordered[2].depth == 6);
  CHECK(ordered[3].depth == 4);
  CHECK(ordered[4].depth == 2);

  CHECK_THROWS_AS(capacity_order({mlp_spec(3), mlp_spec(3)}), LadderError);
  CHECK_THROWS_AS(capacity_order({}), LadderError);
}

TEST_CASE("forward-compat: every emitted spec forwards on its signature") {
  Rng rng(5);
  for (int depth : {1, 2, 3, 5, 10}) {
    const ModelSpec m = mlp_spec(depth, 8, 4, 3);
    const Tensor mx = testing::random_tensor({2, 3}, rng);
    const Tensor mlog = forward_logits(build_model(m, 7), m, mx);
    CHECK(mlog.shape() == std::vector<std::size_t>{2, 4});

    const ModelSpec c = cnn_spec(depth, 3, {1, 8, 8});
    const Tensor cx = testing::random_tensor({2, 1, 8, 8}, rng);
    const Tensor clog = forward_logits(build_model(c, 7), c, cx);
    CHECK(clog.shape() == std::vector<std::size_t>{2, 3});
  }
}

TEST_CASE("all-zero parameters give all-zero logits") {
  for (ModelSpec spec : {mlp_spec(3, 8, 4, 5), cnn_spec(3, 4, {1, 8, 8})}) {
    ParameterSet p = build_model(spec, 3);
    for (auto& [name, t] : p.tensors) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
    }
    const Tensor batch =
        spec.family == ModelFamily::kMlp
            ? Tensor({2, 5}, {1, 2, 3, 4, 5, -1, -2, -3, -4, -5})
            : Tensor({1, 1, 8, 8});
    for (double v : forward_logits(p, spec, batch).values()) CHECK(v == 0.0);
  }
}

TEST_CASE("identity-configured single affine layer returns its input") {
  ModelSpec spec = mlp_spec(1, 32, 4, 4);
  ParameterSet p = build_model(spec, 3);
  Tensor* w = p.find("head.weight");
  REQUIRE(w != nullptr);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) (*w)[i * 4 + j] = i == j ? 1.0 : 0.0;
  }
  const Tensor x({2, 4}, {1, 2, 3, 4, -4, 0.25, 7, 0});
  const Tensor logits = forward_logits(p, spec, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(logits[i] == x[i]);
}

TEST_CASE("2-layer MLP forward matches a hand-rolled matrix multiply") {
  const ModelSpec spec = mlp_spec(2, 4, 3, 3);
  const ParameterSet p = build_model(spec, 77);
  Rng rng(9);
  const Tensor x = testing::random_tensor({5, 3}, rng);
  const Tensor logits = forward_logits(p, spec, x);

  // Straight-line reimplementation, no shared code with the tape.
  const Tensor& w1 = p.tensors[0].second;
  const Tensor& b1 = p.tensors[1].second;
  const Tensor& w2 = p.tensors[2].second;
  const Tensor& b2 = p.tensors[3].second;
  for (std::size_t r = 0; r < 5; ++r) {
    double hidden[4];
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = b1[j];
      for (std::size_t i = 0; i < 3; ++i) acc += x[r * 3 + i] * w1[i * 4 + j];
      hidden[j] = acc > 0.0 ? acc : 0.0;
    }
    for (std::size_t k = 0; k < 3; ++k) {
      double acc = b2[k];
      for (std::size_t j = 0; j < 4; ++j) acc += hidden[j] * w2[j * 3 + k];
      CHECK(logits[r * 3 + k] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("spec validation and descriptor round trip") {
  CHECK_THROWS_AS(mlp_spec(0).validate(), StructuralError);
  ModelSpec bad = mlp_spec(2);
  bad.num_classes = 1;
  CHECK_THROWS_AS(bad.validate(), StructuralError);
  ModelSpec cnn_bad = cnn_spec(3);
  cnn_bad.input_signature = {32, 32};
  CHECK_THROWS_AS(cnn_bad.validate(), StructuralError);

  for (const ModelSpec& spec : {mlp_spec(4, 16, 7, 9), cnn_spec(5)}) {
    const ModelSpec back = ModelSpec::from_descriptor(spec.descriptor());
    CHECK(parameter_count(back) == parameter_count(spec));
    CHECK(back.depth == spec.depth);
    CHECK(back.num_classes == spec.num_classes);
    CHECK(back.input_signature == spec.input_signature);
  }
  CHECK_THROWS_AS(ModelSpec::from_descriptor("not json"), CheckpointError);
}

TEST_CASE("default channel schedule doubles from 16 capped at 64") {
  CHECK(default_channel_schedule(10) ==
        std::vector<int>{16, 16, 32, 32, 64, 64, 64, 64, 64});
  CHECK(default_channel_schedule(1).empty());
}

TEST_CASE("batch/signature mismatches are structural errors") {
  const ModelSpec spec = cnn_spec(2, 3, {3, 8, 8});
  const ParameterSet p = build_model(spec, 1);
  CHECK_THROWS_AS(forward_logits(p, spec, Tensor({2, 1, 8, 8})), StructuralError);
  const ModelSpec mspec = mlp_spec(2, 8, 3, 4);
  const ParameterSet mp = build_model(mspec, 1);
  CHECK_THROWS_AS(forward_logits(mp, mspec, Tensor({2, 3})), StructuralError);
}
