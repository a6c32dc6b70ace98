#include <doctest.h>

#include <cmath>

#include "dgkd/error.hpp"
#include "dgkd/losses.hpp"
#include "dgkd/model.hpp"
#include "test_util.hpp"

using namespace dgkd;
using dgkd::testing::close;

namespace {

// Direct-definition oracle: T^2 * mean_b sum_k p_T ln(p_T / p_S), computed
// from naive softmax, sharing no code with the tape implementation.
double kl_oracle(const Tensor& student, const Tensor& trainer, double temp) {
  const std::size_t batch = student.extent(0), classes = student.extent(1);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double zs = 0.0, zt = 0.0;
    std::vector<double> ps(classes), pt(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      ps[k] = std::exp(student[b * classes + k] / temp);
      pt[k] = std::exp(trainer[b * classes + k] / temp);
      zs += ps[k];
      zt += pt[k];
    }
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = pt[k] / zt;
      const double q = ps[k] / zs;
      if (p > 0.0) total += p * std::log(p / q);
    }
  }
  return temp * temp * total / static_cast<double>(batch);
}

DistillConfig config(double lambda, double temp, int sources) {
  DistillConfig cfg;
  cfg.lambda = lambda;
  cfg.temperature = temp;
  cfg.n_sources = sources;
  return cfg;
}

}  // namespace

TEST_CASE("cross entropy: uniform logits give ln K") {
  for (std::size_t k : {2u, 5u, 10u}) {
    const Tensor z({1, k}, std::vector<double>(k, 0.7));
    CHECK(close(cross_entropy_loss(z, {0}), std::log(static_cast<double>(k)), 1e-12));
  }
}

TEST_CASE("cross entropy: direct formula values") {
  CHECK(close(cross_entropy_loss(Tensor({1, 2}, {10.0, -10.0}), {0}),
              std::log(1.0 + std::exp(-20.0)), 1e-6, 1e-15));
  CHECK(close(cross_entropy_loss(Tensor({1, 2}, {0.0, std::log(3.0)}), {0}),
              std::log(4.0), 1e-12));
  // Batch mean.
  const Tensor z({2, 2}, {0.0, std::log(3.0), std::log(3.0), 0.0});
  CHECK(close(cross_entropy_loss(z, {0, 1}), std::log(4.0), 1e-12));
}

TEST_CASE("distillation loss: zero iff softened outputs match") {
  Rng rng(3);
  const Tensor z = testing::random_tensor({3, 6}, rng, 5.0);
  for (double temp : {1.0, 2.0, 20.0}) {
    CHECK(distillation_loss(z, z, temp) == 0.0);
  }
  Tensor other = z;
  other[0] += 0.5;
  CHECK(distillation_loss(other, z, 4.0) > 0.0);
}

TEST_CASE("distillation loss: hand KL value at T=1") {
  // p_T = [0.5, 0.5], p_S = [0.25, 0.75] -> KL = 0.5 ln(4/3)
  const Tensor trainer({1, 2}, {0.0, 0.0});
  const Tensor student({1, 2}, {0.0, std::log(3.0)});
  CHECK(close(distillation_loss(student, trainer, 1.0), 0.5 * std::log(4.0 / 3.0),
              1e-12));
}

TEST_CASE("distillation loss: equals T^2 times softened KL") {
  Rng rng(17);
  const Tensor a = testing::random_tensor({2, 5}, rng, 4.0);
  const Tensor b = testing::random_tensor({2, 5}, rng, 4.0);
  const double temp = 2.0;
  CHECK(close(distillation_loss(a, b, temp), kl_oracle(a, b, temp), 1e-12));
}

TEST_CASE("distillation loss matches the direct-definition oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t batch = 1 + rng.uniform_index(5);
    const std::size_t classes = 2 + rng.uniform_index(9);
    const Tensor s = testing::random_tensor({batch, classes}, rng, 8.0);
    const Tensor t = testing::random_tensor({batch, classes}, rng, 8.0);
    for (double temp : {1.0, 2.0, 4.0, 10.0, 20.0}) {
      const double got = distillation_loss(s, t, temp);
      CHECK(std::abs(got - kl_oracle(s, t, temp)) <= 1e-10);
      CHECK(got >= 0.0);
    }
  }
}

TEST_CASE("kd total loss reduces exactly at the lambda endpoints") {
  Rng rng(31);
  const Tensor s = testing::random_tensor({4, 6}, rng, 3.0);
  const Tensor t = testing::random_tensor({4, 6}, rng, 3.0);
  const std::vector<int> labels = {0, 3, 5, 2};
  CHECK(kd_total_loss(s, t, labels, config(0.0, 4.0, 1)) ==
        cross_entropy_loss(s, labels));
  CHECK(kd_total_loss(s, t, labels, config(1.0, 4.0, 1)) ==
        distillation_loss(s, t, 4.0));
  const double mid = kd_total_loss(s, t, labels, config(0.5, 4.0, 1));
  CHECK(close(mid,
              0.5 * (cross_entropy_loss(s, labels) + distillation_loss(s, t, 4.0)),
              1e-14));
}

TEST_CASE("dgkd with one source equals conventional KD exactly") {
  Rng rng(37);
  const Tensor s = testing::random_tensor({3, 4}, rng, 3.0);
  const Tensor t = testing::random_tensor({3, 4}, rng, 3.0);
  const std::vector<int> labels = {1, 0, 3};
  const DistillConfig cfg = config(0.35, 4.0, 1);
  CHECK(dgkd_total_loss(s, {t}, labels, cfg, GateMask::all_on(1)) ==
        kd_total_loss(s, t, labels, cfg));
}

TEST_CASE("dgkd with trainers equal to the student collapses to weighted CE") {
  Rng rng(41);
  const Tensor s = testing::random_tensor({2, 5}, rng, 3.0);
  const std::vector<int> labels = {4, 2};
  const DistillConfig cfg = config(0.5, 4.0, 3);
  const double got = dgkd_total_loss(s, {s, s, s}, labels, cfg, GateMask::all_on(3));
  // KD terms vanish, leaving n*(1-lambda)*CE with n = 3 sources.
  CHECK(close(got, 3.0 * 0.5 * cross_entropy_loss(s, labels), 1e-14));
}

TEST_CASE("dgkd gated sum matches the term-by-term oracle") {
  Rng rng(43);
  const Tensor s = testing::random_tensor({4, 7}, rng, 4.0);
  const std::vector<Tensor> trainers = {testing::random_tensor({4, 7}, rng, 4.0),
                                        testing::random_tensor({4, 7}, rng, 4.0),
                                        testing::random_tensor({4, 7}, rng, 4.0)};
  const std::vector<int> labels = {0, 6, 3, 1};
  const double lambda = 0.4, temp = 4.0;
  GateMask gates;
  gates.bits = {1, 0, 1};
  const double got =
      dgkd_total_loss(s, trainers, labels, config(lambda, temp, 3), gates);
  const double want = 3.0 * (1.0 - lambda) * cross_entropy_loss(s, labels) +
                      lambda * (distillation_loss(s, trainers[0], temp) +
                                distillation_loss(s, trainers[2], temp));
  CHECK(close(got, want, 1e-12));
}

TEST_CASE("per-source lambdas take the expanded per-source form") {
  Rng rng(47);
  const Tensor s = testing::random_tensor({2, 4}, rng, 3.0);
  const std::vector<Tensor> trainers = {testing::random_tensor({2, 4}, rng, 3.0),
                                        testing::random_tensor({2, 4}, rng, 3.0)};
  const std::vector<int> labels = {2, 0};
  DistillConfig cfg = config(0.0, 2.0, 2);
  cfg.per_source_lambda = {0.25, 0.75};
  const double got = dgkd_total_loss(s, trainers, labels, cfg, GateMask::all_on(2));
  const double want = (0.75 + 0.25) * cross_entropy_loss(s, labels) +
                      0.25 * distillation_loss(s, trainers[0], 2.0) +
                      0.75 * distillation_loss(s, trainers[1], 2.0);
  CHECK(close(got, want, 1e-12));
}

TEST_CASE("normalize_by_sources divides the literal form by n") {
  Rng rng(53);
  const Tensor s = testing::random_tensor({2, 4}, rng, 3.0);
  const std::vector<Tensor> trainers = {testing::random_tensor({2, 4}, rng, 3.0),
                                        testing::random_tensor({2, 4}, rng, 3.0)};
  const std::vector<int> labels = {1, 3};
  DistillConfig cfg = config(0.5, 4.0, 2);
  const double literal = dgkd_total_loss(s, trainers, labels, cfg, GateMask::all_on(2));
  cfg.normalize_by_sources = true;
  const double normalized =
      dgkd_total_loss(s, trainers, labels, cfg, GateMask::all_on(2));
  CHECK(close(normalized, literal / 2.0, 1e-14));
}

TEST_CASE("gate linearity bookkeeping: a + b - (a and b) = (a or b)") {
  Rng rng(59);
  const Tensor s = testing::random_tensor({3, 5}, rng, 3.0);
  std::vector<Tensor> trainers;
  for (int i = 0; i < 4; ++i) trainers.push_back(testing::random_tensor({3, 5}, rng, 3.0));
  const std::vector<int> labels = {0, 2, 4};
  const DistillConfig cfg = config(0.6, 4.0, 4);
  GateMask a, b, both, either;
  a.bits = {1, 1, 0, 1};
  b.bits = {1, 0, 1, 1};
  both.bits = {1, 0, 0, 1};
  either.bits = {1, 1, 1, 1};
  const double la = dgkd_total_loss(s, trainers, labels, cfg, a);
  const double lb = dgkd_total_loss(s, trainers, labels, cfg, b);
  const double lboth = dgkd_total_loss(s, trainers, labels, cfg, both);
  const double leither = dgkd_total_loss(s, trainers, labels, cfg, either);
  CHECK(close(la + lb - lboth, leither, 1e-12));
}

TEST_CASE("loss gradients match finite differences over student logits") {
  Rng rng(61);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t batch = 1 + rng.uniform_index(4);
    const std::size_t classes = 2 + rng.uniform_index(6);
    const Tensor s = testing::random_tensor({batch, classes}, rng, 4.0);
    const std::vector<Tensor> trainers = {
        testing::random_tensor({batch, classes}, rng, 4.0),
        testing::random_tensor({batch, classes}, rng, 4.0)};
    const std::vector<int> labels =
        testing::random_labels(batch, static_cast<int>(classes), rng);
    DistillConfig cfg = config(0.5, 4.0, 2);
    GateMask gates;
    gates.bits = {1, trial % 2};

    const auto eval = [&](const Tensor& z) {
      return dgkd_total_loss(z, trainers, labels, cfg, gates);
    };
    Tape tape;
    Tensor leaf_s = s;
    leaf_s.requires_grad = true;
    const NodeId sid = tape.leaf(leaf_s);
    const NodeId loss = dgkd_total_node(tape, sid, trainers, labels, cfg, gates);
    tape.backward(loss);
    const std::vector<double> fd = testing::fd_logits(eval, s);
    CHECK(testing::compare_grads({tape.grad(sid)}, {fd}).ok);
  }
}

TEST_CASE("no gradient reaches the trainer logits") {
  Rng rng(67);
  const Tensor s = testing::random_tensor({2, 4}, rng, 2.0);
  Tensor trainer = testing::random_tensor({2, 4}, rng, 2.0);
  trainer.requires_grad = true;  // the loss must still treat it as a constant

  Tape tape;
  Tensor leaf_s = s;
  leaf_s.requires_grad = true;
  const NodeId sid = tape.leaf(leaf_s);
  const NodeId loss = distillation_node(tape, sid, trainer, 4.0);
  tape.backward(loss);
  CHECK(tape.grad(sid).size() == s.size());
  CHECK_FALSE(trainer.grad.has_value());

  // Perturbing the trainer changes the loss value even so.
  Tensor nudged = trainer;
  nudged[0] += 0.75;
  CHECK(distillation_loss(s, trainer, 4.0) != distillation_loss(s, nudged, 4.0));
}

TEST_CASE("losses are invariant to per-row logit shifts") {
  Rng rng(71);
  const std::size_t batch = 3, classes = 5;
  const Tensor s = testing::random_tensor({batch, classes}, rng, 4.0);
  const Tensor t = testing::random_tensor({batch, classes}, rng, 4.0);
  const std::vector<int> labels = {1, 4, 0};
  Tensor s2 = s, t2 = t;
  for (std::size_t b = 0; b < batch; ++b) {
    const double cs = rng.uniform(-20.0, 20.0);
    const double ct = rng.uniform(-20.0, 20.0);
    for (std::size_t k = 0; k < classes; ++k) {
      s2[b * classes + k] += cs;
      t2[b * classes + k] += ct;
    }
  }
  CHECK(std::abs(cross_entropy_loss(s, labels) - cross_entropy_loss(s2, labels)) <=
        1e-10);
  CHECK(std::abs(distillation_loss(s, t, 4.0) - distillation_loss(s2, t2, 4.0)) <=
        1e-10);
  const DistillConfig cfg = config(0.5, 4.0, 1);
  CHECK(std::abs(kd_total_loss(s, t, labels, cfg) -
                 kd_total_loss(s2, t2, labels, cfg)) <= 1e-10);
}

TEST_CASE("loss input validation") {
  const Tensor s({2, 3}, {0, 1, 2, 3, 4, 5});
  const Tensor t({2, 2}, {0, 1, 2, 3});
  CHECK_THROWS_AS(distillation_loss(s, t, 4.0), StructuralError);
  CHECK_THROWS_AS(distillation_loss(s, s, 0.0), ParameterError);
  CHECK_THROWS_AS(cross_entropy_loss(s, {0, 3}), ParameterError);
  CHECK_THROWS_AS(cross_entropy_loss(s, {0}), StructuralError);

  DistillConfig multi = config(0.5, 4.0, 2);
  CHECK_THROWS_AS(kd_total_loss(s, s, {0, 1}, multi), ParameterError);
  DistillConfig bad_lambda = config(1.5, 4.0, 1);
  CHECK_THROWS_AS(kd_total_loss(s, s, {0, 1}, bad_lambda), ParameterError);

  GateMask zeros;
  zeros.bits = {0, 0};
  CHECK_THROWS_AS(dgkd_total_loss(s, {s, s}, {0, 1}, multi, zeros), ParameterError);
  GateMask short_mask;
  short_mask.bits = {1};
  CHECK_THROWS_AS(dgkd_total_loss(s, {s, s}, {0, 1}, multi, short_mask),
                  StructuralError);
}

TEST_CASE("sample_gates boundaries") {
  Rng rng(73);
  const GateMask none = sample_gates(5, 0, rng);
  CHECK(none.bits == std::vector<int>{1, 1, 1, 1, 1});
  CHECK(none.drop_trials() == 0);
  for (int trial = 0; trial < 50; ++trial) {
    const GateMask one = sample_gates(4, 3, rng);
    CHECK(one.active_count() == 1);
    CHECK(one.drop_trials() == 3);
  }
  CHECK_THROWS_AS(sample_gates(4, 4, rng), ParameterError);
  CHECK_THROWS_AS(sample_gates(4, -1, rng), ParameterError);
  CHECK_THROWS_AS(sample_gates(0, 0, rng), ParameterError);
}

TEST_CASE("sample_gates drops uniformly") {
  Rng rng(79);
  const int n = 4, draws = 10000;
  std::vector<int> dropped(n, 0);
  for (int i = 0; i < draws; ++i) {
    const GateMask m = sample_gates(n, 1, rng);
    CHECK(m.drop_trials() == 1);
    for (int s = 0; s < n; ++s) {
      if (m.bits[static_cast<std::size_t>(s)] == 0) ++dropped[static_cast<std::size_t>(s)];
    }
  }
  for (int s = 0; s < n; ++s) {
    const double freq = static_cast<double>(dropped[static_cast<std::size_t>(s)]) / draws;
    CHECK(freq > 0.23);
    CHECK(freq < 0.27);
  }
}

TEST_CASE("sample_gates with t=0 leaves the rng untouched") {
  Rng a(91), b(91);
  (void)sample_gates(4, 0, a);
  CHECK(a.state() == b.state());
}

TEST_CASE("expected gated loss scales KD terms by 1 - t/n") {
  Rng rng(83);
  const Tensor s = testing::random_tensor({2, 5}, rng, 3.0);
  std::vector<Tensor> trainers;
  for (int i = 0; i < 4; ++i) trainers.push_back(testing::random_tensor({2, 5}, rng, 3.0));
  const std::vector<int> labels = {3, 1};
  const DistillConfig cfg = config(0.5, 4.0, 4);
  const int t = 1, draws = 20000;

  double kd_sum = 0.0;
  for (const Tensor& tr : trainers) kd_sum += distillation_loss(s, tr, 4.0);
  const double expected = 4.0 * 0.5 * cross_entropy_loss(s, labels) +
                          0.5 * (1.0 - static_cast<double>(t) / 4.0) * kd_sum;

  Rng gate_rng(997);
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    acc += dgkd_total_loss(s, trainers, labels, cfg,
                           sample_gates(4, t, gate_rng));
  }
  acc /= draws;
  CHECK(close(acc, expected, 0.01));
}
