#include <doctest.h>

#include <cmath>
#include <limits>

#include "dgkd/error.hpp"
#include "dgkd/tensor.hpp"
#include "test_util.hpp"

using namespace dgkd;
using dgkd::testing::close;

TEST_CASE("tensor shape/data invariant") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), StructuralError);
  CHECK_THROWS_AS(Tensor({0, 3}), StructuralError);
}

TEST_CASE("softmax: constant rows are uniform") {
  for (double c : {-7.5, 0.0, 3.0}) {
    for (double temp : {0.5, 1.0, 20.0}) {
      const Tensor p = softmax_with_temperature(Tensor({1, 3}, {c, c, c}), temp);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(p[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("softmax: direct formula values") {
  const Tensor a = softmax_with_temperature(Tensor({1, 2}, {std::log(4.0), 0.0}), 1.0);
  CHECK(close(a[0], 0.8, 1e-12));
  CHECK(close(a[1], 0.2, 1e-12));

  // 20/20 = 1, so this is softmax([1,0]).
  const Tensor b = softmax_with_temperature(Tensor({1, 2}, {20.0, 0.0}), 20.0);
  const double e = std::exp(1.0);
  CHECK(close(b[0], e / (e + 1.0), 1e-9));
  CHECK(close(b[1], 1.0 / (e + 1.0), 1e-9));
  CHECK(b[0] == doctest::Approx(0.73106).epsilon(1e-4));
}

TEST_CASE("softmax: rows sum to one and shift invariance") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t batch = 1 + rng.uniform_index(6);
    const std::size_t classes = 2 + rng.uniform_index(9);
    const double temp = rng.uniform(0.2, 20.0);
    Tensor z = testing::random_tensor({batch, classes}, rng, 30.0);
    const Tensor p = softmax_with_temperature(z, temp);
    for (std::size_t b = 0; b < batch; ++b) {
      double sum = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        sum += p[b * classes + k];
        CHECK(p[b * classes + k] >= 0.0);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    // Adding a per-row constant leaves the row unchanged.
    Tensor shifted = z;
    for (std::size_t b = 0; b < batch; ++b) {
      const double c = rng.uniform(-50.0, 50.0);
      for (std::size_t k = 0; k < classes; ++k) shifted[b * classes + k] += c;
    }
    const Tensor q = softmax_with_temperature(shifted, temp);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(p[i] - q[i]) <= 1e-12);
    }
  }
}

TEST_CASE("softmax: higher temperature never sharpens a non-constant row") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = 2 + rng.uniform_index(8);
    Tensor z = testing::random_tensor({1, classes}, rng, 10.0);
    z[0] += 1.0;  // guarantee non-constant
    const double t1 = rng.uniform(0.2, 5.0);
    const double t2 = t1 + rng.uniform(0.1, 10.0);
    const Tensor p1 = softmax_with_temperature(z, t1);
    const Tensor p2 = softmax_with_temperature(z, t2);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      m1 = std::max(m1, p1[k]);
      m2 = std::max(m2, p2[k]);
    }
    CHECK(m2 <= m1 + 1e-12);
  }
}

TEST_CASE("softmax: large logits at low temperature stay finite") {
  const Tensor p =
      softmax_with_temperature(Tensor({1, 3}, {1000.0, 900.0, -1000.0}), 1.0);
  CHECK(p.all_finite());
  CHECK(close(p[0], 1.0, 1e-12));
}

TEST_CASE("softmax: parameter and numeric errors") {
  const Tensor z({1, 2}, {0.0, 1.0});
  CHECK_THROWS_AS(softmax_with_temperature(z, 0.0), ParameterError);
  CHECK_THROWS_AS(softmax_with_temperature(z, -2.0), ParameterError);
  const Tensor bad({1, 2}, {std::numeric_limits<double>::quiet_NaN(), 0.0});
  CHECK_THROWS_AS(softmax_with_temperature(bad, 1.0), NumericError);
  CHECK_THROWS_AS(softmax_with_temperature(Tensor({2}, {0.0, 1.0}), 1.0),
                  StructuralError);
}
