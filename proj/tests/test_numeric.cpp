#include "fmsolve/numeric.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <doctest.h>

using namespace fmsolve;

namespace {

Matrix2 random_matrix(Rng& rng) {
  return {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
}

}  // namespace

TEST_CASE("gaussian_sample moments") {
  Rng rng(42);
  const PointBatch g = gaussian_sample(rng, 100000, 2);
  for (int j = 0; j < 2; ++j) {
    const double mean = g.col(j).mean();
    const double var = (g.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
  }
}

TEST_CASE("gaussian_sample is deterministic and byte-identical") {
  Rng a(7);
  Rng b(7);
  const PointBatch x = gaussian_sample(a, 1, 3);
  const PointBatch y = gaussian_sample(b, 1, 3);
  REQUIRE(x.size() == 3);
  CHECK(std::memcmp(x.data(), y.data(), sizeof(double) * 3) == 0);

  Rng c(123);
  Rng d(123);
  const PointBatch big1 = gaussian_sample(c, 500, 7);
  const PointBatch big2 = gaussian_sample(d, 500, 7);
  CHECK(std::memcmp(big1.data(), big2.data(), sizeof(double) * big1.size()) == 0);
}

TEST_CASE("substreams differ") {
  Rng s0(7, 0);
  Rng s1(7, 1);
  int same = 0;
  for (int i = 0; i < 16; ++i) {
    same += s0.next_u64() == s1.next_u64() ? 1 : 0;
  }
  CHECK(same == 0);

  const Rng parent(7);
  Rng f0 = parent.fork(0);
  Rng f1 = parent.fork(1);
  Rng f0_again = parent.fork(0);
  CHECK(f0.next_u64() != f1.next_u64());
  f0 = parent.fork(0);
  CHECK(f0.next_u64() == f0_again.next_u64());
}

TEST_CASE("gaussian_sample rejects empty shapes") {
  Rng rng(1);
  CHECK_THROWS_AS(gaussian_sample(rng, 0, 2), ConfigError);
  CHECK_THROWS_AS(gaussian_sample(rng, 2, 0), ConfigError);
}

TEST_CASE("uniform and below stay in range") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.below(7) < 7u);
  }
}

TEST_CASE("eig2x2 examples") {
  auto e = eig2x2({1, 0, 0, 1});
  CHECK(e[0] == std::complex<double>(1, 0));
  CHECK(e[1] == std::complex<double>(1, 0));

  e = eig2x2({0, -1, 1, 0});
  CHECK(std::abs(e[0] - std::complex<double>(0, 1)) < 1e-15);
  CHECK(std::abs(e[1] - std::complex<double>(0, -1)) < 1e-15);

  e = eig2x2({2, 1, 1, 2});
  CHECK(std::abs(e[0] - 3.0) < 1e-15);
  CHECK(std::abs(e[1] - 1.0) < 1e-15);
}

TEST_CASE("eig2x2 trace and determinant identities") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Matrix2 m = random_matrix(rng);
    const auto e = eig2x2(m);
    const std::complex<double> sum = e[0] + e[1];
    const std::complex<double> prod = e[0] * e[1];
    const double tr_scale = std::max(1.0, std::abs(m.trace()));
    const double det_scale = std::max(1.0, std::abs(m.det()));
    CHECK(std::abs(sum - m.trace()) <= 1e-12 * tr_scale);
    CHECK(std::abs(prod - m.det()) <= 1e-12 * det_scale);
    CHECK(e[0].real() >= e[1].real());
    if (e[0].real() == e[1].real()) {
      CHECK(e[0].imag() >= e[1].imag());
    }
  }
}

TEST_CASE("cond2x2 examples") {
  CHECK(cond2x2({1, 0, 0, 1}) == doctest::Approx(1.0));
  CHECK(cond2x2({3, 0, 0, 1}) == doctest::Approx(3.0));
  CHECK(std::isinf(cond2x2({1, 0, 0, 0})));
  CHECK(std::isinf(cond2x2({0, 0, 0, 0})));
}

TEST_CASE("cond2x2 is at least 1 and scale invariant") {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Matrix2 m = random_matrix(rng);
    const double k = cond2x2(m);
    CHECK(k >= 1.0 - 1e-12);
    double c = rng.uniform(0.1, 10.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double k2 = cond2x2({c * m.a, c * m.b, c * m.c, c * m.d});
    CHECK(std::abs(k2 - k) <= 1e-9 * k);
  }
}

TEST_CASE("cond2x2 agrees with an SVD") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const Matrix2 m = random_matrix(rng);
    Eigen::Matrix2d e;
    e << m.a, m.b, m.c, m.d;
    const Eigen::Vector2d s = Eigen::JacobiSVD<Eigen::Matrix2d>(e).singularValues();
    CHECK(cond2x2(m) == doctest::Approx(s(0) / s(1)).epsilon(1e-8));
  }
}

TEST_CASE("wasserstein2_1d examples") {
  const std::vector<double> a{3.0, -1.0, 2.0};
  CHECK(wasserstein2_1d(a, a) == 0.0);
  CHECK(wasserstein2_1d(std::vector<double>{0, 1}, std::vector<double>{1, 2}) ==
        doctest::Approx(1.0));
  CHECK(wasserstein2_1d(std::vector<double>{0, 0}, std::vector<double>{0, 2}) ==
        doctest::Approx(std::sqrt(2.0)));
  CHECK(wasserstein2_1d(std::vector<double>{1, 0}, std::vector<double>{2, 1}) ==
        doctest::Approx(1.0));
}

TEST_CASE("wasserstein2_1d errors") {
  CHECK_THROWS_AS(wasserstein2_1d(std::vector<double>{1}, std::vector<double>{1, 2}),
                  ConfigError);
  CHECK_THROWS_AS(wasserstein2_1d(std::vector<double>{}, std::vector<double>{}), ConfigError);
}

TEST_CASE("wasserstein2_1d symmetry and triangle inequality") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(17);
    std::vector<double> b(17);
    std::vector<double> c(17);
    for (int i = 0; i < 17; ++i) {
      a[i] = rng.gaussian();
      b[i] = 2.0 * rng.gaussian() + 1.0;
      c[i] = rng.uniform(-4, 4);
    }
    const double ab = wasserstein2_1d(a, b);
    CHECK(ab == wasserstein2_1d(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= wasserstein2_1d(a, c) + wasserstein2_1d(c, b) + 1e-9);
  }
}

TEST_CASE("median") {
  CHECK(median(std::vector<double>{3, 1, 2}) == 2.0);
  CHECK(median(std::vector<double>{4, 1, 2, 3}) == 2.5);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(median(std::vector<double>{inf, 1, inf}) == inf);
}

TEST_CASE("all_finite") {
  CHECK(all_finite(std::vector<double>{1, 2}));
  CHECK_FALSE(all_finite(std::vector<double>{1, std::nan("")}));
}
