#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "mcsd/errors.hpp"
#include "mcsd/margin.hpp"
#include "support.hpp"

using namespace mcsd;

namespace {
const RampParam kRho5(5.0);
const ScoreVector kF1{10.0, -5.0, -5.0};
const ScoreVector kF2{-5.0, 10.0, -5.0};
}  // namespace

TEST_SUITE("margin") {

TEST_CASE("ramp loss values and kinks") {
  CHECK(ramp_loss(10.0, kRho5) == 0.0);
  CHECK(ramp_loss(0.0, kRho5) == 1.0);
  CHECK(ramp_loss(2.5, kRho5) == 0.5);
  CHECK(ramp_loss(5.0, kRho5) == 0.0);
  CHECK(ramp_loss(-3.0, kRho5) == 1.0);
  CHECK_THROWS(ramp_loss(std::nan(""), kRho5));
  CHECK_THROWS(RampParam(0.0));
  CHECK_THROWS(RampParam(-1.0));
  CHECK_THROWS(RampParam(std::numeric_limits<double>::infinity()));
}

TEST_CASE("ramp loss is monotone and 1/rho Lipschitz") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 4.0);
  std::uniform_real_distribution<double> r(0.1, 6.0);
  for (int t = 0; t < 20000; ++t) {
    const RampParam rho(r(rng));
    double a = n(rng), b = n(rng);
    if (a > b) std::swap(a, b);
    const double fa = ramp_loss(a, rho), fb = ramp_loss(b, rho);
    REQUIRE(fa >= fb);
    REQUIRE(std::abs(fa - fb) <= (b - a) / rho.value() + 1e-15);
  }
}

TEST_CASE("score vectors are projected to sum zero") {
  const ScoreVector f{3.0, 1.0, 2.0};
  CHECK(f[0] + f[1] + f[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f.argmax() == 0);
  CHECK(ScoreVector{1.0, 1.0, 0.0}.argmax() == 0);  // lowest index on ties
  CHECK_THROWS(ScoreVector{1.0});
  CHECK_THROWS(ScoreVector{1.0, std::nan("")});
  CHECK(Label::one_based(2).index() == 1);
  CHECK_THROWS(Label::one_based(0));
}

TEST_CASE("absolute margin") {
  CHECK(absolute_margin(kF1, Label::one_based(1)) == std::vector<double>{10.0, 5.0, 5.0});
  CHECK(absolute_margin(kF1, Label::one_based(2)) == std::vector<double>{-10.0, -5.0, 5.0});
  const ScoreVector zero{0.0, 0.0, 0.0};
  for (std::size_t y = 1; y <= 3; ++y) {
    for (double v : absolute_margin(zero, Label::one_based(y))) CHECK(v == 0.0);
  }
  CHECK_THROWS(absolute_margin(kF1, Label(3)));
}

TEST_CASE("violation matrix") {
  const ViolationMatrix m = violation_matrix(kF1, kRho5);
  const std::vector<double> expected = {0, 1, 1, 0, 1, 0, 0, 0, 1};
  for (std::size_t i = 0; i < 9; ++i) CHECK(m.entries()[i] == expected[i]);

  const ViolationMatrix flat = violation_matrix(ScoreVector{0.0, 0.0, 0.0}, kRho5);
  for (double v : flat.entries()) CHECK(v == 1.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(5.0, 30.0);
  for (int t = 0; t < 200; ++t) {
    // |f_k| >= rho for every class after projection: scores far apart
    const ScoreVector f{u(rng) + 40.0, -u(rng), -u(rng) - 40.0};
    bool far = true;
    for (double v : f.values()) far = far && std::abs(v) >= 5.0;
    if (!far) continue;
    const ViolationMatrix sat = violation_matrix(f, kRho5);
    for (double v : sat.entries()) REQUIRE((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("mcsd pointwise examples") {
  CHECK(mcsd_pointwise(kF1, kF1, kRho5) == 0.0);
  CHECK(mcsd_pointwise(kF1, kF2, kRho5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(mcsd_pointwise(kF1, ScoreVector{1.0, -1.0}, kRho5), DimensionError);
}

TEST_CASE("mcsd pointwise matches the violation-matrix oracle") {
  std::mt19937_64 rng(5);
  for (std::size_t k : {2u, 3u, 5u, 10u}) {
    for (int t = 0; t < 500; ++t) {
      const auto a = testing::raw_scores(rng, k, 3.0), b = testing::raw_scores(rng, k, 3.0);
      REQUIRE(mcsd_pointwise(ScoreVector(a), ScoreVector(b), RampParam(1.5)) ==
              doctest::Approx(testing::mcsd_oracle(a, b, 1.5)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mcsd is a pseudo-metric") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t k = 2 + t % 6;
    const RampParam rho(0.5 + (t % 4));
    const ScoreVector a = testing::scores(rng, k, 2.0), b = testing::scores(rng, k, 2.0),
                      c = testing::scores(rng, k, 2.0);
    const double ab = mcsd_pointwise(a, b, rho);
    REQUIRE(ab >= 0.0);
    REQUIRE(ab == mcsd_pointwise(b, a, rho));
    REQUIRE(mcsd_pointwise(a, a, rho) == 0.0);
    REQUIRE(mcsd_pointwise(a, c, rho) <= ab + mcsd_pointwise(b, c, rho) + 1e-12);
  }
}

TEST_CASE("phi distance") {
  CHECK(phi_distance(3.0, 3.0, kRho5, 3) == 0.0);
  CHECK(phi_distance(10.0, -5.0, kRho5, 3) == 3.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < 3; ++k) sum += phi_distance(kF1[k], kF2[k], kRho5, 3);
  CHECK(sum == 6.0);
  CHECK_THROWS(phi_distance(1.0, 2.0, kRho5, 1));
}

TEST_CASE("K times mcsd equals the summed phi distance") {
  std::mt19937_64 rng(13);
  for (std::size_t k : {2u, 3u, 5u, 10u}) {
    for (double r : {0.5, 1.0, 5.0}) {
      const RampParam rho(r);
      for (int t = 0; t < 2500; ++t) {
        const ScoreVector a = testing::scores(rng, k, r * 2.0), b = testing::scores(rng, k, r * 2.0);
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) sum += phi_distance(a[c], b[c], rho, k);
        REQUIRE(std::abs(static_cast<double>(k) * mcsd_pointwise(a, b, rho) - sum) <= 1e-12);
      }
    }
  }
}

TEST_CASE("relative margin") {
  CHECK(relative_margin(kF1, Label::one_based(1)) == 7.5);
  CHECK(relative_margin(kF1, Label::one_based(2)) == -7.5);
  CHECK(relative_margin(ScoreVector{0.0, 0.0, 0.0}, Label(1)) == 0.0);
}

TEST_CASE("scalar disagreements") {
  CHECK(mcsd_tilde_pointwise(kF1, kF1, kRho5) == 0.0);
  CHECK(mcsd_tilde_pointwise(kF1, kF2, kRho5) == 1.0);
  CHECK(mcsd_hat_pointwise(kF1, kF1, kRho5) == 0.0);
  CHECK(mcsd_hat_pointwise(kF1, kF2, kRho5) == 1.0);

  std::mt19937_64 rng(17);
  for (int t = 0; t < 10000; ++t) {
    const ScoreVector a = testing::scores(rng, 4, 2.0), b = testing::scores(rng, 4, 2.0);
    const double hat = mcsd_hat_pointwise(a, b, RampParam(1.0));
    const double tilde = mcsd_tilde_pointwise(a, b, RampParam(1.0));
    REQUIRE((hat == 0.0 || hat == 1.0));
    REQUIRE(tilde >= 0.0);
    REQUIRE(tilde <= 1.0);
    if (hat == 1.0) REQUIRE(tilde == 1.0);
  }
}

TEST_CASE("source margin loss") {
  CHECK(source_margin_loss(kF1, Label::one_based(1), kRho5) == 0.0);
  CHECK(source_margin_loss(kF1, Label::one_based(2), kRho5) == 2.0);
  CHECK(source_margin_loss(ScoreVector{0.0, 0.0, 0.0, 0.0}, Label(2), RampParam(0.3)) == 4.0);
}

TEST_CASE("pointwise error and disagreement bounds") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> r(0.2, 5.0);
  for (int t = 0; t < 100000; ++t) {
    const std::size_t k = 2 + t % 5;
    const RampParam rho(r(rng));
    const ScoreVector f = testing::scores(rng, k, rho.value() * 2.0);
    const ScoreVector g = testing::scores(rng, k, rho.value() * 2.0);
    const Label y(t % k);
    const double d = mcsd_pointwise(f, g, rho);
    REQUIRE(zero_one_loss(f, y) <= source_margin_loss(g, y, rho) + d + 1e-12);
    REQUIRE(d <= source_margin_loss(f, y, rho) + source_margin_loss(g, y, rho) + 1e-12);
  }
}

TEST_CASE("non-negative margins with one positive fix the argmax") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> small(-3, 3);
  std::size_t hits = 0;
  for (int t = 0; t < 200000; ++t) {
    const std::size_t k = 2 + t % 4;
    std::vector<double> raw(k);
    for (double& v : raw) v = small(rng);
    const ScoreVector f(raw);
    for (std::size_t y = 0; y < k; ++y) {
      const auto mu = absolute_margin(f, Label(y));
      bool nonneg = true, positive = false;
      for (double m : mu) {
        nonneg = nonneg && m >= 0.0;
        positive = positive || m > 0.0;
      }
      if (nonneg && positive) {
        ++hits;
        REQUIRE(f.argmax() == y);
      }
    }
  }
  CHECK(hits > 0);
}

}  // TEST_SUITE
