#include <cmath>
#include <random>

#include "audit.hpp"
#include "doctest.h"
#include "mcsd/errors.hpp"
#include "mcsd/surrogates.hpp"
#include "support.hpp"

using namespace mcsd;

namespace {

ProbVector probs(std::initializer_list<double> raw) { return softmax(std::vector<double>(raw)); }

// Direct evaluation from the definitions, without the library's log-probabilities.
double kl_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

std::vector<double> as_vec(const ProbVector& p) { return {p.values().begin(), p.values().end()}; }

}  // namespace

TEST_SUITE("surrogates") {

TEST_CASE("softmax") {
  const ProbVector u = probs({0.0, 0.0, 0.0});
  for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const ProbVector p = probs({1.0, 0.0, -1.0});
  CHECK(p[0] == doctest::Approx(0.66524).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.24473).epsilon(1e-5));
  CHECK(p[2] == doctest::Approx(0.09003).epsilon(1e-4));
  const ProbVector shifted = probs({1001.0, 1000.0, 999.0});
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(shifted[k] - p[k]) <= 1e-12);
  // far-apart scores keep finite log-probabilities
  const ProbVector far = probs({0.0, 2000.0});
  CHECK(std::isfinite(far.log_prob(0)));
  CHECK(far.log_prob(0) == doctest::Approx(-2000.0));
  CHECK_THROWS(softmax(std::vector<double>{}));
}

TEST_CASE("sur_l1") {
  const ProbVector p = probs({1.0, 0.0, -1.0});
  CHECK(sur_l1(p, p) == 0.0);
  CHECK(sur_l1(probs({60.0, 0.0, 0.0}), probs({0.0, 60.0, 0.0})) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(sur_l1(p, probs({0.0, 0.0, 0.0})) == doctest::Approx(0.22127).epsilon(1e-4));
  CHECK_THROWS_AS(sur_l1(p, probs({0.0, 1.0})), DimensionError);
}

TEST_CASE("sur_kl") {
  const ProbVector p = probs({1.0, 0.0, -1.0}), u = probs({0.0, 0.0, 0.0});
  CHECK(sur_kl(p, p) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(sur_kl(p, u) - sur_kl(u, p)) <= 1e-12);
  const double oracle = 0.5 * (kl_oracle(as_vec(p), as_vec(u)) + kl_oracle(as_vec(u), as_vec(p)));
  CHECK(sur_kl(p, u) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("sur_ce") {
  const ProbVector u = probs({0.0, 0.0, 0.0});
  CHECK(sur_ce(u, u) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  std::mt19937_64 rng(29);
  for (int t = 0; t < 5000; ++t) {
    const ProbVector a = softmax(testing::raw_scores(rng, 4, 2.0));
    const ProbVector b = softmax(testing::raw_scores(rng, 4, 2.0));
    REQUIRE(std::abs(sur_ce(a, b) - sur_kl(a, b) - 0.5 * (entropy(a) + entropy(b))) <= 1e-12);
    REQUIRE(sur_ce(a, b) >= sur_kl(a, b));
    REQUIRE(std::abs(sur_ce(a, b) - sur_ce(b, a)) <= 1e-12);
    REQUIRE(sur_ce(a, a) == doctest::Approx(entropy(a)).epsilon(1e-12));
  }
}

TEST_CASE("symmetry and non-negativity of the three surrogates") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 5000; ++t) {
    const ProbVector a = softmax(testing::raw_scores(rng, 5, 2.0));
    const ProbVector b = softmax(testing::raw_scores(rng, 5, 2.0));
    for (auto f : {&sur_l1, &sur_kl, &sur_ce}) {
      REQUIRE(f(a, b) >= 0.0);
      REQUIRE(std::abs(f(a, b) - f(b, a)) <= 1e-12);
    }
    REQUIRE(sur_l1(a, a) == 0.0);
    REQUIRE(std::abs(sur_kl(a, a)) <= 1e-15);
  }
}

TEST_CASE("triangle inequality holds for l1 only") {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 10000; ++t) {
    const ProbVector a = softmax(testing::raw_scores(rng, 3, 2.0));
    const ProbVector b = softmax(testing::raw_scores(rng, 3, 2.0));
    const ProbVector c = softmax(testing::raw_scores(rng, 3, 2.0));
    REQUIRE(sur_l1(a, c) <= sur_l1(a, b) + sur_l1(b, c) + 1e-12);
  }
  // p = (0.9, 0.1), q = uniform, r = (0.1, 0.9)
  const double l9 = std::log(9.0);
  const ProbVector p = probs({l9, 0.0}), q = probs({0.0, 0.0}), r = probs({0.0, l9});
  CHECK(sur_kl(p, r) > sur_kl(p, q) + sur_kl(q, r));
  CHECK(sur_ce(p, r) > sur_ce(p, q) + sur_ce(q, r));
}

TEST_CASE("log loss") {
  CHECK(log_loss(probs({80.0, 0.0, 0.0}), Label(0)) == doctest::Approx(0.0));
  CHECK(log_loss(probs({0.0, 0.0, 0.0}), Label(2)) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  double prev = 1e300;
  for (double s = -5.0; s <= 5.0; s += 0.25) {
    const double v = log_loss(probs({s, 0.0, 0.0}), Label(0));
    REQUIRE(v < prev);
    prev = v;
  }
  CHECK_THROWS(log_loss(probs({0.0, 0.0}), Label(2)));
}

TEST_CASE("mdd variant terms") {
  const std::vector<double> f1 = {3.0, 0.0, 0.0};
  HeadScores confident{{f1}, {{60.0, 0.0, 0.0}}};
  CHECK(sur_mdd_variant(confident, confident).src_term == doctest::Approx(0.0));

  HeadScores uniform{{f1, f1}, {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}};
  const TermPair t = sur_mdd_variant(uniform, uniform);
  CHECK(t.src_term == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(t.tgt_term == doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-14));

  ClampCounter clamps;
  HeadScores saturated{{f1}, {{2000.0, 0.0, 0.0}}};
  const TermPair s = sur_mdd_variant(saturated, saturated, &clamps);
  CHECK(std::isfinite(s.tgt_term));
  CHECK(clamps.count == 1);
  CHECK_THROWS(sur_mdd_variant(HeadScores{}, uniform));
}

TEST_CASE("dann terms") {
  const std::vector<double> zero(4, 0.0);
  const TermPair t = sur_dann(zero, zero);
  CHECK(t.src_term == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(t.tgt_term == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(sur_dann(std::vector<double>{50.0}, zero).src_term == doctest::Approx(0.0));

  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int b = 0; b < 50; ++b) {
    std::vector<double> s(7), g(5);
    for (double& v : s) v = n(rng);
    for (double& v : g) v = n(rng);
    double os = 0.0, ot = 0.0;
    for (double d : s) os += -std::log(1.0 / (1.0 + std::exp(-d))) / 7.0;
    for (double d : g) ot += std::log(1.0 - 1.0 / (1.0 + std::exp(-d))) / 5.0;
    const TermPair r = sur_dann(s, g);
    REQUIRE(r.src_term == doctest::Approx(os).epsilon(1e-12));
    REQUIRE(r.tgt_term == doctest::Approx(ot).epsilon(1e-12));
  }
}

TEST_CASE("l1 subgradient at equal inputs") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto z = testing::raw_scores(rng, 4, 1.0);
    const auto [g1, g2] = sur_l1_grad(z, z);
    for (double v : g1) REQUIRE(v == 0.0);
    for (double v : g2) REQUIRE(v == 0.0);
    // one-sided slopes along a random direction bracket the zero subgradient
    std::vector<double> up = z, down = z, dir(4);
    for (double& v : dir) v = n(rng);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 4; ++i) {
      up[i] += h * dir[i];
      down[i] -= h * dir[i];
    }
    const ProbVector p = softmax(z);
    const double right = (sur_l1(softmax(up), p) - 0.0) / h;
    const double left = (0.0 - sur_l1(softmax(down), p)) / h;
    REQUIRE(left <= 0.0);
    REQUIRE(right >= 0.0);
    REQUIRE(std::abs(right) < 1.0);
  }
}

TEST_CASE("every surrogate gradient passes a finite-difference audit") {
  for (std::size_t k : {2u, 3u, 5u}) {
    for (const AuditedLoss& loss : surrogate_losses(k)) {
      CAPTURE(loss.name);
      CAPTURE(k);
      const auto out = testing::audit_loss(loss, k, 100, 1000 + k);
      CHECK(out.worst <= 1e-5);
    }
  }
}

TEST_CASE("surrogate names round-trip") {
  for (Surrogate s : {Surrogate::l1, Surrogate::kl, Surrogate::ce, Surrogate::mdd_variant, Surrogate::dann}) {
    CHECK(surrogate_from_string(to_string(s)) == s);
  }
  CHECK_THROWS(surrogate_from_string("wasserstein"));
}

}  // TEST_SUITE
