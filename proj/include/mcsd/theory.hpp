#pragma once

// Brute-force verification of the margin theory: pointwise identities and
// inequalities on random draws, and the target-error bounds on fully
// enumerated toy universes. Each check yields a JSON verdict with a witness.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcsd/divergence.hpp"
#include "mcsd/margin.hpp"

namespace mcsd {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t trials = 0;
  std::size_t violations = 0;
  /// Largest observed violation amount (or identity error), 0 when none.
  double worst = 0.0;
  nlohmann::json witness;  ///< first violating input, null when passed
  nlohmann::json details = nlohmann::json::object();
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct TheoryReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Random sum-to-zero scores drawn from a scale mixture around rho, including
/// lattice values so kinks and argmax ties are exercised.
ScoreVector random_scores(std::mt19937_64& rng, std::size_t k, double rho);

/// A ramp used in place of the true one (for mutation tests).
using RampFn = std::function<double(double, RampParam)>;

CheckResult check_ramp_properties(std::uint64_t seed, std::size_t draws);

/// K * pointwise MCSD against the summed per-class distance, for K in
/// {2, 3, 5, 10} and rho in {0.5, 1, 5}. A non-null `matrix_ramp` replaces the
/// ramp on the violation-matrix side only.
CheckResult check_decomposition_identity(std::uint64_t seed, std::size_t pairs_per_case,
                                 const RampFn& matrix_ramp = nullptr);

/// 1[h_f != y] <= L(f', y) + mcsd(f, f')
CheckResult check_error_bound_pointwise(std::uint64_t seed, std::size_t draws);
/// mcsd(f, f') <= L(f, y) + L(f', y)
CheckResult check_disagreement_bound_pointwise(std::uint64_t seed, std::size_t draws);
/// The same two inequalities with the tilde and hat disagreements.
CheckResult check_scalar_variant_bounds(std::uint64_t seed, std::size_t draws);

/// All absolute margins non-negative and one positive implies argmax = y.
CheckResult check_margin_sign_property(std::uint64_t seed, std::size_t draws);
CheckResult check_mcsd_metric(std::uint64_t seed, std::size_t draws);
CheckResult check_hat_implies_tilde(std::uint64_t seed, std::size_t draws);

/// Finite labeled source and target distributions over an indexed point set,
/// with a table-valued scorer grid standing in for the hypothesis space.
struct ToyUniverse {
  SampleSet source;
  SampleSet target;
  std::vector<std::vector<ScoreVector>> table;  ///< table[c][point]
  ScorerGrid grid;
  double rho = 1.0;

  nlohmann::json to_json() const;
};

ToyUniverse random_universe(std::mt19937_64& rng, std::size_t points, std::size_t k,
                            std::size_t grid_size);

/// Every term of the target-error bound for one scorer.
struct BoundTerms {
  double target_err = 0.0;
  double source_margin_err = 0.0;
  double divergence = 0.0;
  double lambda = 0.0;
  double rhs() const { return source_margin_err + divergence + lambda; }
};

/// lambda = joint source + target margin error of the grid member minimizing it.
double joint_margin_lambda(const ToyUniverse& u, std::size_t* minimizer = nullptr);

BoundTerms target_bound(const ToyUniverse& u, Disagreement kind, std::size_t scorer);

/// Target 0-1 error bounded by source margin error + divergence + lambda for
/// every grid member on `universes` random universes.
CheckResult check_target_bound(std::uint64_t seed, std::size_t universes, Disagreement kind);

/// d(A, C) <= d(A, B) + d(B, C) on random triples of samples sharing a grid.
CheckResult check_divergence_triangle(std::uint64_t seed, std::size_t universes);
/// A constructed pair with d(P, Q) != d(Q, P).
CheckResult check_divergence_asymmetry();
/// Full data-dependent bound report on a random universe; passes when LHS <= RHS.
CheckResult check_pac_report(std::uint64_t seed);
/// Records (never fails) the three bound right-hand sides per universe.
CheckResult log_bound_tightness(std::uint64_t seed, std::size_t universes);

/// Every check above. Pointwise checks use `trials` draws per case (the
/// error and disagreement inequalities 10x that); bound checks use
/// max(20, trials / 500) universes.
TheoryReport run_theory_checks(std::uint64_t seed, std::size_t trials);

}  // namespace mcsd
