#pragma once

// Empirical divergence estimators over finite samples: exact enumeration of
// the disagreement divergence over a finite scorer grid, a gradient-ascent
// lower bound over linear heads, Monte-Carlo Rademacher complexity, and the
// data-dependent bound report.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcsd/margin.hpp"

namespace mcsd {

/// Feature vectors with optional labels and optional probability masses.
///
/// Without masses every point weighs 1/n, i.e. the empirical distribution.
/// Masses let small enumerated universes carry exact expectations.
class SampleSet {
 public:
  explicit SampleSet(std::vector<std::vector<double>> points,
                     std::optional<std::vector<Label>> labels = std::nullopt,
                     std::optional<std::vector<double>> masses = std::nullopt);

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dim() const noexcept { return points_.front().size(); }
  std::span<const double> point(std::size_t i) const { return points_[i]; }
  const std::vector<std::vector<double>>& points() const noexcept { return points_; }

  bool has_labels() const noexcept { return labels_.has_value(); }
  Label label(std::size_t i) const;

  /// Normalized probability mass of point i.
  double mass(std::size_t i) const noexcept { return masses_[i]; }

 private:
  std::vector<std::vector<double>> points_;
  std::optional<std::vector<Label>> labels_;
  std::vector<double> masses_;
};

/// Affine scorer x -> W x + b with W stored row-major (K x d).
struct LinearScorer {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::vector<double> raw(std::span<const double> x) const;
  ScoreVector operator()(std::span<const double> x) const { return ScoreVector(raw(x)); }
};

using Scorer = std::function<ScoreVector(std::span<const double>)>;

/// Every candidate evaluated on every point: scores[c][i].
struct GridEvaluation {
  std::size_t classes = 0;
  std::vector<std::vector<ScoreVector>> scores;
};

/// Finite family of scoring functions standing in for the hypothesis space.
class ScorerGrid {
 public:
  ScorerGrid(std::size_t classes, std::vector<Scorer> candidates);

  static ScorerGrid from_linear(const std::vector<LinearScorer>& scorers);

  /// Scorers given as lookup tables over an indexed universe: candidate c maps
  /// a point whose first coordinate rounds to i onto table[c][i].
  static ScorerGrid from_table(std::vector<std::vector<ScoreVector>> table);

  std::size_t size() const noexcept { return candidates_.size(); }
  std::size_t classes() const noexcept { return classes_; }
  const Scorer& operator[](std::size_t c) const { return candidates_[c]; }

  GridEvaluation evaluate(const SampleSet& sample) const;

 private:
  std::size_t classes_;
  std::vector<Scorer> candidates_;
};

/// Deterministic pairwise-tree summation.
double pairwise_sum(std::span<const double> values);

/// Mass-weighted mean of a per-point quantity.
double weighted_mean(const SampleSet& sample, std::span<const double> per_point);

enum class Disagreement { mcsd, tilde, hat };

std::string to_string(Disagreement d);
Disagreement disagreement_from_string(const std::string& name);

/// Pointwise disagreement of the chosen kind.
double pointwise_disagreement(Disagreement kind, const ScoreVector& f1_x,
                              const ScoreVector& f2_x, RampParam rho);

/// Expected pointwise MCSD of (f1, f2) under the sample's distribution.
double empirical_mcsd(const SampleSet& sample, const Scorer& f1, const Scorer& f2, RampParam rho);

double empirical_disagreement(Disagreement kind, const SampleSet& sample, const Scorer& f1,
                              const Scorer& f2, RampParam rho);

struct DivergenceResult {
  double value = 0.0;
  std::size_t first = 0;   ///< index of f' in the grid
  std::size_t second = 0;  ///< index of f'' in the grid
};

/// max over ordered grid pairs of E_tgt[d(f', f'')] - E_src[d(f', f'')].
/// The reduction is order-fixed, so any thread count gives identical output.
DivergenceResult divergence_exact(Disagreement kind, const SampleSet& src, const SampleSet& tgt,
                                  const ScorerGrid& grid, RampParam rho, unsigned threads = 1);

inline DivergenceResult mcsd_divergence_exact(const SampleSet& src, const SampleSet& tgt,
                                              const ScorerGrid& grid, RampParam rho,
                                              unsigned threads = 1) {
  return divergence_exact(Disagreement::mcsd, src, tgt, grid, rho, threads);
}

inline double divergence_exact_variant(const SampleSet& src, const SampleSet& tgt,
                                       const ScorerGrid& grid, RampParam rho,
                                       Disagreement variant) {
  return divergence_exact(variant, src, tgt, grid, rho).value;
}

/// Ramp with cubic Hermite blends of total width rho/100 around both kinks.
/// Used only inside the gradient-ascent estimator.
double smoothed_ramp(double x, RampParam rho);
double smoothed_ramp_derivative(double x, RampParam rho);

struct AdversarialOptions {
  std::size_t classes = 3;
  std::size_t steps = 200;
  double step_size = 0.5;
  double init_scale = 0.5;
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
};

struct AdversarialResult {
  /// Best exact-ramp objective seen over all iterates (a lower bound on the divergence).
  double value = 0.0;
  /// Smoothed objective at the final iterate.
  double smoothed_value = 0.0;
  /// False when the step budget ran out before the ascent stalled.
  bool converged = false;
  /// Exact objective after each accepted step; running maximum, so non-decreasing.
  std::vector<double> trace;
  /// Every accepted (f', f'') iterate including the initial pair.
  std::vector<std::pair<LinearScorer, LinearScorer>> iterates;
};

/// Gradient ascent on the smoothed objective over two linear heads acting on
/// the sample coordinates. Backtracking keeps the smoothed objective monotone.
AdversarialResult mcsd_divergence_adversarial(const SampleSet& src, const SampleSet& tgt,
                                              RampParam rho, const AdversarialOptions& options);

/// Smoothed objective and its gradient for a head pair (exposed for gradient audits).
struct SmoothedObjective {
  double value = 0.0;
  LinearScorer grad_first;
  LinearScorer grad_second;
};
SmoothedObjective smoothed_divergence_objective(const SampleSet& src, const SampleSet& tgt,
                                                const LinearScorer& f1, const LinearScorer& f2,
                                                RampParam rho);

struct RademacherEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t draws = 0;
};

/// values[g][i] = g(z_i). Monte-Carlo estimate of (1/m) E_sigma sup_g sum sigma_i g(z_i).
RademacherEstimate rademacher_of_values(const std::vector<std::vector<double>>& values,
                                        std::size_t sigma_draws, std::uint64_t seed);

/// Exact expectation by enumerating all 2^m sign vectors (m <= 24).
double rademacher_exact_of_values(const std::vector<std::vector<double>>& values);

/// Per-component projections of every grid member, evaluated on the sample.
std::vector<std::vector<double>> component_projections(const ScorerGrid& grid,
                                                       const SampleSet& sample);

RademacherEstimate rademacher_estimate(const SampleSet& sample, const ScorerGrid& grid,
                                       std::size_t sigma_draws, std::uint64_t seed);

struct PacOptions {
  double delta = 0.05;
  /// 0 selects exact sign-vector enumeration.
  std::size_t sigma_draws = 2000;
  std::uint64_t seed = 0;
};

/// Every term of the data-dependent target-error bound for one grid member.
struct PacReport {
  std::size_t scorer = 0;
  std::size_t classes = 0;
  double rho = 0.0;
  double delta = 0.0;
  std::size_t n_src = 0;
  std::size_t n_tgt = 0;

  double src_margin_err = 0.0;
  double divergence = 0.0;
  double rademacher_src_raw = 0.0;
  double rademacher_tgt_raw = 0.0;
  double rademacher_src = 0.0;  ///< (2K^2/rho + 4K/rho) * raw
  double rademacher_tgt = 0.0;  ///< 4K/rho * raw
  double slack_src = 0.0;       ///< 6K sqrt(log(4/delta) / 2 n_s), confidence padding
  double slack_tgt = 0.0;       ///< 3K sqrt(log(4/delta) / 2 n_t), confidence padding
  double lambda = 0.0;          ///< min over the grid of joint source+target margin error
  std::size_t lambda_minimizer = 0;
  double lhs_target_err = 0.0;
  double rhs = 0.0;
  bool holds = false;

  nlohmann::json to_json() const;
};

/// `tgt` must carry the (evaluation-only) target labels.
PacReport pac_bound_report(const SampleSet& src, const SampleSet& tgt, const ScorerGrid& grid,
                           RampParam rho, std::size_t scorer, const PacOptions& options = {});

/// Expected sum-of-ramps source margin error.
double margin_error(const SampleSet& labeled, const Scorer& f, RampParam rho);
/// Expected 0-1 error of the argmax labeling.
double zero_one_error(const SampleSet& labeled, const Scorer& f);

}  // namespace mcsd
