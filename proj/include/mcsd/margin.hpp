#pragma once

// Pointwise margin primitives: ramp loss, absolute margins, violation
// matrices and the scoring disagreements built on them.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace mcsd {

/// K class scores projected onto the sum-to-zero hyperplane.
///
/// Construction subtracts the mean, so raw network outputs can be passed in
/// directly. K must be at least 2 and every score finite.
class ScoreVector {
 public:
  explicit ScoreVector(std::vector<double> raw);
  ScoreVector(std::initializer_list<double> raw) : ScoreVector(std::vector<double>(raw)) {}
  explicit ScoreVector(std::span<const double> raw)
      : ScoreVector(std::vector<double>(raw.begin(), raw.end())) {}

  std::size_t size() const noexcept { return scores_.size(); }
  double operator[](std::size_t k) const { return scores_[k]; }
  std::span<const double> values() const noexcept { return scores_; }

  /// Index of the largest score; ties go to the lowest index.
  std::size_t argmax() const noexcept;

 private:
  std::vector<double> scores_;
};

/// A class label, stored 0-based. Use `one_based` when reading user-facing data.
class Label {
 public:
  constexpr explicit Label(std::size_t index) noexcept : index_(index) {}
  static Label one_based(std::size_t k);

  constexpr std::size_t index() const noexcept { return index_; }
  constexpr std::size_t one_based_index() const noexcept { return index_ + 1; }
  friend constexpr bool operator==(Label, Label) = default;

 private:
  std::size_t index_;
};

/// Margin scale of the ramp loss; strictly positive and finite.
class RampParam {
 public:
  explicit RampParam(double rho);
  double value() const noexcept { return rho_; }
  RampParam halved() const { return RampParam(rho_ / 2.0); }

 private:
  double rho_;
};

/// K x K matrix of ramp-loss margin violations, row-major, entries in [0, 1].
/// Entry (i, j) is the ramp of the i-th absolute margin under label j.
class ViolationMatrix {
 public:
  ViolationMatrix(std::size_t k, std::vector<double> entries);

  std::size_t classes() const noexcept { return k_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * k_ + j]; }
  std::span<const double> entries() const noexcept { return entries_; }

 private:
  std::size_t k_;
  std::vector<double> entries_;
};

/// Ramp loss: 1 for x <= 0, 1 - x/rho on (0, rho), 0 for x >= rho.
double ramp_loss(double x, RampParam rho);

/// mu_k = +f_k if k == y else -f_k.
std::vector<double> absolute_margin(const ScoreVector& f_x, Label y);

ViolationMatrix violation_matrix(const ScoreVector& f_x, RampParam rho);

/// (1/K) * entrywise L1 distance between the two violation matrices; range [0, K].
double mcsd_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x, RampParam rho);

/// (K-1)|ramp(-a) - ramp(-b)| + |ramp(a) - ramp(b)|. Summed over the K score
/// pairs it reproduces the violation-matrix L1 distance.
double phi_distance(double a, double b, RampParam rho, std::size_t k);

/// 1/2 (f_y - max_{y' != y} f_y').
double relative_margin(const ScoreVector& f_x, Label y);

/// ramp_{rho/2} of the absolute margin of f2 at its own argmax, under the label
/// predicted by f1.
double mcsd_tilde_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x, RampParam rho);

/// Indicator that the ramp of the same margin (at full rho) saturates at 1.
double mcsd_hat_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x, RampParam rho);

/// Relative-margin disparity: ramp_rho(relative_margin(f2, argmax f1)).
double margin_disparity_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x, RampParam rho);

/// Sum over k of ramp(mu_k(f, y)); range [0, K].
double source_margin_loss(const ScoreVector& f_x, Label y, RampParam rho);

/// 0-1 loss of the argmax labeling.
inline double zero_one_loss(const ScoreVector& f_x, Label y) {
  return f_x.argmax() == y.index() ? 0.0 : 1.0;
}

}  // namespace mcsd
