#include "mcsd/margin.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mcsd/errors.hpp"

namespace mcsd {

namespace {

void require_same_classes(const ScoreVector& a, const ScoreVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("score vectors have " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " classes");
  }
}

void require_label(const ScoreVector& f, Label y) {
  if (y.index() >= f.size()) {
    throw std::invalid_argument("label " + std::to_string(y.one_based_index()) +
                                " outside 1.." + std::to_string(f.size()));
  }
}

double margin_at(const ScoreVector& f, std::size_t k, std::size_t y) {
  return k == y ? f[k] : -f[k];
}

}  // namespace

ScoreVector::ScoreVector(std::vector<double> raw) : scores_(std::move(raw)) {
  if (scores_.size() < 2) {
    throw std::invalid_argument("a score vector needs at least 2 classes");
  }
  for (double s : scores_) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite class score");
  }
  const double mean =
      std::accumulate(scores_.begin(), scores_.end(), 0.0) / static_cast<double>(scores_.size());
  for (double& s : scores_) s -= mean;
}

std::size_t ScoreVector::argmax() const noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores_.size(); ++k) {
    if (scores_[k] > scores_[best]) best = k;
  }
  return best;
}

Label Label::one_based(std::size_t k) {
  if (k == 0) throw std::invalid_argument("1-based label must be positive");
  return Label(k - 1);
}

RampParam::RampParam(double rho) : rho_(rho) {
  if (!std::isfinite(rho) || rho <= 0.0) {
    throw std::invalid_argument("ramp parameter must be finite and positive");
  }
}

ViolationMatrix::ViolationMatrix(std::size_t k, std::vector<double> entries)
    : k_(k), entries_(std::move(entries)) {
  if (entries_.size() != k_ * k_) throw DimensionError("violation matrix must be K x K");
}

double ramp_loss(double x, RampParam rho) {
  if (!std::isfinite(x)) throw std::invalid_argument("ramp loss of a non-finite value");
  const double r = rho.value();
  if (x >= r) return 0.0;
  if (x <= 0.0) return 1.0;
  return 1.0 - x / r;
}

std::vector<double> absolute_margin(const ScoreVector& f_x, Label y) {
  require_label(f_x, y);
  std::vector<double> mu(f_x.size());
  for (std::size_t k = 0; k < mu.size(); ++k) mu[k] = margin_at(f_x, k, y.index());
  return mu;
}

ViolationMatrix violation_matrix(const ScoreVector& f_x, RampParam rho) {
  const std::size_t k = f_x.size();
  std::vector<double> entries(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) entries[i * k + j] = ramp_loss(margin_at(f_x, i, j), rho);
  }
  return ViolationMatrix(k, std::move(entries));
}

double mcsd_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x, RampParam rho) {
  require_same_classes(f1_x, f2_x);
  const auto m1 = violation_matrix(f1_x, rho);
  const auto m2 = violation_matrix(f2_x, rho);
  double l1 = 0.0;
  for (std::size_t e = 0; e < m1.entries().size(); ++e) {
    l1 += std::abs(m1.entries()[e] - m2.entries()[e]);
  }
  return l1 / static_cast<double>(f1_x.size());
}

double phi_distance(double a, double b, RampParam rho, std::size_t k) {
  if (k < 2) throw std::invalid_argument("phi distance needs K >= 2");
  return static_cast<double>(k - 1) * std::abs(ramp_loss(-a, rho) - ramp_loss(-b, rho)) +
         std::abs(ramp_loss(a, rho) - ramp_loss(b, rho));
}

double relative_margin(const ScoreVector& f_x, Label y) {
  require_label(f_x, y);
  double rival = -INFINITY;
  for (std::size_t k = 0; k < f_x.size(); ++k) {
    if (k != y.index()) rival = std::max(rival, f_x[k]);
  }
  return 0.5 * (f_x[y.index()] - rival);
}

namespace {

double predicted_margin(const ScoreVector& f1_x, const ScoreVector& f2_x) {
  require_same_classes(f1_x, f2_x);
  return margin_at(f2_x, f2_x.argmax(), f1_x.argmax());
}

}  // namespace

double mcsd_tilde_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x, RampParam rho) {
  return ramp_loss(predicted_margin(f1_x, f2_x), rho.halved());
}

double mcsd_hat_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x, RampParam rho) {
  return ramp_loss(predicted_margin(f1_x, f2_x), rho) == 1.0 ? 1.0 : 0.0;
}

double margin_disparity_pointwise(const ScoreVector& f1_x, const ScoreVector& f2_x,
                                  RampParam rho) {
  require_same_classes(f1_x, f2_x);
  return ramp_loss(relative_margin(f2_x, Label(f1_x.argmax())), rho);
}

double source_margin_loss(const ScoreVector& f_x, Label y, RampParam rho) {
  require_label(f_x, y);
  double total = 0.0;
  for (std::size_t k = 0; k < f_x.size(); ++k) total += ramp_loss(margin_at(f_x, k, y.index()), rho);
  return total;
}

}  // namespace mcsd
