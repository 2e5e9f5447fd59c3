#pragma once

// Softmax-based surrogate disagreements and their gradients with respect to
// the raw (pre-softmax) scores. Everything here is pointwise; trainers average.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcsd/margin.hpp"

namespace mcsd {

/// Log-probability floor used by every clamped logarithm.
inline constexpr double kClampEps = 1e-12;

/// Softmax output. Log-probabilities are kept alongside the probabilities so
/// that far-apart scores never produce log(0).
class ProbVector {
 public:
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  double log_prob(std::size_t k) const { return logs_[k]; }
  std::span<const double> values() const noexcept { return probs_; }
  std::span<const double> logs() const noexcept { return logs_; }

  friend ProbVector softmax(std::span<const double> raw);

 private:
  std::vector<double> probs_;
  std::vector<double> logs_;
};

ProbVector softmax(std::span<const double> raw);
inline ProbVector softmax(const ScoreVector& f) { return softmax(f.values()); }

double log_sum_exp(std::span<const double> raw);

double entropy(const ProbVector& p);
double cross_entropy(const ProbVector& p, const ProbVector& q);  ///< -sum p log q
double kl_divergence(const ProbVector& p, const ProbVector& q);

/// (1/K) ||p1 - p2||_1
double sur_l1(const ProbVector& p1, const ProbVector& p2);
/// 1/2 [KL(p1||p2) + KL(p2||p1)]
double sur_kl(const ProbVector& p1, const ProbVector& p2);
/// 1/2 [CE(p1,p2) + CE(p2,p1)]
double sur_ce(const ProbVector& p1, const ProbVector& p2);

/// -log p_y
double log_loss(const ProbVector& p, Label y);

/// Counts clamped logarithms so that saturation shows up in metrics.
struct ClampCounter {
  std::size_t count = 0;
};

struct TermPair {
  double src_term = 0.0;
  double tgt_term = 0.0;
};

/// Scores of the two auxiliary heads on one batch; row i is point i.
struct HeadScores {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
};

/// src: mean of -log softmax(f2)[argmax f1]; tgt: mean of log(1 - softmax(f2)[argmax f1]).
TermPair sur_mdd_variant(const HeadScores& src, const HeadScores& tgt,
                         ClampCounter* clamps = nullptr);

/// Domain-classifier terms: src mean of -log sigmoid(d), tgt mean of log(1 - sigmoid(d)).
TermPair sur_dann(std::span<const double> src_d, std::span<const double> tgt_d,
                  ClampCounter* clamps = nullptr);

enum class Surrogate { l1, kl, ce, mdd_variant, dann };
std::string to_string(Surrogate s);
Surrogate surrogate_from_string(const std::string& name);

// Gradients with respect to raw scores. Each returns d(loss)/d(z).

std::vector<double> log_loss_grad(std::span<const double> z, Label y);

/// Subgradient of sur_l1; the sign of a zero difference is taken as 0.
std::pair<std::vector<double>, std::vector<double>> sur_l1_grad(std::span<const double> z1,
                                                                std::span<const double> z2);
std::pair<std::vector<double>, std::vector<double>> sur_kl_grad(std::span<const double> z1,
                                                                std::span<const double> z2);
std::pair<std::vector<double>, std::vector<double>> sur_ce_grad(std::span<const double> z1,
                                                                std::span<const double> z2);

/// Per-point MDD-variant pieces as functions of the second head's scores; the
/// first head enters only through its argmax and so receives no gradient.
double mdd_src_point(std::span<const double> z1, std::span<const double> z2);
double mdd_tgt_point(std::span<const double> z1, std::span<const double> z2,
                     ClampCounter* clamps = nullptr);
std::vector<double> mdd_src_point_grad(std::span<const double> z1, std::span<const double> z2);
std::vector<double> mdd_tgt_point_grad(std::span<const double> z1, std::span<const double> z2);

double dann_src_point(double d, ClampCounter* clamps = nullptr);
double dann_tgt_point(double d, ClampCounter* clamps = nullptr);
double dann_src_point_grad(double d);
double dann_tgt_point_grad(double d);

/// A scalar loss of a flat input vector with its analytic gradient, as
/// registered for finite-difference audits. `label` is ignored by
/// label-free losses.
struct AuditedLoss {
  std::string name;
  std::size_t input_size = 0;
  std::function<double(std::span<const double>, std::size_t label)> value;
  std::function<std::vector<double>(std::span<const double>, std::size_t label)> gradient;
};

/// Surrogate-level losses for K classes.
std::vector<AuditedLoss> surrogate_losses(std::size_t k);

}  // namespace mcsd
