#pragma once

// Losses of the symmetric two-head classifier: the concatenated 2K-way output
// f_st = [f_s; f_t], cross-domain task losses, domain confusion for the feature
// extractor and domain discrimination for the heads. Plus the partial-set class
// weights and the open-set adaptations.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mcsd/neural.hpp"
#include "mcsd/surrogates.hpp"

namespace mcsd {

inline const std::string kSourceHead = "fs";
inline const std::string kTargetHead = "ft";

/// Loss value with its gradient w.r.t. the raw scores it was computed from.
struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

/// Gradients for the two halves of the concatenated output.
struct SplitGrad {
  double value = 0.0;
  Eigen::MatrixXd grad_s;  ///< n x K, flows into f_s
  Eigen::MatrixXd grad_t;  ///< n x K, flows into f_t
};

/// Class weights omega in [0, 1]; all ones outside partial mode.
using ClassWeights = Eigen::VectorXd;

ClassWeights unit_weights(std::size_t k);

/// Row-wise concatenation [zs | zt].
Eigen::MatrixXd concat_scores(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt);

/// -(1/n) sum omega_y log softmax(z)_y over one K-way head.
LossGrad loss_task_src(const Eigen::MatrixXd& z, std::span<const std::size_t> labels,
                       const ClassWeights& omega);

/// -(1/2n) sum omega_y [log p_st_y + log p_st_{y+K}]
SplitGrad confuse_src(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt,
                      std::span<const std::size_t> labels, const ClassWeights& omega,
                      ClampCounter* clamps = nullptr);

/// -(1/2n) sum_j [sum_k p_st_{k+K} log p_st_k + sum_k p_st_k log p_st_{k+K}]
SplitGrad confuse_tgt(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt);

struct DiscrimGrad {
  double value = 0.0;
  SplitGrad src;
  SplitGrad tgt;
};

/// -(1/n_s) sum omega_y log p_st_y(x_s) - (1/n_t) sum log(sum_k p_st_{k+K}(x_t))
DiscrimGrad discrim(const Eigen::MatrixXd& zs_src, const Eigen::MatrixXd& zt_src,
                    std::span<const std::size_t> labels, const ClassWeights& omega,
                    const Eigen::MatrixXd& zs_tgt, const Eigen::MatrixXd& zt_tgt,
                    ClampCounter* clamps = nullptr);

/// omega_k = mean_j softmax(f_t(x_j))_k, then xi * omega / max(omega) + (1 - xi).
ClassWeights partial_weights(const Eigen::MatrixXd& zt_on_target, double xi);

enum class SymmVariant { full, no_target_task, no_adversarial };

struct SymmLosses {
  double task_s = 0.0;
  double task_t = 0.0;
  double confuse_src = 0.0;
  double confuse_tgt = 0.0;
  double discrim = 0.0;
};

/// Gradients of one simultaneous step: psi from the confusion terms, heads
/// from the task and discrimination terms, all from one forward pass.
Gradients symmnets_gradients(const MlpScorer& model, const Eigen::MatrixXd& x_src,
                             std::span<const std::size_t> y_src, const Eigen::MatrixXd& x_tgt,
                             double lambda, const ClassWeights& omega, SymmVariant variant,
                             SymmLosses* losses = nullptr, ClampCounter* clamps = nullptr);

void add_symm_heads(MlpScorer& model, std::size_t k);

/// Gives f_s and f_t K_shared + 1 outputs; the last one stands for the
/// aggregated source-only classes.
void openset_adapt(MlpScorer& model, std::size_t k_shared, std::size_t dataset_classes);

/// Labels at or beyond k_shared collapse onto the aggregated class k_shared.
std::size_t openset_label(std::size_t y, std::size_t k_shared);

/// Source batches where the aggregated class is drawn nu times as often as
/// each shared class: P(aggregated) = nu / (K_shared + nu).
class OpenSetSampler {
 public:
  OpenSetSampler(std::span<const std::size_t> labels, std::size_t k_shared, double nu,
                 std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next_batch();
  double aggregated_probability() const noexcept { return p_aggregated_; }

 private:
  std::vector<std::vector<std::size_t>> by_class_;  // k_shared + 1 buckets
  std::size_t batch_size_;
  double p_aggregated_;
  std::mt19937_64 rng_;
};

struct OpenSetScores {
  double os = 0.0;
  double os_star = 0.0;
  double unknown_acc = 0.0;
  std::vector<double> per_class;       ///< NaN where the class is absent
  std::vector<std::size_t> absent;     ///< classes excluded from the means
};

OpenSetScores eval_openset(std::span<const std::size_t> predictions,
                           std::span<const std::size_t> labels, std::size_t k_shared);

/// Losses of this module as flat functions of the concatenated scores, for
/// finite-difference audits. Inputs are laid out [zs (K) | zt (K)] per point;
/// discrim takes a source point and a target point, [src (2K) | tgt (2K)].
std::vector<AuditedLoss> symmnets_losses(std::size_t k);

}  // namespace mcsd
