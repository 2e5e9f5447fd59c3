#pragma once

// Small tanh MLP feature extractor with named linear heads, hand-written
// backprop, SGD with momentum, training schedules and checkpoints.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcsd/margin.hpp"

namespace mcsd {

/// Affine map y = W x + b applied to row-major batches (one point per row).
struct Dense {
  Eigen::MatrixXd w;  ///< out x in
  Eigen::VectorXd b;  ///< out

  std::size_t in() const { return static_cast<std::size_t>(w.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(w.rows()); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(w.size() + b.size()); }
};

/// Same layout as an MlpScorer; also used for optimizer state.
struct Gradients {
  std::vector<Dense> psi;
  std::map<std::string, Dense> heads;

  void set_zero();
  Eigen::VectorXd flatten() const;
  double squared_norm() const;
};

/// Activations retained by a forward pass through psi.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> activations;  ///< [0] = input, back() = features
  const Eigen::MatrixXd& features() const { return activations.back(); }
};

/// Gradient signal entering one head: d(loss)/d(raw scores) for the batch,
/// with separate multipliers for the head's own parameters and for what
/// flows back into psi. A reversal layer is a negative `to_psi`.
struct HeadSignal {
  std::string head;
  Eigen::MatrixXd d_scores;
  double to_head = 1.0;
  double to_psi = 1.0;
};

/// Signals of one gradient-reversal step. Task signals pass through as given.
/// Each disagreement gradient dD (of a quantity the heads maximize and psi
/// minimizes) is ascended by its head and reaches psi reversed and scaled by
/// zeta. With `scale_heads` the heads' ascent is scaled by zeta as well.
std::vector<HeadSignal> reversal_signals(std::vector<HeadSignal> task,
                                         const std::vector<std::pair<std::string, Eigen::MatrixXd>>& disagreement,
                                         double zeta, bool scale_heads = false);

enum class HeadInit { uniform, zero };

class MlpScorer {
 public:
  /// `widths` lists the psi layer output sizes; the last is the feature size.
  /// An empty list makes psi the identity.
  MlpScorer(std::size_t input_dim, std::vector<std::size_t> widths, std::uint64_t seed);

  /// Default extractor: two hidden layers of 32 and a 16-wide feature layer.
  static MlpScorer standard(std::size_t input_dim, std::uint64_t seed);

  void add_head(const std::string& name, std::size_t outputs, HeadInit init = HeadInit::uniform);
  /// Re-creates an existing head with a new output count (fresh initialization).
  void resize_head(const std::string& name, std::size_t outputs);
  bool has_head(const std::string& name) const { return heads_.count(name) != 0; }
  const Dense& head(const std::string& name) const;
  Dense& head(const std::string& name);
  std::vector<std::string> head_names() const;

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t feature_dim() const noexcept;
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<Dense>& psi() const noexcept { return psi_; }
  std::vector<Dense>& psi() noexcept { return psi_; }
  std::size_t parameter_count() const;

  ForwardPass forward_features(const Eigen::MatrixXd& x) const;
  /// Raw head scores (before sum-to-zero projection), one row per point.
  Eigen::MatrixXd head_scores(const Eigen::MatrixXd& features, const std::string& head) const;

  /// Projected scores of one point.
  ScoreVector forward(std::span<const double> x, const std::string& head) const;

  Gradients zero_gradients() const;

  /// Accumulates head and psi gradients for a set of head signals.
  void backward(const ForwardPass& pass, const std::vector<HeadSignal>& signals,
                Gradients& grads) const;

  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);

  void save(const std::string& path) const;
  static MlpScorer load(const std::string& path);

 private:
  Dense make_layer(std::size_t in, std::size_t out, HeadInit init);

  std::size_t input_dim_;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;  // layers created so far, keys the per-layer RNG stream
  std::vector<Dense> psi_;
  std::map<std::string, Dense> heads_;
};

/// Converts a batch of points to a row-major Eigen matrix.
Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows);

struct Schedules {
  double eta0 = 0.01;
  double alpha = 10.0;
  double beta = 0.75;
  double gamma = 10.0;
  double momentum = 0.9;

  void validate() const;
};

/// eta_p = eta0 / (1 + alpha p)^beta
double lr_schedule(double p, const Schedules& s);
/// lambda_p = 2 / (1 + exp(-gamma p)) - 1
double lambda_schedule(double p, const Schedules& s);

/// Classic momentum: v <- m v + g; theta <- theta - lr v. Heads step at
/// `head_multiplier` times the psi learning rate.
class SgdMomentum {
 public:
  SgdMomentum(const MlpScorer& model, double momentum, double head_multiplier = 10.0);

  void step(MlpScorer& model, const Gradients& grads, double lr);
  void reset(const MlpScorer& model);
  const Gradients& velocity() const noexcept { return velocity_; }

 private:
  double momentum_;
  double head_multiplier_;
  Gradients velocity_;
};

/// Flat-vector momentum update, shape-checked.
void sgd_momentum_update(std::span<double> params, std::span<const double> grads,
                         std::span<double> velocity, double lr, double momentum);

/// Relative error ||a - b|| / max(||a||, ||b||, 1e-6).
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace mcsd
