#pragma once

// Trainers for source-only, McDalNets (five surrogates) and SymmNets-V2 with
// its ablations, all on a DomainPair, with per-epoch JSONL metrics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcsd/config.hpp"
#include "mcsd/neural.hpp"
#include "mcsd/surrogates.hpp"
#include "mcsd/symmnets.hpp"
#include "mcsd/synthdata.hpp"

namespace mcsd {

inline const std::string kTaskHead = "f";
inline const std::string kAuxFirst = "f1";
inline const std::string kAuxSecond = "f2";
inline const std::string kDomainHead = "d";

struct RunResult {
  Method method = Method::source_only;
  std::uint64_t seed = 0;
  std::string status = "ok";  ///< "ok" or "did_not_converge"
  std::string reason;
  std::size_t epochs_run = 0;
  double source_acc = 0.0;
  double target_acc = 0.0;  ///< from the evaluation head
  std::optional<double> target_acc_fs;
  std::optional<double> target_acc_ft;
  std::optional<OpenSetScores> openset;
  std::vector<double> omega;  ///< final class weights (SymmNets only)
  std::vector<nlohmann::json> records;

  bool converged() const { return status == "ok"; }
  nlohmann::json to_json() const;  ///< summary without the per-epoch records
};

/// Dispatches on cfg.method; the dataset is built from cfg for this seed.
RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);
RunResult run_experiment(const ExperimentConfig& cfg, const DomainPair& data, std::uint64_t seed);

RunResult run_source_only(const ExperimentConfig& cfg, const DomainPair& data, std::uint64_t seed);
RunResult run_mcdalnet(const ExperimentConfig& cfg, const DomainPair& data, std::uint64_t seed);
RunResult run_symmnets(const ExperimentConfig& cfg, const DomainPair& data, std::uint64_t seed);

Surrogate surrogate_of(Method m);

/// Values of one McDalNets objective evaluation.
struct McdalLosses {
  double task = 0.0;
  double aux = 0.0;
  double src_term = 0.0;  ///< surrogate disagreement on the source batch
  double tgt_term = 0.0;  ///< surrogate disagreement on the target batch
  double divergence() const { return tgt_term - src_term; }
};

/// Gradients of one gradient-reversal step. The task head and psi descend the
/// source log-loss; the disagreement heads ascend D = tgt_term - src_term
/// while psi descends zeta * D; the auxiliary heads also descend
/// aux_weight times their own source log-loss (heads only).
Gradients mcdal_gradients(const MlpScorer& model, Surrogate surrogate, const Eigen::MatrixXd& x_src,
                          std::span<const std::size_t> y_src, const Eigen::MatrixXd& x_tgt,
                          double zeta, bool zeta_scales_heads, double aux_weight,
                          McdalLosses* losses = nullptr, ClampCounter* clamps = nullptr);

/// Adds f (and f1/f2, or d for the domain-classifier surrogate) to the model.
void add_mcdal_heads(MlpScorer& model, Surrogate surrogate, std::size_t k);

/// Argmax per row, lowest index on ties.
std::vector<std::size_t> predict(const Eigen::MatrixXd& scores);
double accuracy(std::span<const std::size_t> predictions, std::span<const Label> labels);

/// Resolves a "lambda" or numeric trade-off policy at the current lambda.
double resolve_policy(const std::string& policy, double lambda);

}  // namespace mcsd
