#pragma once

// Experiment configuration: dataset recipe, method, schedules and trade-offs.
// Loaded from JSON; every field has a default so partial documents work.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcsd/neural.hpp"
#include "mcsd/synthdata.hpp"

namespace mcsd {

enum class Method {
  source_only,
  mcdal_l1,
  mcdal_kl,
  mcdal_ce,
  mcdal_mdd_variant,
  mcdal_dann,
  symmnets_v2,
  symmnets_v2_no_Lt,
  symmnets_v2_no_adv,
};

std::string to_string(Method m);
Method method_from_string(const std::string& name);
const std::vector<Method>& all_methods();
bool is_mcdal(Method m);
bool is_symmnets(Method m);

struct DatasetSpec {
  std::string generator = "rotated_moons";  ///< rotated_moons | gauss_blobs | csv
  std::string path;                         ///< csv only
  std::size_t n_src = 200;
  std::size_t n_tgt = 200;
  double angle_deg = 30.0;
  double noise_sd = 0.1;
  std::size_t classes = 3;
  std::size_t n_per_class = 50;
  std::vector<double> shift = {2.0, 2.0};
  /// Fixed data seed; when absent the run seed is used, so each seed sees fresh data.
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> kept;       ///< partial mode: target classes kept
  std::vector<std::size_t> shared;     ///< open-set mode
  std::vector<std::size_t> src_extra;  ///< open-set mode
  std::vector<std::size_t> tgt_extra;  ///< open-set mode
};

struct ExperimentConfig {
  DatasetSpec dataset;
  Method method = Method::symmnets_v2;
  Mode mode = Mode::closed;

  double rho = 1.0;
  Schedules schedules;
  double head_lr_multiplier = 10.0;

  /// "lambda" couples zeta to the lambda schedule; otherwise a number in [0, 1].
  std::string zeta_policy = "lambda";
  /// "psi" scales only the reversed gradient into the extractor; "both" also
  /// scales the heads' ascent.
  std::string zeta_scope = "psi";
  std::string xi_policy = "lambda";
  double aux_weight = 1.0;
  bool partial_weighting = true;

  /// Head used for reported accuracy in the two-head methods: "ft" or "fs".
  std::string eval_head = "ft";

  double nu = 6.0;
  std::size_t k_shared = 0;

  std::size_t epochs = 300;
  std::size_t steps_per_epoch = 1;
  std::size_t batch_size = 64;
  std::size_t full_batch_limit = 512;
  std::vector<std::size_t> widths = {32, 32, 16};

  /// Abort with "did not converge" if target accuracy stays below
  /// factor * chance after half the epochs.
  double dnc_chance_factor = 1.5;

  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

nlohmann::json read_json_file(const std::string& path);

/// Overlays the keys of `patch` on `base` (nested objects merge).
ExperimentConfig apply_overrides(const ExperimentConfig& base, const nlohmann::json& patch);

/// Calibrated toy settings: "moons" (closed, 30 degree rotation),
/// "partial_blobs" (5 blobs, target keeps 3) and "openset_blobs" (6 blobs,
/// 3 shared, 2 source-only, 1 target-only).
ExperimentConfig preset_config(const std::string& name);
const std::vector<std::string>& preset_names();

/// Builds the dataset described by the config for one seed.
DomainPair build_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace mcsd
