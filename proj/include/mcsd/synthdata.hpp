#pragma once

// Synthetic source/target pairs (rotated moons, shifted Gaussian blobs), the
// partial and open-set label-space transforms, and CSV persistence.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcsd/divergence.hpp"

namespace mcsd {

enum class Mode { closed, partial, openset };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& name);

struct DomainMeta {
  std::string generator;
  std::uint64_t seed = 0;
  std::size_t classes = 0;   ///< outputs a classifier needs (K, or K_shared + 1 in open-set mode)
  std::size_t k_shared = 0;  ///< equals `classes` outside open-set mode
  nlohmann::json params = nlohmann::json::object();
};

class DomainPair;

namespace eval {
/// Target labels, for evaluation code only.
const std::vector<Label>& hidden_labels(const DomainPair& pair);
/// Target points with their evaluation labels attached.
SampleSet labeled_target(const DomainPair& pair);
}  // namespace eval

/// Labeled source sample plus a target sample whose labels are hidden from
/// training code; they are reachable only through `mcsd::eval`.
class DomainPair {
 public:
  DomainPair(SampleSet source, std::vector<std::vector<double>> target_points,
             std::vector<Label> target_labels, Mode mode, DomainMeta meta);

  const SampleSet& source() const noexcept { return source_; }
  /// Unlabeled target view.
  const SampleSet& target() const noexcept { return target_; }
  Mode mode() const noexcept { return mode_; }
  const DomainMeta& meta() const noexcept { return meta_; }

  std::vector<std::size_t> source_labels() const;

 private:
  friend const std::vector<Label>& eval::hidden_labels(const DomainPair&);
  friend SampleSet eval::labeled_target(const DomainPair&);

  SampleSet source_;
  SampleSet target_;
  std::vector<Label> target_labels_;
  Mode mode_;
  DomainMeta meta_;
};

/// Two interleaved half-moons; the target is the same distribution rotated
/// by `angle_deg` about the centre of the pair.
DomainPair gen_rotated_moons(std::size_t n_src, std::size_t n_tgt, double angle_deg,
                             double noise_sd, std::uint64_t seed);

/// K isotropic unit-variance Gaussians with means on a circle of radius 4;
/// target means are translated by `shift`. Dimension = shift.size() >= 2.
DomainPair gen_gauss_blobs(std::size_t k, std::size_t n_per_class, const std::vector<double>& shift,
                           std::uint64_t seed);

/// Keeps only `kept` classes (0-based) in the target.
DomainPair make_partial(const DomainPair& pair, const std::vector<std::size_t>& kept);

/// Shared classes are renumbered 0..K_shared-1 in the given order; source and
/// target extras both become class K_shared.
DomainPair make_openset(const DomainPair& pair, const std::vector<std::size_t>& shared,
                        const std::vector<std::size_t>& src_extra,
                        const std::vector<std::size_t>& tgt_extra);

/// Writes `path` and the sidecar manifest `path + ".json"`.
void write_csv(const DomainPair& pair, const std::string& path);
DomainPair read_csv(const std::string& path);

}  // namespace mcsd
