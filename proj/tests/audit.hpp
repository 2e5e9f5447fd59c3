#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "mcsd/surrogates.hpp"
#include "support.hpp"

namespace testing {

struct AuditOutcome {
  double worst = 0.0;
  std::size_t trials = 0;
};

// Central-difference audit of a registered loss on random inputs; the label,
// when used, cycles through the classes.
inline AuditOutcome audit_loss(const mcsd::AuditedLoss& loss, std::size_t classes, std::size_t trials,
                               std::uint64_t seed, double h = 1e-5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.5);
  AuditOutcome out;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<double> z(loss.input_size);
    for (double& v : z) v = n(rng);
    const std::size_t y = t % classes;
    const auto analytic = loss.gradient(z, y);
    const auto numeric =
        central_difference([&](std::span<const double> x) { return loss.value(x, y); }, z, h);
    out.worst = std::max(out.worst, rel_error(analytic, numeric));
    ++out.trials;
  }
  return out;
}

}  // namespace testing
