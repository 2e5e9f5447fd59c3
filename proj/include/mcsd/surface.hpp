#pragma once

// Disagreement surfaces for K = 3: one scorer is held fixed and the other
// sweeps f = [a, b, -a-b] over a square grid.

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "mcsd/margin.hpp"

namespace mcsd {

enum class SurfaceKind { mcsd, tilde, hat, l1, kl, ce, md };
std::string to_string(SurfaceKind k);
SurfaceKind surface_kind_from_string(const std::string& name);

enum class FixedSide { first, second };

struct SurfaceNode {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
};

/// Disagreement of the given kind between f1 and f2.
double surface_value(SurfaceKind kind, const ScoreVector& f1, const ScoreVector& f2, RampParam rho);

/// resolution x resolution nodes over [-extent, extent]^2, row-major in a then b.
/// Throws std::invalid_argument unless `fixed` has exactly 3 classes.
std::vector<SurfaceNode> emit_surface_grid(const ScoreVector& fixed, RampParam rho, SurfaceKind kind,
                                           std::size_t resolution, FixedSide side,
                                           double extent = 15.0);

/// CSV with header a,b,value.
void write_surface_csv(std::ostream& out, const std::vector<SurfaceNode>& nodes);

}  // namespace mcsd
