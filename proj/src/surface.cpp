#include "mcsd/surface.hpp"

#include <cstdio>
#include <stdexcept>

#include "mcsd/surrogates.hpp"

namespace mcsd {

namespace {

constexpr const char* kNames[] = {"mcsd", "tilde", "hat", "l1", "kl", "ce", "md"};

}  // namespace

std::string to_string(SurfaceKind k) { return kNames[static_cast<int>(k)]; }

SurfaceKind surface_kind_from_string(const std::string& name) {
  for (int i = 0; i < 7; ++i) {
    if (name == kNames[i]) return static_cast<SurfaceKind>(i);
  }
  throw std::invalid_argument("unknown surface '" + name + "'");
}

double surface_value(SurfaceKind kind, const ScoreVector& f1, const ScoreVector& f2, RampParam rho) {
  switch (kind) {
    case SurfaceKind::mcsd: return mcsd_pointwise(f1, f2, rho);
    case SurfaceKind::tilde: return mcsd_tilde_pointwise(f1, f2, rho);
    case SurfaceKind::hat: return mcsd_hat_pointwise(f1, f2, rho);
    case SurfaceKind::l1: return sur_l1(softmax(f1), softmax(f2));
    case SurfaceKind::kl: return sur_kl(softmax(f1), softmax(f2));
    case SurfaceKind::ce: return sur_ce(softmax(f1), softmax(f2));
    case SurfaceKind::md: return margin_disparity_pointwise(f1, f2, rho);
  }
  throw std::invalid_argument("unknown surface kind");
}

std::vector<SurfaceNode> emit_surface_grid(const ScoreVector& fixed, RampParam rho, SurfaceKind kind,
                                           std::size_t resolution, FixedSide side, double extent) {
  if (fixed.size() != 3) throw std::invalid_argument("surfaces are defined for K = 3 only");
  if (resolution < 2) throw std::invalid_argument("resolution must be at least 2");
  if (!(extent > 0.0)) throw std::invalid_argument("extent must be positive");
  std::vector<SurfaceNode> out;
  out.reserve(resolution * resolution);
  const double step = 2.0 * extent / static_cast<double>(resolution - 1);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double a = -extent + step * static_cast<double>(i);
    for (std::size_t j = 0; j < resolution; ++j) {
      const double b = -extent + step * static_cast<double>(j);
      const ScoreVector moving{a, b, -a - b};
      const double v = side == FixedSide::first ? surface_value(kind, fixed, moving, rho)
                                                : surface_value(kind, moving, fixed, rho);
      out.push_back({a, b, v});
    }
  }
  return out;
}

void write_surface_csv(std::ostream& out, const std::vector<SurfaceNode>& nodes) {
  out << "a,b,value\n";
  char buf[96];
  for (const auto& n : nodes) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", n.a, n.b, n.value);
    out << buf;
  }
}

}  // namespace mcsd
