#include <sstream>

#include "doctest.h"
#include "mcsd/errors.hpp"
#include "mcsd/surface.hpp"

using namespace mcsd;

TEST_SUITE("surface") {

TEST_CASE("grid layout") {
  const ScoreVector fixed{4.0, -2.0, -2.0};
  const auto nodes = emit_surface_grid(fixed, RampParam(1.0), SurfaceKind::mcsd, 5, FixedSide::first, 10.0);
  REQUIRE(nodes.size() == 25);
  CHECK(nodes.front().a == -10.0);
  CHECK(nodes.front().b == -10.0);
  CHECK(nodes[1].a == -10.0);
  CHECK(nodes[1].b == -5.0);
  CHECK(nodes.back().a == 10.0);
  CHECK(nodes.back().b == 10.0);
  for (const auto& n : nodes) CHECK(n.value >= 0.0);
}

TEST_CASE("values vanish where the moving scorer equals the fixed one") {
  const ScoreVector fixed{5.0, -5.0, 0.0};
  for (SurfaceKind k : {SurfaceKind::mcsd, SurfaceKind::tilde, SurfaceKind::hat, SurfaceKind::l1,
                        SurfaceKind::kl, SurfaceKind::ce, SurfaceKind::md}) {
    // resolution 3 over [-5, 5] puts a node at (5, -5)
    const auto nodes = emit_surface_grid(fixed, RampParam(1.0), k, 3, FixedSide::second, 5.0);
    const auto& at = nodes[2 * 3 + 0];
    REQUIRE(at.a == 5.0);
    REQUIRE(at.b == -5.0);
    INFO(to_string(k));
    if (k == SurfaceKind::ce) {
      CHECK(at.value == doctest::Approx(surface_value(k, fixed, fixed, RampParam(1.0))));
    } else {
      CHECK(at.value == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("fixed side matters only for asymmetric kinds") {
  const ScoreVector fixed{1.0, 0.5, -1.5};
  const auto a = emit_surface_grid(fixed, RampParam(1.0), SurfaceKind::mcsd, 7, FixedSide::first);
  const auto b = emit_surface_grid(fixed, RampParam(1.0), SurfaceKind::mcsd, 7, FixedSide::second);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value == doctest::Approx(b[i].value).epsilon(1e-14));
}

TEST_CASE("csv and errors") {
  const auto nodes = emit_surface_grid(ScoreVector{1.0, 0.0, -1.0}, RampParam(1.0), SurfaceKind::l1, 2,
                                       FixedSide::first, 1.0);
  std::ostringstream out;
  write_surface_csv(out, nodes);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "a,b,value");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
  CHECK_THROWS(emit_surface_grid(ScoreVector{1.0, -1.0}, RampParam(1.0), SurfaceKind::mcsd, 5, FixedSide::first));
  CHECK_THROWS(emit_surface_grid(ScoreVector{1.0, 0.0, -1.0}, RampParam(1.0), SurfaceKind::mcsd, 1, FixedSide::first));
  CHECK_THROWS(surface_kind_from_string("bogus"));
  for (const char* n : {"mcsd", "tilde", "hat", "l1", "kl", "ce", "md"}) {
    CHECK(to_string(surface_kind_from_string(n)) == n);
  }
}

}  // TEST_SUITE
