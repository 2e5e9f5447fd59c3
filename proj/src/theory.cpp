#include "mcsd/theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mcsd {

namespace {

using Clock = std::chrono::steady_clock;

nlohmann::json scores_json(const ScoreVector& f) {
  return std::vector<double>(f.values().begin(), f.values().end());
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double random_rho(std::mt19937_64& rng) {
  // log-uniform over [0.1, 10]
  return std::exp(std::uniform_real_distribution<double>(std::log(0.1), std::log(10.0))(rng));
}

Label random_label(std::mt19937_64& rng, std::size_t k) {
  return Label(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
}

/// Records a violation of `lhs <= rhs` (with tolerance) into `r`.
void expect_le(CheckResult& r, double lhs, double rhs, double tol, const nlohmann::json& input) {
  ++r.trials;
  const double gap = lhs - rhs;
  if (gap > tol) {
    ++r.violations;
    if (r.witness.is_null()) r.witness = input;
    r.worst = std::max(r.worst, gap);
  }
}

CheckResult named(std::string name) {
  CheckResult r;
  r.name = std::move(name);
  return r;
}

void finish(CheckResult& r, Clock::time_point t0) {
  r.passed = r.violations == 0;
  r.seconds = seconds_since(t0);
}

/// Violation-matrix L1 distance evaluated with an arbitrary ramp.
double matrix_l1(const ScoreVector& a, const ScoreVector& b, RampParam rho, const RampFn& ramp) {
  const std::size_t k = a.size();
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      const double ma = i == j ? a[i] : -a[i];
      const double mb = i == j ? b[i] : -b[i];
      s += std::abs(ramp(ma, rho) - ramp(mb, rho));
    }
  }
  return s;
}

}  // namespace

nlohmann::json CheckResult::to_json() const {
  return {{"check", name},     {"passed", passed}, {"trials", trials}, {"violations", violations},
          {"worst", worst},    {"witness", witness}, {"details", details}, {"seconds", seconds}};
}

bool TheoryReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json TheoryReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) arr.push_back(c.to_json());
  return {{"passed", all_passed()}, {"checks", arr}};
}

ScoreVector random_scores(std::mt19937_64& rng, std::size_t k, double rho) {
  std::vector<double> v(k);
  const int mode = std::uniform_int_distribution<int>(0, 3)(rng);
  if (mode == 3) {
    // Half-rho lattice: hits both ramp kinks and exact argmax ties.
    std::uniform_int_distribution<int> step(-4, 4);
    for (double& x : v) x = 0.5 * rho * step(rng);
  } else {
    const double scale[] = {rho, 5.0 * rho, 0.1 * rho};
    std::normal_distribution<double> n(0.0, scale[mode]);
    for (double& x : v) x = n(rng);
  }
  return ScoreVector(std::move(v));
}

CheckResult check_ramp_properties(std::uint64_t seed, std::size_t draws) {
  const auto t0 = Clock::now();
  CheckResult r = named("ramp_monotone_lipschitz");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 3.0);
  for (std::size_t t = 0; t < draws; ++t) {
    const RampParam rho(random_rho(rng));
    double a = n(rng), b = n(rng);
    if (a > b) std::swap(a, b);
    const double ra = ramp_loss(a, rho), rb = ramp_loss(b, rho);
    const nlohmann::json in{{"a", a}, {"b", b}, {"rho", rho.value()}};
    expect_le(r, rb, ra, 0.0, in);                                      // non-increasing
    expect_le(r, std::abs(ra - rb), (b - a) / rho.value(), 1e-12, in);  // 1/rho-Lipschitz
    expect_le(r, std::max(ra, rb), 1.0, 0.0, in);
    expect_le(r, 0.0, std::min(ra, rb), 0.0, in);
  }
  finish(r, t0);
  return r;
}

CheckResult check_decomposition_identity(std::uint64_t seed, std::size_t pairs_per_case,
                                 const RampFn& matrix_ramp) {
  const auto t0 = Clock::now();
  CheckResult r = named(matrix_ramp ? "decomposition_identity_injected_ramp" : "decomposition_identity");
  std::mt19937_64 rng(seed);
  for (std::size_t k : {2u, 3u, 5u, 10u}) {
    for (double rv : {0.5, 1.0, 5.0}) {
      const RampParam rho(rv);
      for (std::size_t t = 0; t < pairs_per_case; ++t) {
        const ScoreVector a = random_scores(rng, k, rv), b = random_scores(rng, k, rv);
        const double lhs = matrix_ramp ? matrix_l1(a, b, rho, matrix_ramp)
                                       : static_cast<double>(k) * mcsd_pointwise(a, b, rho);
        double rhs = 0.0;
        for (std::size_t i = 0; i < k; ++i) rhs += phi_distance(a[i], b[i], rho, k);
        const nlohmann::json in{{"f1", scores_json(a)}, {"f2", scores_json(b)}, {"rho", rv}};
        expect_le(r, std::abs(lhs - rhs), 0.0, 1e-12, in);
      }
    }
  }
  r.details = {{"cases", "K in {2,3,5,10} x rho in {0.5,1,5}"}, {"pairs_per_case", pairs_per_case}};
  finish(r, t0);
  return r;
}

CheckResult check_error_bound_pointwise(std::uint64_t seed, std::size_t draws) {
  const auto t0 = Clock::now();
  CheckResult r = named("error_bound_pointwise");
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const double rv = random_rho(rng);
    const RampParam rho(rv);
    const ScoreVector f = random_scores(rng, k, rv), g = random_scores(rng, k, rv);
    const Label y = random_label(rng, k);
    expect_le(r, zero_one_loss(f, y), source_margin_loss(g, y, rho) + mcsd_pointwise(f, g, rho), 1e-12,
              {{"f", scores_json(f)}, {"f_prime", scores_json(g)}, {"y", y.index()}, {"rho", rv}});
  }
  finish(r, t0);
  return r;
}

CheckResult check_disagreement_bound_pointwise(std::uint64_t seed, std::size_t draws) {
  const auto t0 = Clock::now();
  CheckResult r = named("disagreement_bound_pointwise");
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const double rv = random_rho(rng);
    const RampParam rho(rv);
    const ScoreVector f = random_scores(rng, k, rv), g = random_scores(rng, k, rv);
    const Label y = random_label(rng, k);
    expect_le(r, mcsd_pointwise(f, g, rho), source_margin_loss(f, y, rho) + source_margin_loss(g, y, rho),
              1e-12, {{"f", scores_json(f)}, {"f_prime", scores_json(g)}, {"y", y.index()}, {"rho", rv}});
  }
  finish(r, t0);
  return r;
}

CheckResult check_scalar_variant_bounds(std::uint64_t seed, std::size_t draws) {
  const auto t0 = Clock::now();
  CheckResult r = named("scalar_variant_bounds_pointwise");
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const double rv = random_rho(rng);
    const RampParam rho(rv);
    const ScoreVector f = random_scores(rng, k, rv), g = random_scores(rng, k, rv);
    const Label y = random_label(rng, k);
    const nlohmann::json in{{"f", scores_json(f)}, {"f_prime", scores_json(g)}, {"y", y.index()}, {"rho", rv}};
    const double lf = source_margin_loss(f, y, rho), lg = source_margin_loss(g, y, rho);
    const double tilde = mcsd_tilde_pointwise(f, g, rho), hat = mcsd_hat_pointwise(f, g, rho);
    expect_le(r, zero_one_loss(f, y), lg + tilde, 1e-12, in);
    expect_le(r, tilde, lf + lg, 1e-12, in);
    expect_le(r, zero_one_loss(f, y), lg + hat, 1e-12, in);
    expect_le(r, hat, lf + lg, 1e-12, in);
  }
  finish(r, t0);
  return r;
}

CheckResult check_margin_sign_property(std::uint64_t seed, std::size_t draws) {
  const auto t0 = Clock::now();
  CheckResult r = named("margin_sign_implies_label");
  std::mt19937_64 rng(seed);
  std::size_t premise = 0;
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const Label y = random_label(rng, k);
    // Bias half the draws towards the premise: f_y large, the rest spread.
    const ScoreVector base = random_scores(rng, k, 1.0);
    std::vector<double> raw(base.values().begin(), base.values().end());
    if (t % 2 == 0) raw[y.index()] += std::abs(raw[y.index()]) + 1.0;
    const ScoreVector f(std::move(raw));
    const std::vector<double> mu = absolute_margin(f, y);
    const bool nonneg = std::all_of(mu.begin(), mu.end(), [](double m) { return m >= 0.0; });
    const bool positive = std::any_of(mu.begin(), mu.end(), [](double m) { return m > 0.0; });
    if (!(nonneg && positive)) continue;
    ++premise;
    expect_le(r, f.argmax() == y.index() ? 0.0 : 1.0, 0.0, 0.0, {{"f", scores_json(f)}, {"y", y.index()}});
  }
  r.details = {{"draws", draws}, {"premise_hits", premise}};
  finish(r, t0);
  if (premise == 0) r.passed = false;
  return r;
}

CheckResult check_mcsd_metric(std::uint64_t seed, std::size_t draws) {
  const auto t0 = Clock::now();
  CheckResult r = named("mcsd_symmetric_triangle");
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const double rv = random_rho(rng);
    const RampParam rho(rv);
    const ScoreVector a = random_scores(rng, k, rv), b = random_scores(rng, k, rv),
                      c = random_scores(rng, k, rv);
    const nlohmann::json in{{"f1", scores_json(a)}, {"f2", scores_json(b)}, {"f3", scores_json(c)}, {"rho", rv}};
    const double ab = mcsd_pointwise(a, b, rho), bc = mcsd_pointwise(b, c, rho), ac = mcsd_pointwise(a, c, rho);
    expect_le(r, ac, ab + bc, 1e-12, in);
    expect_le(r, std::abs(ab - mcsd_pointwise(b, a, rho)), 0.0, 1e-15, in);
    expect_le(r, 0.0, ab, 0.0, in);
    expect_le(r, mcsd_pointwise(a, a, rho), 0.0, 0.0, in);
  }
  finish(r, t0);
  return r;
}

CheckResult check_hat_implies_tilde(std::uint64_t seed, std::size_t draws) {
  const auto t0 = Clock::now();
  CheckResult r = named("hat_indicator_implies_tilde");
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const double rv = random_rho(rng);
    const RampParam rho(rv);
    const ScoreVector a = random_scores(rng, k, rv), b = random_scores(rng, k, rv);
    const nlohmann::json in{{"f1", scores_json(a)}, {"f2", scores_json(b)}, {"rho", rv}};
    const double hat = mcsd_hat_pointwise(a, b, rho);
    expect_le(r, (hat == 0.0 || hat == 1.0) ? 0.0 : 1.0, 0.0, 0.0, in);
    if (hat == 1.0) expect_le(r, 1.0, mcsd_tilde_pointwise(a, b, rho), 0.0, in);
  }
  finish(r, t0);
  return r;
}

nlohmann::json ToyUniverse::to_json() const {
  nlohmann::json src = nlohmann::json::array(), tgt = nlohmann::json::array();
  for (std::size_t i = 0; i < source.size(); ++i) {
    src.push_back({{"mass", source.mass(i)}, {"label", source.label(i).index()}});
    tgt.push_back({{"mass", target.mass(i)}, {"label", target.label(i).index()}});
  }
  nlohmann::json grid_json = nlohmann::json::array();
  for (const auto& row : table) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& s : row) r.push_back(scores_json(s));
    grid_json.push_back(r);
  }
  return {{"rho", rho}, {"source", src}, {"target", tgt}, {"grid", grid_json}};
}

ToyUniverse random_universe(std::mt19937_64& rng, std::size_t points, std::size_t k,
                            std::size_t grid_size) {
  if (points == 0 || grid_size == 0 || k < 2) throw std::invalid_argument("degenerate universe");
  const double rho = std::uniform_real_distribution<double>(0.25, 4.0)(rng);
  std::vector<std::vector<double>> xs;
  std::vector<Label> ys, yt;
  std::vector<double> ms, mt;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < points; ++i) {
    xs.push_back({static_cast<double>(i)});
    ys.push_back(random_label(rng, k));
    // Labels mostly shared across domains, with occasional conditional shift.
    yt.push_back(u(rng) < 0.9 ? ys.back() : random_label(rng, k));
    ms.push_back(u(rng) < 0.15 ? 0.0 : u(rng));
    mt.push_back(u(rng) < 0.15 ? 0.0 : u(rng));
  }
  if (*std::max_element(ms.begin(), ms.end()) == 0.0) ms[0] = 1.0;
  if (*std::max_element(mt.begin(), mt.end()) == 0.0) mt[0] = 1.0;

  std::vector<std::vector<ScoreVector>> table;
  for (std::size_t c = 0; c < grid_size; ++c) {
    std::vector<ScoreVector> row;
    const double skill = u(rng);  // chance that this scorer favors the source label
    for (std::size_t i = 0; i < points; ++i) {
      const ScoreVector base = random_scores(rng, k, rho);
      std::vector<double> raw(base.values().begin(), base.values().end());
      if (u(rng) < skill) raw[ys[i].index()] += std::uniform_real_distribution<double>(0.0, 6.0 * rho)(rng);
      row.emplace_back(std::move(raw));
    }
    table.push_back(std::move(row));
  }
  ScorerGrid grid = ScorerGrid::from_table(table);
  return ToyUniverse{SampleSet(xs, ys, ms), SampleSet(xs, yt, mt), std::move(table), std::move(grid), rho};
}

double joint_margin_lambda(const ToyUniverse& u, std::size_t* minimizer) {
  const RampParam rho(u.rho);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < u.grid.size(); ++g) {
    const double joint = margin_error(u.source, u.grid[g], rho) + margin_error(u.target, u.grid[g], rho);
    if (joint < best) {
      best = joint;
      if (minimizer) *minimizer = g;
    }
  }
  return best;
}

BoundTerms target_bound(const ToyUniverse& u, Disagreement kind, std::size_t scorer) {
  const RampParam rho(u.rho);
  BoundTerms b;
  b.target_err = zero_one_error(u.target, u.grid[scorer]);
  b.source_margin_err = margin_error(u.source, u.grid[scorer], rho);
  b.divergence = divergence_exact(kind, u.source, u.target, u.grid, rho).value;
  b.lambda = joint_margin_lambda(u);
  return b;
}

CheckResult check_target_bound(std::uint64_t seed, std::size_t universes, Disagreement kind) {
  const auto t0 = Clock::now();
  const char* names[] = {"target_bound_mcsd", "target_bound_tilde", "target_bound_hat"};
  CheckResult r = named(names[static_cast<int>(kind)]);
  std::mt19937_64 rng(seed);
  double slack_min = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < universes; ++t) {
    const std::size_t points = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const std::size_t grid_size = std::uniform_int_distribution<std::size_t>(2, 30)(rng);
    const ToyUniverse u = random_universe(rng, points, 3, grid_size);
    const RampParam rho(u.rho);
    // Terms shared by every scorer.
    const double d = divergence_exact(kind, u.source, u.target, u.grid, rho).value;
    const double lambda = joint_margin_lambda(u);
    for (std::size_t f = 0; f < u.grid.size(); ++f) {
      const double lhs = zero_one_error(u.target, u.grid[f]);
      const double rhs = margin_error(u.source, u.grid[f], rho) + d + lambda;
      slack_min = std::min(slack_min, rhs - lhs);
      expect_le(r, lhs, rhs, 1e-12, {{"scorer", f}, {"universe", u.to_json()}});
    }
  }
  r.details = {{"universes", universes}, {"min_slack", slack_min}};
  finish(r, t0);
  return r;
}

CheckResult check_divergence_triangle(std::uint64_t seed, std::size_t universes) {
  const auto t0 = Clock::now();
  CheckResult r = named("divergence_triangle");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t t = 0; t < universes; ++t) {
    const std::size_t points = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const ToyUniverse u = random_universe(rng, points, 3, 12);
    std::vector<double> mb(points);
    for (double& m : mb) m = u01(rng);
    const SampleSet mid(u.source.points(), std::nullopt, mb);
    const RampParam rho(u.rho);
    const double ac = mcsd_divergence_exact(u.source, u.target, u.grid, rho).value;
    const double ab = mcsd_divergence_exact(u.source, mid, u.grid, rho).value;
    const double bc = mcsd_divergence_exact(mid, u.target, u.grid, rho).value;
    expect_le(r, ac, ab + bc, 1e-12, {{"universe", u.to_json()}, {"middle_masses", mb}});
  }
  finish(r, t0);
  return r;
}

CheckResult check_divergence_asymmetry() {
  const auto t0 = Clock::now();
  CheckResult r = named("divergence_asymmetry_example");
  // Two scorers that agree on point 0 and disagree on point 1; P sits on 0, Q on 1.
  const ScoreVector agree{4.0, -2.0, -2.0};
  std::vector<std::vector<ScoreVector>> table{{agree, agree}, {agree, ScoreVector{-2.0, 4.0, -2.0}}};
  const ScorerGrid grid = ScorerGrid::from_table(table);
  const std::vector<std::vector<double>> pts{{0.0}, {1.0}};
  const SampleSet p(pts, std::nullopt, std::vector<double>{1.0, 0.0});
  const SampleSet q(pts, std::nullopt, std::vector<double>{0.0, 1.0});
  const RampParam rho(1.0);
  const double pq = mcsd_divergence_exact(p, q, grid, rho).value;
  const double qp = mcsd_divergence_exact(q, p, grid, rho).value;
  r.trials = 1;
  r.details = {{"d_PQ", pq}, {"d_QP", qp}};
  if (!(pq != qp)) {
    r.violations = 1;
    r.witness = r.details;
  }
  finish(r, t0);
  return r;
}

CheckResult check_pac_report(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = named("pac_bound_report");
  std::mt19937_64 rng(seed);
  const ToyUniverse u = random_universe(rng, 8, 3, 20);
  // Equal masses: the report is about empirical samples.
  const SampleSet src(u.source.points(), std::vector<Label>([&] {
                        std::vector<Label> l;
                        for (std::size_t i = 0; i < u.source.size(); ++i) l.push_back(u.source.label(i));
                        return l;
                      }()));
  const SampleSet tgt(u.target.points(), std::vector<Label>([&] {
                        std::vector<Label> l;
                        for (std::size_t i = 0; i < u.target.size(); ++i) l.push_back(u.target.label(i));
                        return l;
                      }()));
  nlohmann::json reports = nlohmann::json::array();
  for (std::size_t f = 0; f < u.grid.size(); ++f) {
    const PacReport rep = pac_bound_report(src, tgt, u.grid, RampParam(u.rho), f, {0.05, 0, seed});
    expect_le(r, rep.lhs_target_err, rep.rhs, 1e-12, rep.to_json());
    if (f == 0) reports.push_back(rep.to_json());
  }
  r.details = {{"example", reports}, {"note", "Rademacher terms by exact sign enumeration"}};
  finish(r, t0);
  return r;
}

CheckResult log_bound_tightness(std::uint64_t seed, std::size_t universes) {
  const auto t0 = Clock::now();
  CheckResult r = named("bound_tightness_log");
  std::mt19937_64 rng(seed);
  nlohmann::json rows = nlohmann::json::array();
  std::size_t tightest[3] = {0, 0, 0};
  for (std::size_t t = 0; t < universes; ++t) {
    const std::size_t points = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const ToyUniverse u = random_universe(rng, points, 3, 20);
    const RampParam rho(u.rho);
    double d[3];
    for (int kind = 0; kind < 3; ++kind) {
      d[kind] = divergence_exact(static_cast<Disagreement>(kind), u.source, u.target, u.grid, rho).value;
    }
    // The other right-hand-side terms are shared, so the divergences rank the bounds.
    ++tightest[std::min_element(d, d + 3) - d];
    const double shared = margin_error(u.source, u.grid[0], rho) + joint_margin_lambda(u);
    rows.push_back({{"rhs_mcsd", shared + d[0]}, {"rhs_tilde", shared + d[1]}, {"rhs_hat", shared + d[2]}});
  }
  r.trials = universes;
  r.details = {{"per_universe_scorer0", rows},
               {"tightest_counts", {{"mcsd", tightest[0]}, {"tilde", tightest[1]}, {"hat", tightest[2]}}}};
  finish(r, t0);
  return r;
}

TheoryReport run_theory_checks(std::uint64_t seed, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("trials must be at least 1");
  const std::size_t universes = std::max<std::size_t>(20, trials / 500);
  TheoryReport rep;
  rep.checks.push_back(check_ramp_properties(seed, trials));
  rep.checks.push_back(check_decomposition_identity(seed + 1, trials));
  rep.checks.push_back(check_error_bound_pointwise(seed + 2, 10 * trials));
  rep.checks.push_back(check_disagreement_bound_pointwise(seed + 3, 10 * trials));
  rep.checks.push_back(check_scalar_variant_bounds(seed + 4, 10 * trials));
  rep.checks.push_back(check_margin_sign_property(seed + 5, trials));
  rep.checks.push_back(check_mcsd_metric(seed + 6, trials));
  rep.checks.push_back(check_hat_implies_tilde(seed + 7, trials));
  rep.checks.push_back(check_target_bound(seed + 8, universes, Disagreement::mcsd));
  rep.checks.push_back(check_target_bound(seed + 9, universes, Disagreement::tilde));
  rep.checks.push_back(check_target_bound(seed + 10, universes, Disagreement::hat));
  rep.checks.push_back(check_divergence_triangle(seed + 11, universes));
  rep.checks.push_back(check_divergence_asymmetry());
  rep.checks.push_back(check_pac_report(seed + 12));
  rep.checks.push_back(log_bound_tightness(seed + 13, universes));
  return rep;
}

}  // namespace mcsd
