#include "mcsd/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "mcsd/errors.hpp"

namespace mcsd {

SampleSet::SampleSet(std::vector<std::vector<double>> points,
                     std::optional<std::vector<Label>> labels,
                     std::optional<std::vector<double>> masses)
    : points_(std::move(points)), labels_(std::move(labels)) {
  if (points_.empty()) throw std::invalid_argument("sample set is empty");
  const std::size_t d = points_.front().size();
  if (d == 0) throw DimensionError("sample points have no coordinates");
  for (const auto& p : points_) {
    if (p.size() != d) throw DimensionError("sample points differ in dimension");
  }
  if (labels_ && labels_->size() != points_.size()) {
    throw DimensionError("label count does not match point count");
  }
  const std::size_t n = points_.size();
  if (!masses) {
    masses_.assign(n, 1.0 / static_cast<double>(n));
    return;
  }
  if (masses->size() != n) throw DimensionError("mass count does not match point count");
  const double total = pairwise_sum(*masses);
  for (double m : *masses) {
    if (!std::isfinite(m) || m < 0.0) throw std::invalid_argument("masses must be finite and >= 0");
  }
  if (!(total > 0.0)) throw std::invalid_argument("masses sum to zero");
  masses_ = std::move(*masses);
  for (double& m : masses_) m /= total;
}

Label SampleSet::label(std::size_t i) const {
  if (!labels_) throw std::logic_error("sample set carries no labels");
  return (*labels_)[i];
}

std::vector<double> LinearScorer::raw(std::span<const double> x) const {
  if (x.size() != dim) {
    throw DimensionError("linear scorer expects " + std::to_string(dim) + " features, got " +
                         std::to_string(x.size()));
  }
  std::vector<double> out(bias);
  for (std::size_t k = 0; k < classes; ++k) {
    const double* row = weights.data() + k * dim;
    for (std::size_t j = 0; j < dim; ++j) out[k] += row[j] * x[j];
  }
  return out;
}

ScorerGrid::ScorerGrid(std::size_t classes, std::vector<Scorer> candidates)
    : classes_(classes), candidates_(std::move(candidates)) {
  if (candidates_.empty()) throw std::invalid_argument("scorer grid is empty");
  if (classes_ < 2) throw std::invalid_argument("scorer grid needs K >= 2");
}

ScorerGrid ScorerGrid::from_linear(const std::vector<LinearScorer>& scorers) {
  if (scorers.empty()) throw std::invalid_argument("scorer grid is empty");
  const std::size_t k = scorers.front().classes;
  std::vector<Scorer> fns;
  fns.reserve(scorers.size());
  for (const auto& s : scorers) {
    if (s.classes != k) throw DimensionError("linear scorers disagree on K");
    if (s.weights.size() != s.classes * s.dim || s.bias.size() != s.classes) {
      throw DimensionError("linear scorer parameter shapes are inconsistent");
    }
    fns.emplace_back([s](std::span<const double> x) { return s(x); });
  }
  return ScorerGrid(k, std::move(fns));
}

ScorerGrid ScorerGrid::from_table(std::vector<std::vector<ScoreVector>> table) {
  if (table.empty() || table.front().empty()) throw std::invalid_argument("scorer table is empty");
  const std::size_t k = table.front().front().size();
  std::vector<Scorer> fns;
  for (auto& row : table) {
    for (const auto& s : row) {
      if (s.size() != k) throw DimensionError("scorer table disagrees on K");
    }
    fns.emplace_back([row = std::move(row)](std::span<const double> x) {
      const double idx = std::round(x[0]);
      if (idx < 0.0 || idx >= static_cast<double>(row.size())) {
        throw std::out_of_range("point outside the tabulated universe");
      }
      return row[static_cast<std::size_t>(idx)];
    });
  }
  return ScorerGrid(k, std::move(fns));
}

GridEvaluation ScorerGrid::evaluate(const SampleSet& sample) const {
  GridEvaluation ev;
  ev.classes = classes_;
  ev.scores.resize(candidates_.size());
  for (std::size_t c = 0; c < candidates_.size(); ++c) {
    auto& row = ev.scores[c];
    row.reserve(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      row.push_back(candidates_[c](sample.point(i)));
      if (row.back().size() != classes_) throw DimensionError("grid member returned wrong K");
    }
  }
  return ev;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double weighted_mean(const SampleSet& sample, std::span<const double> per_point) {
  if (per_point.size() != sample.size()) throw DimensionError("per-point values do not match sample");
  std::vector<double> terms(per_point.size());
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = sample.mass(i) * per_point[i];
  return pairwise_sum(terms);
}

std::string to_string(Disagreement d) {
  switch (d) {
    case Disagreement::mcsd: return "mcsd";
    case Disagreement::tilde: return "tilde";
    case Disagreement::hat: return "hat";
  }
  return "?";
}

Disagreement disagreement_from_string(const std::string& name) {
  if (name == "mcsd") return Disagreement::mcsd;
  if (name == "tilde") return Disagreement::tilde;
  if (name == "hat") return Disagreement::hat;
  throw std::invalid_argument("unknown disagreement '" + name + "'");
}

double pointwise_disagreement(Disagreement kind, const ScoreVector& f1_x, const ScoreVector& f2_x,
                              RampParam rho) {
  switch (kind) {
    case Disagreement::mcsd: return mcsd_pointwise(f1_x, f2_x, rho);
    case Disagreement::tilde: return mcsd_tilde_pointwise(f1_x, f2_x, rho);
    case Disagreement::hat: return mcsd_hat_pointwise(f1_x, f2_x, rho);
  }
  return 0.0;
}

double empirical_disagreement(Disagreement kind, const SampleSet& sample, const Scorer& f1,
                              const Scorer& f2, RampParam rho) {
  std::vector<double> d(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    d[i] = pointwise_disagreement(kind, f1(sample.point(i)), f2(sample.point(i)), rho);
  }
  return weighted_mean(sample, d);
}

double empirical_mcsd(const SampleSet& sample, const Scorer& f1, const Scorer& f2, RampParam rho) {
  return empirical_disagreement(Disagreement::mcsd, sample, f1, f2, rho);
}

namespace {

// Per-(candidate, point) data reused across all pairs.
struct PairTable {
  Disagreement kind;
  RampParam rho;
  std::size_t k;
  GridEvaluation scores;
  std::vector<std::vector<std::vector<double>>> violations;  // [c][i] -> K*K entries

  PairTable(Disagreement kind_, const ScorerGrid& grid, const SampleSet& s, RampParam rho_)
      : kind(kind_), rho(rho_), k(grid.classes()), scores(grid.evaluate(s)) {
    if (kind != Disagreement::mcsd) return;
    violations.resize(scores.scores.size());
    for (std::size_t c = 0; c < violations.size(); ++c) {
      for (const auto& f : scores.scores[c]) {
        const auto m = violation_matrix(f, rho);
        violations[c].emplace_back(m.entries().begin(), m.entries().end());
      }
    }
  }

  double mean(const SampleSet& s, std::size_t a, std::size_t b, std::vector<double>& buf) const {
    buf.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (kind == Disagreement::mcsd) {
        const auto& ma = violations[a][i];
        const auto& mb = violations[b][i];
        double l1 = 0.0;
        for (std::size_t e = 0; e < ma.size(); ++e) l1 += std::abs(ma[e] - mb[e]);
        buf[i] = l1 / static_cast<double>(k);
      } else {
        buf[i] = pointwise_disagreement(kind, scores.scores[a][i], scores.scores[b][i], rho);
      }
    }
    return weighted_mean(s, buf);
  }
};

}  // namespace

DivergenceResult divergence_exact(Disagreement kind, const SampleSet& src, const SampleSet& tgt,
                                  const ScorerGrid& grid, RampParam rho, unsigned threads) {
  if (src.dim() != tgt.dim()) throw DimensionError("source and target feature dimensions differ");
  const PairTable on_src(kind, grid, src, rho);
  const PairTable on_tgt(kind, grid, tgt, rho);
  const std::size_t n = grid.size();

  auto scan_rows = [&](std::size_t lo, std::size_t hi) {
    DivergenceResult best{-std::numeric_limits<double>::infinity(), 0, 0};
    std::vector<double> buf;
    for (std::size_t a = lo; a < hi; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const double v = on_tgt.mean(tgt, a, b, buf) - on_src.mean(src, a, b, buf);
        if (v > best.value) best = {v, a, b};
      }
    }
    return best;
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  std::vector<DivergenceResult> partial(workers);
  if (workers == 1) {
    partial[0] = scan_rows(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] { partial[w] = scan_rows(w * n / workers, (w + 1) * n / workers); });
    }
    for (auto& t : pool) t.join();
  }
  // Chunks are row-ordered, so a strict comparison keeps the first maximizer
  // exactly as the sequential scan would.
  DivergenceResult best = partial[0];
  for (std::size_t w = 1; w < workers; ++w) {
    if (partial[w].value > best.value) best = partial[w];
  }
  return best;
}

double smoothed_ramp(double x, RampParam rho) {
  const double r = rho.value();
  const double h = r / 200.0;
  auto hermite = [](double x0, double x1, double y0, double m0, double y1, double m1, double x) {
    const double len = x1 - x0;
    const double t = (x - x0) / len;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * len * m0 + (-2 * t3 + 3 * t2) * y1 +
           (t3 - t2) * len * m1;
  };
  if (x <= -h) return 1.0;
  if (x < h) return hermite(-h, h, 1.0, 0.0, 1.0 - h / r, -1.0 / r, x);
  if (x <= r - h) return 1.0 - x / r;
  if (x < r + h) return hermite(r - h, r + h, h / r, -1.0 / r, 0.0, 0.0, x);
  return 0.0;
}

double smoothed_ramp_derivative(double x, RampParam rho) {
  const double r = rho.value();
  const double h = r / 200.0;
  auto hermite_d = [](double x0, double x1, double y0, double m0, double y1, double m1, double x) {
    const double len = x1 - x0;
    const double t = (x - x0) / len;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * len * m0 + (-6 * t2 + 6 * t) * y1 +
            (3 * t2 - 2 * t) * len * m1) /
           len;
  };
  if (x <= -h) return 0.0;
  if (x < h) return hermite_d(-h, h, 1.0, 0.0, 1.0 - h / r, -1.0 / r, x);
  if (x <= r - h) return -1.0 / r;
  if (x < r + h) return hermite_d(r - h, r + h, h / r, -1.0 / r, 0.0, 0.0, x);
  return 0.0;
}

namespace {

LinearScorer zeros_like(const LinearScorer& f) {
  return LinearScorer{f.classes, f.dim, std::vector<double>(f.weights.size(), 0.0),
                      std::vector<double>(f.bias.size(), 0.0)};
}

// Accumulates sign * mass * d(smoothed pointwise MCSD) into the two gradients.
double accumulate_smoothed(const SampleSet& s, double sign, const LinearScorer& f1,
                           const LinearScorer& f2, RampParam rho, LinearScorer& g1,
                           LinearScorer& g2) {
  const std::size_t k = f1.classes;
  const double inv_k = 1.0 / static_cast<double>(k);
  std::vector<double> terms(s.size());
  std::vector<double> d1(k), d2(k);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const auto x = s.point(n);
    const ScoreVector a = f1(x), b = f2(x);
    std::fill(d1.begin(), d1.end(), 0.0);
    std::fill(d2.begin(), d2.end(), 0.0);
    double value = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double sg = i == j ? 1.0 : -1.0;
        const double ra = smoothed_ramp(sg * a[i], rho);
        const double rb = smoothed_ramp(sg * b[i], rho);
        const double diff = ra - rb;
        value += std::abs(diff);
        const double sd = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        d1[i] += sd * smoothed_ramp_derivative(sg * a[i], rho) * sg;
        d2[i] -= sd * smoothed_ramp_derivative(sg * b[i], rho) * sg;
      }
    }
    terms[n] = s.mass(n) * value * inv_k;
    // Chain through the mean-subtraction projection: grad_raw = grad - mean(grad).
    auto push = [&](std::vector<double>& d, const LinearScorer& f, LinearScorer& g) {
      double mean = 0.0;
      for (double v : d) mean += v;
      mean /= static_cast<double>(k);
      for (std::size_t i = 0; i < k; ++i) {
        const double gi = sign * s.mass(n) * inv_k * (d[i] - mean);
        g.bias[i] += gi;
        for (std::size_t j = 0; j < f.dim; ++j) g.weights[i * f.dim + j] += gi * x[j];
      }
    };
    push(d1, f1, g1);
    push(d2, f2, g2);
  }
  return sign * pairwise_sum(terms);
}

double exact_objective(const SampleSet& src, const SampleSet& tgt, const LinearScorer& f1,
                       const LinearScorer& f2, RampParam rho) {
  const Scorer a = [&](std::span<const double> x) { return f1(x); };
  const Scorer b = [&](std::span<const double> x) { return f2(x); };
  return empirical_mcsd(tgt, a, b, rho) - empirical_mcsd(src, a, b, rho);
}

void axpy(LinearScorer& f, double alpha, const LinearScorer& g) {
  for (std::size_t i = 0; i < f.weights.size(); ++i) f.weights[i] += alpha * g.weights[i];
  for (std::size_t i = 0; i < f.bias.size(); ++i) f.bias[i] += alpha * g.bias[i];
}

double squared_norm(const LinearScorer& g) {
  double s = 0.0;
  for (double v : g.weights) s += v * v;
  for (double v : g.bias) s += v * v;
  return s;
}

}  // namespace

SmoothedObjective smoothed_divergence_objective(const SampleSet& src, const SampleSet& tgt,
                                                const LinearScorer& f1, const LinearScorer& f2,
                                                RampParam rho) {
  if (f1.classes != f2.classes || f1.dim != f2.dim) throw DimensionError("head shapes differ");
  if (src.dim() != f1.dim || tgt.dim() != f1.dim) throw DimensionError("heads do not match features");
  SmoothedObjective out{0.0, zeros_like(f1), zeros_like(f2)};
  const double t = accumulate_smoothed(tgt, +1.0, f1, f2, rho, out.grad_first, out.grad_second);
  const double s = accumulate_smoothed(src, -1.0, f1, f2, rho, out.grad_first, out.grad_second);
  out.value = t + s;
  return out;
}

AdversarialResult mcsd_divergence_adversarial(const SampleSet& src, const SampleSet& tgt,
                                              RampParam rho, const AdversarialOptions& options) {
  if (src.dim() != tgt.dim()) throw DimensionError("source and target feature dimensions differ");
  if (options.classes < 2) throw std::invalid_argument("heads need K >= 2");
  const std::size_t k = options.classes, d = src.dim();

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> init(0.0, options.init_scale);
  auto draw = [&] {
    LinearScorer f{k, d, std::vector<double>(k * d), std::vector<double>(k)};
    for (double& w : f.weights) w = init(rng);
    for (double& b : f.bias) b = init(rng);
    return f;
  };
  LinearScorer f1 = draw(), f2 = draw();

  AdversarialResult result;
  auto record = [&] {
    const double exact = exact_objective(src, tgt, f1, f2, rho);
    result.value = result.iterates.empty() ? exact : std::max(result.value, exact);
    result.trace.push_back(result.value);
    result.iterates.emplace_back(f1, f2);
  };
  record();

  auto current = smoothed_divergence_objective(src, tgt, f1, f2, rho);
  double alpha = options.step_size;
  for (std::size_t step = 0; step < options.steps; ++step) {
    const double gnorm2 = squared_norm(current.grad_first) + squared_norm(current.grad_second);
    if (gnorm2 < options.tolerance * options.tolerance) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      LinearScorer c1 = f1, c2 = f2;
      axpy(c1, alpha, current.grad_first);
      axpy(c2, alpha, current.grad_second);
      auto trial = smoothed_divergence_objective(src, tgt, c1, c2, rho);
      if (trial.value > current.value + options.tolerance) {
        f1 = std::move(c1);
        f2 = std::move(c2);
        current = std::move(trial);
        accepted = true;
        alpha *= 1.5;
      } else {
        alpha *= 0.5;
      }
    }
    if (!accepted) {
      result.converged = true;
      break;
    }
    record();
  }
  result.smoothed_value = current.value;
  return result;
}

RademacherEstimate rademacher_of_values(const std::vector<std::vector<double>>& values,
                                        std::size_t sigma_draws, std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("function class is empty");
  if (sigma_draws == 0) throw std::invalid_argument("need at least one sign draw");
  const std::size_t m = values.front().size();
  for (const auto& g : values) {
    if (g.size() != m) throw DimensionError("function values disagree on sample size");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> sups(sigma_draws);
  std::vector<double> sigma(m);
  for (std::size_t t = 0; t < sigma_draws; ++t) {
    for (auto& s : sigma) s = (rng() >> 63) ? 1.0 : -1.0;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& g : values) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += sigma[i] * g[i];
      best = std::max(best, dot);
    }
    sups[t] = best / static_cast<double>(m);
  }
  const double mean = pairwise_sum(sups) / static_cast<double>(sigma_draws);
  double var = 0.0;
  for (double s : sups) var += (s - mean) * (s - mean);
  var = sigma_draws > 1 ? var / static_cast<double>(sigma_draws - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(sigma_draws)), sigma_draws};
}

double rademacher_exact_of_values(const std::vector<std::vector<double>>& values) {
  if (values.empty()) throw std::invalid_argument("function class is empty");
  const std::size_t m = values.front().size();
  if (m > 24) throw std::invalid_argument("exact enumeration limited to 24 points");
  const std::uint64_t patterns = std::uint64_t{1} << m;
  std::vector<double> sups(patterns);
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& g : values) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += ((mask >> i) & 1u) ? g[i] : -g[i];
      best = std::max(best, dot);
    }
    sups[mask] = best;
  }
  return pairwise_sum(sups) / static_cast<double>(patterns) / static_cast<double>(m);
}

std::vector<std::vector<double>> component_projections(const ScorerGrid& grid,
                                                       const SampleSet& sample) {
  const auto ev = grid.evaluate(sample);
  std::vector<std::vector<double>> values;
  for (const auto& per_point : ev.scores) {
    for (std::size_t k = 0; k < ev.classes; ++k) {
      std::vector<double> g(sample.size());
      for (std::size_t i = 0; i < sample.size(); ++i) g[i] = per_point[i][k];
      values.push_back(std::move(g));
    }
  }
  return values;
}

RademacherEstimate rademacher_estimate(const SampleSet& sample, const ScorerGrid& grid,
                                       std::size_t sigma_draws, std::uint64_t seed) {
  return rademacher_of_values(component_projections(grid, sample), sigma_draws, seed);
}

double margin_error(const SampleSet& labeled, const Scorer& f, RampParam rho) {
  std::vector<double> loss(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    loss[i] = source_margin_loss(f(labeled.point(i)), labeled.label(i), rho);
  }
  return weighted_mean(labeled, loss);
}

double zero_one_error(const SampleSet& labeled, const Scorer& f) {
  std::vector<double> loss(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    loss[i] = zero_one_loss(f(labeled.point(i)), labeled.label(i));
  }
  return weighted_mean(labeled, loss);
}

PacReport pac_bound_report(const SampleSet& src, const SampleSet& tgt, const ScorerGrid& grid,
                           RampParam rho, std::size_t scorer, const PacOptions& options) {
  if (!src.has_labels() || !tgt.has_labels()) {
    throw std::invalid_argument("bound report needs source labels and target evaluation labels");
  }
  if (scorer >= grid.size()) throw std::out_of_range("scorer index outside the grid");
  if (!(options.delta > 0.0 && options.delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  PacReport r;
  r.scorer = scorer;
  r.classes = grid.classes();
  r.rho = rho.value();
  r.delta = options.delta;
  r.n_src = src.size();
  r.n_tgt = tgt.size();
  const double k = static_cast<double>(r.classes);

  r.src_margin_err = margin_error(src, grid[scorer], rho);
  r.divergence = mcsd_divergence_exact(src, tgt, grid, rho).value;
  if (options.sigma_draws == 0) {
    r.rademacher_src_raw = rademacher_exact_of_values(component_projections(grid, src));
    r.rademacher_tgt_raw = rademacher_exact_of_values(component_projections(grid, tgt));
  } else {
    r.rademacher_src_raw = rademacher_estimate(src, grid, options.sigma_draws, options.seed).estimate;
    r.rademacher_tgt_raw =
        rademacher_estimate(tgt, grid, options.sigma_draws, options.seed + 1).estimate;
  }
  r.rademacher_src = (2.0 * k * k / r.rho + 4.0 * k / r.rho) * r.rademacher_src_raw;
  r.rademacher_tgt = (4.0 * k / r.rho) * r.rademacher_tgt_raw;
  const double log_term = std::log(4.0 / options.delta);
  r.slack_src = 6.0 * k * std::sqrt(log_term / (2.0 * static_cast<double>(r.n_src)));
  r.slack_tgt = 3.0 * k * std::sqrt(log_term / (2.0 * static_cast<double>(r.n_tgt)));

  r.lambda = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double joint = margin_error(src, grid[g], rho) + margin_error(tgt, grid[g], rho);
    if (joint < r.lambda) {
      r.lambda = joint;
      r.lambda_minimizer = g;
    }
  }
  r.lhs_target_err = zero_one_error(tgt, grid[scorer]);
  r.rhs = r.src_margin_err + r.divergence + r.rademacher_src + r.rademacher_tgt + r.slack_src +
          r.slack_tgt + r.lambda;
  r.holds = r.lhs_target_err <= r.rhs;
  return r;
}

nlohmann::json PacReport::to_json() const {
  return {
      {"scorer", scorer},
      {"K", classes},
      {"rho", rho},
      {"delta", delta},
      {"n_src", n_src},
      {"n_tgt", n_tgt},
      {"src_margin_err", src_margin_err},
      {"divergence", divergence},
      {"rademacher_src", rademacher_src},
      {"rademacher_tgt", rademacher_tgt},
      {"rademacher_src_raw", rademacher_src_raw},
      {"rademacher_tgt_raw", rademacher_tgt_raw},
      {"slack_src", slack_src},
      {"slack_tgt", slack_tgt},
      {"slack_note", "confidence padding at level 1 - 3*delta, not a tightness claim"},
      {"lambda", lambda},
      {"lambda_minimizer", lambda_minimizer},
      {"lhs_target_err", lhs_target_err},
      {"rhs", rhs},
      {"holds", holds},
  };
}

}  // namespace mcsd
