#include "mcsd/surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mcsd/errors.hpp"

namespace mcsd {

namespace {

void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("probability vectors differ in length");
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// log(1 - p_h) computed as log of the sum of the other probabilities.
double log_one_minus(const ProbVector& p, std::size_t h, bool* clamped) {
  double rest = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j != h) rest += p[j];
  }
  *clamped = rest < kClampEps;
  return *clamped ? std::log(kClampEps) : std::log(rest);
}

// -log sigmoid(d) = softplus(-d); log(1 - sigmoid(d)) = -softplus(d).
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t argmax_of(std::span<const double> z) {
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

}  // namespace

double log_sum_exp(std::span<const double> raw) {
  if (raw.empty()) throw std::invalid_argument("log-sum-exp of an empty vector");
  const double m = *std::max_element(raw.begin(), raw.end());
  double s = 0.0;
  for (double v : raw) s += std::exp(v - m);
  return m + std::log(s);
}

ProbVector softmax(std::span<const double> raw) {
  for (double v : raw) {
    if (!std::isfinite(v)) throw std::invalid_argument("softmax of a non-finite score");
  }
  ProbVector p;
  const double lse = log_sum_exp(raw);
  p.logs_.resize(raw.size());
  p.probs_.resize(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    p.logs_[k] = raw[k] - lse;
    p.probs_[k] = std::exp(p.logs_[k]);
  }
  return p;
}

double entropy(const ProbVector& p) {
  double h = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) h -= p[k] * p.log_prob(k);
  return h;
}

double cross_entropy(const ProbVector& p, const ProbVector& q) {
  require_same(p.size(), q.size());
  double ce = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) ce -= p[k] * q.log_prob(k);
  return ce;
}

double kl_divergence(const ProbVector& p, const ProbVector& q) {
  require_same(p.size(), q.size());
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) kl += p[k] * (p.log_prob(k) - q.log_prob(k));
  return kl;
}

double sur_l1(const ProbVector& p1, const ProbVector& p2) {
  require_same(p1.size(), p2.size());
  double s = 0.0;
  for (std::size_t k = 0; k < p1.size(); ++k) s += std::abs(p1[k] - p2[k]);
  return s / static_cast<double>(p1.size());
}

double sur_kl(const ProbVector& p1, const ProbVector& p2) {
  // Both directions in one pass: sum (p1 - p2)(log p1 - log p2) / 2.
  require_same(p1.size(), p2.size());
  double s = 0.0;
  for (std::size_t k = 0; k < p1.size(); ++k) {
    s += (p1[k] - p2[k]) * (p1.log_prob(k) - p2.log_prob(k));
  }
  return 0.5 * s;
}

double sur_ce(const ProbVector& p1, const ProbVector& p2) {
  return 0.5 * (cross_entropy(p1, p2) + cross_entropy(p2, p1));
}

double log_loss(const ProbVector& p, Label y) {
  if (y.index() >= p.size()) throw std::invalid_argument("label outside the class range");
  return -p.log_prob(y.index());
}

double mdd_src_point(std::span<const double> z1, std::span<const double> z2) {
  require_same(z1.size(), z2.size());
  return -softmax(z2).log_prob(argmax_of(z1));
}

double mdd_tgt_point(std::span<const double> z1, std::span<const double> z2,
                     ClampCounter* clamps) {
  require_same(z1.size(), z2.size());
  bool clamped = false;
  const double v = log_one_minus(softmax(z2), argmax_of(z1), &clamped);
  if (clamped && clamps) ++clamps->count;
  return v;
}

std::vector<double> mdd_src_point_grad(std::span<const double> z1, std::span<const double> z2) {
  const auto p = softmax(z2);
  std::vector<double> g(p.values().begin(), p.values().end());
  g[argmax_of(z1)] -= 1.0;
  return g;
}

std::vector<double> mdd_tgt_point_grad(std::span<const double> z1, std::span<const double> z2) {
  const auto p = softmax(z2);
  const std::size_t h = argmax_of(z1);
  double rest = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j != h) rest += p[j];
  }
  std::vector<double> g(p.size(), 0.0);
  if (rest < kClampEps) return g;
  // d/dz_j log(1 - p_h) = -p_h (delta_hj - p_j) / (1 - p_h)
  for (std::size_t j = 0; j < p.size(); ++j) {
    g[j] = -p[h] * ((j == h ? 1.0 : 0.0) - p[j]) / rest;
  }
  return g;
}

TermPair sur_mdd_variant(const HeadScores& src, const HeadScores& tgt, ClampCounter* clamps) {
  if (src.first.empty() || tgt.first.empty()) throw std::invalid_argument("empty batch");
  if (src.first.size() != src.second.size() || tgt.first.size() != tgt.second.size()) {
    throw DimensionError("head score batches differ in length");
  }
  TermPair t;
  for (std::size_t i = 0; i < src.first.size(); ++i) t.src_term += mdd_src_point(src.first[i], src.second[i]);
  for (std::size_t i = 0; i < tgt.first.size(); ++i) {
    t.tgt_term += mdd_tgt_point(tgt.first[i], tgt.second[i], clamps);
  }
  t.src_term /= static_cast<double>(src.first.size());
  t.tgt_term /= static_cast<double>(tgt.first.size());
  return t;
}

double dann_src_point(double d, ClampCounter* clamps) {
  const double v = softplus(-d);
  if (v > -std::log(kClampEps)) {
    if (clamps) ++clamps->count;
    return -std::log(kClampEps);
  }
  // Also clamp at the top: sigmoid(d) <= 1 - eps.
  return std::max(v, -std::log1p(-kClampEps));
}

double dann_tgt_point(double d, ClampCounter* clamps) {
  const double v = -softplus(d);
  if (v < std::log(kClampEps)) {
    if (clamps) ++clamps->count;
    return std::log(kClampEps);
  }
  return std::min(v, std::log1p(-kClampEps));
}

double dann_src_point_grad(double d) {
  const double s = sigmoid(d);
  return (s < kClampEps || s > 1.0 - kClampEps) ? 0.0 : s - 1.0;
}

double dann_tgt_point_grad(double d) {
  const double s = sigmoid(d);
  return (s < kClampEps || s > 1.0 - kClampEps) ? 0.0 : -s;
}

TermPair sur_dann(std::span<const double> src_d, std::span<const double> tgt_d,
                  ClampCounter* clamps) {
  if (src_d.empty() || tgt_d.empty()) throw std::invalid_argument("empty batch");
  TermPair t;
  for (double d : src_d) t.src_term += dann_src_point(d, clamps);
  for (double d : tgt_d) t.tgt_term += dann_tgt_point(d, clamps);
  t.src_term /= static_cast<double>(src_d.size());
  t.tgt_term /= static_cast<double>(tgt_d.size());
  return t;
}

std::string to_string(Surrogate s) {
  switch (s) {
    case Surrogate::l1: return "l1";
    case Surrogate::kl: return "kl";
    case Surrogate::ce: return "ce";
    case Surrogate::mdd_variant: return "mdd_variant";
    case Surrogate::dann: return "dann";
  }
  return "?";
}

Surrogate surrogate_from_string(const std::string& name) {
  if (name == "l1") return Surrogate::l1;
  if (name == "kl") return Surrogate::kl;
  if (name == "ce") return Surrogate::ce;
  if (name == "mdd_variant") return Surrogate::mdd_variant;
  if (name == "dann") return Surrogate::dann;
  throw std::invalid_argument("unknown surrogate '" + name + "'");
}

std::vector<double> log_loss_grad(std::span<const double> z, Label y) {
  const auto p = softmax(z);
  std::vector<double> g(p.values().begin(), p.values().end());
  g.at(y.index()) -= 1.0;
  return g;
}

namespace {

// Pull a gradient w.r.t. probabilities back through softmax: p * (g - <g, p>).
std::vector<double> through_softmax(const ProbVector& p, const std::vector<double>& g) {
  double dot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) dot += g[k] * p[k];
  std::vector<double> out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) out[k] = p[k] * (g[k] - dot);
  return out;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> sur_l1_grad(std::span<const double> z1,
                                                                std::span<const double> z2) {
  require_same(z1.size(), z2.size());
  const auto p1 = softmax(z1), p2 = softmax(z2);
  const double inv_k = 1.0 / static_cast<double>(p1.size());
  std::vector<double> g1(p1.size()), g2(p1.size());
  for (std::size_t k = 0; k < p1.size(); ++k) {
    g1[k] = sign_of(p1[k] - p2[k]) * inv_k;
    g2[k] = -g1[k];
  }
  return {through_softmax(p1, g1), through_softmax(p2, g2)};
}

std::pair<std::vector<double>, std::vector<double>> sur_kl_grad(std::span<const double> z1,
                                                                std::span<const double> z2) {
  require_same(z1.size(), z2.size());
  const auto p1 = softmax(z1), p2 = softmax(z2);
  const std::size_t k = p1.size();
  // r = log p1 - log p2; d/dz1 = 1/2 [(p1 - p2) + p1 (r - <p1, r>)], symmetric for z2.
  std::vector<double> r(k);
  double r1 = 0.0, r2 = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    r[j] = p1.log_prob(j) - p2.log_prob(j);
    r1 += p1[j] * r[j];
    r2 += p2[j] * r[j];
  }
  std::vector<double> g1(k), g2(k);
  for (std::size_t j = 0; j < k; ++j) {
    g1[j] = 0.5 * ((p1[j] - p2[j]) + p1[j] * (r[j] - r1));
    g2[j] = 0.5 * ((p2[j] - p1[j]) - p2[j] * (r[j] - r2));
  }
  return {g1, g2};
}

std::pair<std::vector<double>, std::vector<double>> sur_ce_grad(std::span<const double> z1,
                                                                std::span<const double> z2) {
  require_same(z1.size(), z2.size());
  const auto p1 = softmax(z1), p2 = softmax(z2);
  const std::size_t k = p1.size();
  // d/dz1 of -<p1, log p2> is -p1 (log p2 - <p1, log p2>); of -<p2, log p1> is p1 - p2.
  double a1 = 0.0, a2 = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    a1 += p1[j] * p2.log_prob(j);
    a2 += p2[j] * p1.log_prob(j);
  }
  std::vector<double> g1(k), g2(k);
  for (std::size_t j = 0; j < k; ++j) {
    g1[j] = 0.5 * (-p1[j] * (p2.log_prob(j) - a1) + (p1[j] - p2[j]));
    g2[j] = 0.5 * (-p2[j] * (p1.log_prob(j) - a2) + (p2[j] - p1[j]));
  }
  return {g1, g2};
}

namespace {

using PairFn = double (*)(const ProbVector&, const ProbVector&);
using PairGrad = std::pair<std::vector<double>, std::vector<double>> (*)(std::span<const double>,
                                                                         std::span<const double>);

AuditedLoss pair_loss(std::string name, std::size_t k, PairFn f, PairGrad g) {
  AuditedLoss l;
  l.name = std::move(name);
  l.input_size = 2 * k;
  l.value = [k, f](std::span<const double> z, std::size_t) {
    return f(softmax(z.first(k)), softmax(z.subspan(k)));
  };
  l.gradient = [k, g](std::span<const double> z, std::size_t) {
    auto [a, b] = g(z.first(k), z.subspan(k));
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  return l;
}

}  // namespace

std::vector<AuditedLoss> surrogate_losses(std::size_t k) {
  std::vector<AuditedLoss> out;
  out.push_back({"log_loss", k,
                 [](std::span<const double> z, std::size_t y) { return log_loss(softmax(z), Label(y)); },
                 [](std::span<const double> z, std::size_t y) { return log_loss_grad(z, Label(y)); }});
  out.push_back(pair_loss("sur_l1", k, &sur_l1, &sur_l1_grad));
  out.push_back(pair_loss("sur_kl", k, &sur_kl, &sur_kl_grad));
  out.push_back(pair_loss("sur_ce", k, &sur_ce, &sur_ce_grad));

  // MDD-variant pieces: only the second head's scores are differentiated; the
  // first head is represented by its argmax, so its gradient block is zero.
  out.push_back({"mdd_src", 2 * k,
                 [k](std::span<const double> z, std::size_t) {
                   return mdd_src_point(z.first(k), z.subspan(k));
                 },
                 [k](std::span<const double> z, std::size_t) {
                   std::vector<double> g(k, 0.0);
                   const auto g2 = mdd_src_point_grad(z.first(k), z.subspan(k));
                   g.insert(g.end(), g2.begin(), g2.end());
                   return g;
                 }});
  out.push_back({"mdd_tgt", 2 * k,
                 [k](std::span<const double> z, std::size_t) {
                   return mdd_tgt_point(z.first(k), z.subspan(k));
                 },
                 [k](std::span<const double> z, std::size_t) {
                   std::vector<double> g(k, 0.0);
                   const auto g2 = mdd_tgt_point_grad(z.first(k), z.subspan(k));
                   g.insert(g.end(), g2.begin(), g2.end());
                   return g;
                 }});
  out.push_back({"dann_src", 1, [](std::span<const double> z, std::size_t) { return dann_src_point(z[0]); },
                 [](std::span<const double> z, std::size_t) {
                   return std::vector<double>{dann_src_point_grad(z[0])};
                 }});
  out.push_back({"dann_tgt", 1, [](std::span<const double> z, std::size_t) { return dann_tgt_point(z[0]); },
                 [](std::span<const double> z, std::size_t) {
                   return std::vector<double>{dann_tgt_point_grad(z[0])};
                 }});
  return out;
}

}  // namespace mcsd
