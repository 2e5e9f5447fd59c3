#include "mcsd/symmnets.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcsd/errors.hpp"

namespace mcsd {

namespace {

const double kLogFloor = std::log(kClampEps);

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i) = z.row(i).array() - lse;
  }
  return out;
}

void require_rows(const Eigen::MatrixXd& z, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(z.rows()) != n) {
    throw DimensionError(std::string(what) + ": score rows do not match label count");
  }
}

void require_label(std::size_t y, std::size_t k) {
  if (y >= k) throw std::invalid_argument("label outside the class range");
}

void require_omega(const ClassWeights& omega, std::size_t k) {
  if (static_cast<std::size_t>(omega.size()) != k) throw DimensionError("class weights must have K entries");
}

// Clamped log-probability; a clamped term contributes no gradient.
double clamped(double lp, bool* was_clamped, ClampCounter* clamps) {
  *was_clamped = lp < kLogFloor;
  if (*was_clamped) {
    if (clamps) ++clamps->count;
    return kLogFloor;
  }
  return lp;
}

SplitGrad split(double value, const Eigen::MatrixXd& g, Eigen::Index k) {
  return {value, g.leftCols(k), g.rightCols(k)};
}

}  // namespace

ClassWeights unit_weights(std::size_t k) {
  return ClassWeights::Ones(static_cast<Eigen::Index>(k));
}

Eigen::MatrixXd concat_scores(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt) {
  if (zs.rows() != zt.rows() || zs.cols() != zt.cols()) throw DimensionError("head outputs differ in shape");
  Eigen::MatrixXd z(zs.rows(), zs.cols() * 2);
  z << zs, zt;
  return z;
}

LossGrad loss_task_src(const Eigen::MatrixXd& z, std::span<const std::size_t> labels,
                       const ClassWeights& omega) {
  const std::size_t n = labels.size(), k = static_cast<std::size_t>(z.cols());
  if (n == 0) throw std::invalid_argument("empty source batch");
  require_rows(z, n, "task loss");
  require_omega(omega, k);
  const Eigen::MatrixXd lp = log_softmax_rows(z);
  LossGrad out{0.0, lp.array().exp().matrix()};
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const std::size_t y = labels[i];
    require_label(y, k);
    const double w = omega[static_cast<Eigen::Index>(y)];
    out.value -= w * lp(r, static_cast<Eigen::Index>(y));
    out.grad(r, static_cast<Eigen::Index>(y)) -= 1.0;
    out.grad.row(r) *= w;
  }
  out.value /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

SplitGrad confuse_src(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt,
                      std::span<const std::size_t> labels, const ClassWeights& omega,
                      ClampCounter* clamps) {
  const std::size_t n = labels.size(), k = static_cast<std::size_t>(zs.cols());
  if (n == 0) throw std::invalid_argument("empty source batch");
  require_rows(zs, n, "source confusion");
  require_omega(omega, k);
  const Eigen::MatrixXd lp = log_softmax_rows(concat_scores(zs, zt));
  const Eigen::MatrixXd p = lp.array().exp();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(lp.rows(), lp.cols());
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    require_label(labels[i], k);
    const double w = omega[static_cast<Eigen::Index>(labels[i])];
    for (const auto c : {labels[i], labels[i] + k}) {
      bool hit = false;
      value -= 0.5 * w * clamped(lp(r, static_cast<Eigen::Index>(c)), &hit, clamps);
      if (hit) continue;
      // d(-1/2 w log p_c)/dz = 1/2 w (p - e_c)
      g.row(r) += 0.5 * w * p.row(r);
      g(r, static_cast<Eigen::Index>(c)) -= 0.5 * w;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return split(value * inv_n, g * inv_n, static_cast<Eigen::Index>(k));
}

SplitGrad confuse_tgt(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt) {
  const auto n = zs.rows();
  const auto k = zs.cols();
  if (n == 0) throw std::invalid_argument("empty target batch");
  const Eigen::MatrixXd lp = log_softmax_rows(concat_scores(zs, zt));
  const Eigen::MatrixXd p = lp.array().exp();
  Eigen::MatrixXd g(n, 2 * k);
  double value = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    // a = p with halves swapped; per point L = -1/2 sum_i a_i log p_i.
    Eigen::RowVectorXd a(2 * k);
    a << p.row(r).tail(k), p.row(r).head(k);
    const double s = a.dot(lp.row(r));
    value -= 0.5 * s;
    for (Eigen::Index i = 0; i < 2 * k; ++i) {
      const Eigen::Index sw = i < k ? i + k : i - k;
      g(r, i) = -0.5 * (p(r, i) * (lp(r, sw) - s) + a[i] - p(r, i));
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return split(value * inv_n, g * inv_n, k);
}

DiscrimGrad discrim(const Eigen::MatrixXd& zs_src, const Eigen::MatrixXd& zt_src,
                    std::span<const std::size_t> labels, const ClassWeights& omega,
                    const Eigen::MatrixXd& zs_tgt, const Eigen::MatrixXd& zt_tgt,
                    ClampCounter* clamps) {
  const std::size_t ns = labels.size();
  const auto nt = zs_tgt.rows();
  const auto k = zs_src.cols();
  if (ns == 0 || nt == 0) throw std::invalid_argument("discrimination needs both batches");
  require_rows(zs_src, ns, "discrimination");
  require_omega(omega, static_cast<std::size_t>(k));

  DiscrimGrad out;
  // Source: -omega_y log p_st_y.
  const Eigen::MatrixXd lps = log_softmax_rows(concat_scores(zs_src, zt_src));
  Eigen::MatrixXd gs = lps.array().exp();
  double vs = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    require_label(labels[i], static_cast<std::size_t>(k));
    const auto y = static_cast<Eigen::Index>(labels[i]);
    const double w = omega[y];
    bool hit = false;
    vs -= w * clamped(lps(r, y), &hit, clamps);
    if (hit) {
      gs.row(r).setZero();
    } else {
      gs(r, y) -= 1.0;
      gs.row(r) *= w;
    }
  }
  vs /= static_cast<double>(ns);
  gs /= static_cast<double>(ns);

  // Target: -log T with T the total mass on the second half;
  // log T = lse(z[K..2K)) - lse(z).
  const Eigen::MatrixXd zc = concat_scores(zs_tgt, zt_tgt);
  const Eigen::MatrixXd lpt = log_softmax_rows(zc);
  const Eigen::MatrixXd lq = log_softmax_rows(zc.rightCols(k));
  Eigen::MatrixXd gt = lpt.array().exp();
  double vt = 0.0;
  for (Eigen::Index r = 0; r < nt; ++r) {
    // log T = log p_i - log q_i for any i in the second half.
    const double log_t = lpt(r, k) - lq(r, 0);
    bool hit = false;
    vt -= clamped(log_t, &hit, clamps);
    if (hit) {
      gt.row(r).setZero();
    } else {
      gt.row(r).tail(k) -= lq.row(r).array().exp().matrix();
    }
  }
  vt /= static_cast<double>(nt);
  gt /= static_cast<double>(nt);

  out.value = vs + vt;
  out.src = split(vs, gs, k);
  out.tgt = split(vt, gt, k);
  return out;
}

ClassWeights partial_weights(const Eigen::MatrixXd& zt_on_target, double xi) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in [0, 1]");
  if (zt_on_target.rows() == 0) throw std::invalid_argument("empty target batch");
  const Eigen::MatrixXd p = log_softmax_rows(zt_on_target).array().exp();
  ClassWeights omega = p.colwise().mean().transpose();
  const double top = omega.maxCoeff();
  if (!(top > 0.0)) return unit_weights(static_cast<std::size_t>(omega.size()));
  omega = (xi * omega.array() / top + (1.0 - xi)).matrix();
  return omega.cwiseMin(1.0).cwiseMax(0.0);
}

Gradients symmnets_gradients(const MlpScorer& model, const Eigen::MatrixXd& x_src,
                             std::span<const std::size_t> y_src, const Eigen::MatrixXd& x_tgt,
                             double lambda, const ClassWeights& omega, SymmVariant variant,
                             SymmLosses* losses, ClampCounter* clamps) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  const auto ns = x_src.rows(), nt = x_tgt.rows();
  Eigen::MatrixXd x(ns + nt, x_src.cols());
  x << x_src, x_tgt;
  const ForwardPass pass = model.forward_features(x);
  const Eigen::MatrixXd zs = model.head_scores(pass.features(), kSourceHead);
  const Eigen::MatrixXd zt = model.head_scores(pass.features(), kTargetHead);
  const auto k = zs.cols();
  const Eigen::MatrixXd zs_s = zs.topRows(ns), zt_s = zt.topRows(ns);
  const Eigen::MatrixXd zs_t = zs.bottomRows(nt), zt_t = zt.bottomRows(nt);

  // Head-side and psi-side gradients for each head, over the stacked batch.
  Eigen::MatrixXd head_s = Eigen::MatrixXd::Zero(ns + nt, k), head_t = head_s;
  Eigen::MatrixXd psi_s = head_s, psi_t = head_s;
  SymmLosses l;

  const LossGrad task_s = loss_task_src(zs_s, y_src, omega);
  l.task_s = task_s.value;
  head_s.topRows(ns) += task_s.grad;
  if (variant != SymmVariant::no_target_task) {
    const LossGrad task_t = loss_task_src(zt_s, y_src, omega);
    l.task_t = task_t.value;
    head_t.topRows(ns) += task_t.grad;
  }

  const SplitGrad conf_s = confuse_src(zs_s, zt_s, y_src, omega, clamps);
  l.confuse_src = conf_s.value;
  psi_s.topRows(ns) += conf_s.grad_s;
  psi_t.topRows(ns) += conf_s.grad_t;

  if (variant != SymmVariant::no_adversarial) {
    const SplitGrad conf_t = confuse_tgt(zs_t, zt_t);
    l.confuse_tgt = conf_t.value;
    psi_s.bottomRows(nt) += lambda * conf_t.grad_s;
    psi_t.bottomRows(nt) += lambda * conf_t.grad_t;

    const DiscrimGrad d = discrim(zs_s, zt_s, y_src, omega, zs_t, zt_t, clamps);
    l.discrim = d.value;
    head_s.topRows(ns) += d.src.grad_s;
    head_t.topRows(ns) += d.src.grad_t;
    head_s.bottomRows(nt) += d.tgt.grad_s;
    head_t.bottomRows(nt) += d.tgt.grad_t;
  }

  Gradients grads = model.zero_gradients();
  model.backward(pass,
                 {{kSourceHead, head_s, 1.0, 0.0},
                  {kTargetHead, head_t, 1.0, 0.0},
                  {kSourceHead, psi_s, 0.0, 1.0},
                  {kTargetHead, psi_t, 0.0, 1.0}},
                 grads);
  if (losses) *losses = l;
  return grads;
}

void add_symm_heads(MlpScorer& model, std::size_t k) {
  model.add_head(kSourceHead, k);
  model.add_head(kTargetHead, k);
}

void openset_adapt(MlpScorer& model, std::size_t k_shared, std::size_t dataset_classes) {
  if (k_shared < 1) throw std::invalid_argument("open-set mode needs at least one shared class");
  if (k_shared >= dataset_classes) {
    throw std::invalid_argument("shared class count must be below the source class count");
  }
  model.resize_head(kSourceHead, k_shared + 1);
  model.resize_head(kTargetHead, k_shared + 1);
}

std::size_t openset_label(std::size_t y, std::size_t k_shared) {
  return y < k_shared ? y : k_shared;
}

OpenSetSampler::OpenSetSampler(std::span<const std::size_t> labels, std::size_t k_shared,
                               double nu, std::size_t batch_size, std::uint64_t seed)
    : by_class_(k_shared + 1), batch_size_(batch_size), rng_(seed) {
  if (!(nu >= 1.0) || !std::isfinite(nu)) throw ConfigError("nu must be a finite value >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class_[openset_label(labels[i], k_shared)].push_back(i);
  }
  if (by_class_.back().empty()) throw ConfigError("source set has no aggregated-class examples");
  for (std::size_t c = 0; c < k_shared; ++c) {
    if (by_class_[c].empty()) throw ConfigError("shared class " + std::to_string(c) + " has no source examples");
  }
  p_aggregated_ = nu / (static_cast<double>(k_shared) + nu);
}

std::vector<std::size_t> OpenSetSampler::next_batch() {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t k_shared = by_class_.size() - 1;
  std::vector<std::size_t> batch(batch_size_);
  for (auto& idx : batch) {
    std::size_t c = k_shared;
    if (u(rng_) >= p_aggregated_) {
      c = std::uniform_int_distribution<std::size_t>(0, k_shared - 1)(rng_);
    }
    const auto& bucket = by_class_[c];
    idx = bucket[std::uniform_int_distribution<std::size_t>(0, bucket.size() - 1)(rng_)];
  }
  return batch;
}

OpenSetScores eval_openset(std::span<const std::size_t> predictions,
                           std::span<const std::size_t> labels, std::size_t k_shared) {
  if (predictions.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  const std::size_t classes = k_shared + 1;
  std::vector<std::size_t> hit(classes, 0), count(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw std::invalid_argument("label outside the open-set range");
    ++count[labels[i]];
    if (predictions[i] == labels[i]) ++hit[labels[i]];
  }
  OpenSetScores s;
  s.per_class.assign(classes, std::numeric_limits<double>::quiet_NaN());
  double all = 0.0, shared = 0.0;
  std::size_t n_all = 0, n_shared = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) {
      s.absent.push_back(c);
      continue;
    }
    s.per_class[c] = static_cast<double>(hit[c]) / static_cast<double>(count[c]);
    all += s.per_class[c];
    ++n_all;
    if (c < k_shared) {
      shared += s.per_class[c];
      ++n_shared;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.os = n_all ? all / static_cast<double>(n_all) : nan;
  s.os_star = n_shared ? shared / static_cast<double>(n_shared) : nan;
  s.unknown_acc = s.per_class[k_shared];
  return s;
}

namespace {

Eigen::MatrixXd row_of(std::span<const double> z) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(z.size()));
  for (std::size_t j = 0; j < z.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = z[j];
  return m;
}

std::vector<double> flat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<double> out(a.data(), a.data() + a.size());
  out.insert(out.end(), b.data(), b.data() + b.size());
  return out;
}

}  // namespace

std::vector<AuditedLoss> symmnets_losses(std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  std::vector<AuditedLoss> out;
  out.push_back({"task_src", k,
                 [k](std::span<const double> z, std::size_t y) {
                   const std::size_t labels[1] = {y};
                   return loss_task_src(row_of(z), labels, unit_weights(k)).value;
                 },
                 [k](std::span<const double> z, std::size_t y) {
                   const std::size_t labels[1] = {y};
                   const auto g = loss_task_src(row_of(z), labels, unit_weights(k)).grad;
                   return std::vector<double>(g.data(), g.data() + g.size());
                 }});
  out.push_back({"confuse_src", 2 * k,
                 [k, kk](std::span<const double> z, std::size_t y) {
                   const std::size_t labels[1] = {y};
                   const auto m = row_of(z);
                   return confuse_src(m.leftCols(kk), m.rightCols(kk), labels, unit_weights(k)).value;
                 },
                 [k, kk](std::span<const double> z, std::size_t y) {
                   const std::size_t labels[1] = {y};
                   const auto m = row_of(z);
                   const auto g = confuse_src(m.leftCols(kk), m.rightCols(kk), labels, unit_weights(k));
                   return flat(g.grad_s, g.grad_t);
                 }});
  out.push_back({"confuse_tgt", 2 * k,
                 [kk](std::span<const double> z, std::size_t) {
                   const auto m = row_of(z);
                   return confuse_tgt(m.leftCols(kk), m.rightCols(kk)).value;
                 },
                 [kk](std::span<const double> z, std::size_t) {
                   const auto m = row_of(z);
                   const auto g = confuse_tgt(m.leftCols(kk), m.rightCols(kk));
                   return flat(g.grad_s, g.grad_t);
                 }});
  out.push_back({"discrim", 4 * k,
                 [k, kk](std::span<const double> z, std::size_t y) {
                   const std::size_t labels[1] = {y};
                   const auto m = row_of(z);
                   return discrim(m.middleCols(0, kk), m.middleCols(kk, kk), labels, unit_weights(k),
                                  m.middleCols(2 * kk, kk), m.middleCols(3 * kk, kk))
                       .value;
                 },
                 [k, kk](std::span<const double> z, std::size_t y) {
                   const std::size_t labels[1] = {y};
                   const auto m = row_of(z);
                   const auto d = discrim(m.middleCols(0, kk), m.middleCols(kk, kk), labels,
                                          unit_weights(k), m.middleCols(2 * kk, kk),
                                          m.middleCols(3 * kk, kk));
                   auto g = flat(d.src.grad_s, d.src.grad_t);
                   const auto gt = flat(d.tgt.grad_s, d.tgt.grad_t);
                   g.insert(g.end(), gt.begin(), gt.end());
                   return g;
                 }});
  return out;
}

}  // namespace mcsd
