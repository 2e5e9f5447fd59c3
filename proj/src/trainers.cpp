#include "mcsd/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mcsd/errors.hpp"
#include "mcsd/margin.hpp"

namespace mcsd {

namespace {

std::vector<double> row_of(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

void set_row(Eigen::MatrixXd& m, Eigen::Index r, const std::vector<double>& v, double scale) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += scale * v[static_cast<std::size_t>(c)];
}

Eigen::MatrixXd pad_rows(const Eigen::MatrixXd& top, Eigen::Index total) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(total, top.cols());
  out.topRows(top.rows()) = top;
  return out;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

double mean_mcsd(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, RampParam rho) {
  std::vector<double> v(static_cast<std::size_t>(z1.rows()));
  for (Eigen::Index r = 0; r < z1.rows(); ++r) {
    v[static_cast<std::size_t>(r)] = mcsd_pointwise(ScoreVector(row_of(z1, r)), ScoreVector(row_of(z2, r)), rho);
  }
  return pairwise_sum(v) / static_cast<double>(v.size());
}

double mean_margin_error(const Eigen::MatrixXd& z, std::span<const std::size_t> y, RampParam rho) {
  std::vector<double> v(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    v[i] = source_margin_loss(ScoreVector(row_of(z, static_cast<Eigen::Index>(i))), Label(y[i]), rho);
  }
  return pairwise_sum(v) / static_cast<double>(v.size());
}

std::vector<std::size_t> indices(const std::vector<Label>& labels) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (Label l : labels) out.push_back(l.index());
  return out;
}

bool all_finite(const nlohmann::json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_object() || j.is_array()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Appends one JSON object per line, flushed as it goes.
class MetricsSink {
 public:
  MetricsSink(const std::string& dir, Method method, std::uint64_t seed) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / (to_string(method) + "_seed" + std::to_string(seed) + ".jsonl");
    out_.open(path, std::ios::out | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  void write(const nlohmann::json& record) {
    if (!out_.is_open()) return;
    out_ << record.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct Batch {
  std::vector<std::size_t> src;
  std::vector<std::size_t> tgt;
};

/// Full batch for small data, otherwise shuffled mini-batches covering the
/// larger domain once per epoch with the smaller one cycled.
class EpochBatches {
 public:
  EpochBatches(const ExperimentConfig& cfg, std::size_t ns, std::size_t nt, std::uint64_t seed)
      : ns_(ns), nt_(nt), bs_(cfg.batch_size), steps_(cfg.steps_per_epoch),
        full_(ns + nt <= cfg.full_batch_limit), rng_(mix(seed ^ 0x5ba7c4e5ULL)) {}

  std::vector<Batch> next() {
    std::vector<Batch> out;
    if (full_) {
      Batch b{std::vector<std::size_t>(ns_), std::vector<std::size_t>(nt_)};
      std::iota(b.src.begin(), b.src.end(), std::size_t{0});
      std::iota(b.tgt.begin(), b.tgt.end(), std::size_t{0});
      out.assign(steps_, b);
      return out;
    }
    const std::vector<std::size_t> ps = permutation(ns_), pt = permutation(nt_);
    const std::size_t steps = (std::max(ns_, nt_) + bs_ - 1) / bs_;
    for (std::size_t s = 0; s < steps; ++s) {
      Batch b;
      for (std::size_t i = 0; i < bs_; ++i) {
        b.src.push_back(ps[(s * bs_ + i) % ns_]);
        b.tgt.push_back(pt[(s * bs_ + i) % nt_]);
      }
      out.push_back(std::move(b));
    }
    return out;
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::shuffle(p.begin(), p.end(), rng_);
    return p;
  }

 private:
  std::size_t ns_, nt_, bs_, steps_;
  bool full_;
  std::mt19937_64 rng_;
};

/// Everything a method plugs into the shared epoch loop.
struct MethodHooks {
  /// Called once per epoch before the batches, with the epoch's trade-offs.
  std::function<void(nlohmann::json& record, double lambda, double xi)> before_epoch;
  /// One optimizer step's gradients; fills `losses` with named values.
  std::function<Gradients(const Batch&, double lambda, double zeta, nlohmann::json& losses,
                          ClampCounter& clamps)>
      gradients;
  /// Per-epoch evaluation; must set "source_acc" and "target_acc".
  std::function<void(nlohmann::json& record)> evaluate;
  /// Optional replacement for EpochBatches (open-set sampling).
  std::function<std::vector<Batch>()> batches;
};

struct Data {
  Eigen::MatrixXd xs, xt;
  std::vector<std::size_t> ys;
  std::vector<Label> yt_hidden;
  std::size_t classes;
};

Data unpack(const DomainPair& pair) {
  return {to_matrix(pair.source().points()), to_matrix(pair.target().points()), pair.source_labels(),
          eval::hidden_labels(pair), pair.meta().classes};
}

RunResult train_loop(const ExperimentConfig& cfg, const Data& data, std::uint64_t seed,
                     MlpScorer& model, const MethodHooks& hooks) {
  RunResult result;
  result.method = cfg.method;
  result.seed = seed;
  MetricsSink sink(cfg.output_dir, cfg.method, seed);
  SgdMomentum opt(model, cfg.schedules.momentum, cfg.head_lr_multiplier);
  EpochBatches batcher(cfg, static_cast<std::size_t>(data.xs.rows()),
                       static_cast<std::size_t>(data.xt.rows()), seed);
  const double chance = 1.0 / static_cast<double>(data.classes);
  const std::size_t checkpoint = (cfg.epochs + 1) / 2;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double p = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
    const double lr = lr_schedule(p, cfg.schedules);
    const double lambda = lambda_schedule(p, cfg.schedules);
    const double zeta = resolve_policy(cfg.zeta_policy, lambda);
    const double xi = resolve_policy(cfg.xi_policy, lambda);

    nlohmann::json record{{"epoch", epoch}, {"p", p},       {"lr", lr},
                          {"lambda", lambda}, {"zeta", zeta}, {"xi", xi}};
    if (hooks.before_epoch) hooks.before_epoch(record, lambda, xi);

    const std::vector<Batch> batches = hooks.batches ? hooks.batches() : batcher.next();
    ClampCounter clamps;
    nlohmann::json mean_losses = nlohmann::json::object();
    bool finite = true;
    for (const Batch& b : batches) {
      nlohmann::json losses = nlohmann::json::object();
      const Gradients g = hooks.gradients(b, lambda, zeta, losses, clamps);
      if (!std::isfinite(g.squared_norm()) || !all_finite(losses)) {
        finite = false;
        break;
      }
      opt.step(model, g, lr);
      for (const auto& [name, v] : losses.items()) {
        const double prev = mean_losses.contains(name) ? mean_losses[name].get<double>() : 0.0;
        mean_losses[name] = prev + v.get<double>() / static_cast<double>(batches.size());
      }
    }
    record["losses"] = mean_losses;
    record["clamps"] = clamps.count;
    result.epochs_run = epoch + 1;

    if (!finite) {
      result.status = "did_not_converge";
      result.reason = "non-finite loss or gradient at epoch " + std::to_string(epoch);
      record["status"] = result.status;
      sink.write(record);
      result.records.push_back(std::move(record));
      break;
    }
    hooks.evaluate(record);
    result.source_acc = record["source_acc"].get<double>();
    result.target_acc = record["target_acc"].get<double>();
    const bool stalled = epoch + 1 == checkpoint && result.target_acc < cfg.dnc_chance_factor * chance;
    if (stalled) {
      result.status = "did_not_converge";
      result.reason = "target accuracy " + std::to_string(result.target_acc) + " below " +
                      std::to_string(cfg.dnc_chance_factor) + "x chance after half the epochs";
      record["status"] = result.status;
    }
    sink.write(record);
    result.records.push_back(std::move(record));
    if (stalled) break;
  }
  return result;
}

}  // namespace

nlohmann::json RunResult::to_json() const {
  nlohmann::json j{{"method", to_string(method)}, {"seed", seed},           {"status", status},
                   {"epochs_run", epochs_run},    {"source_acc", source_acc}, {"target_acc", target_acc}};
  if (!reason.empty()) j["reason"] = reason;
  if (target_acc_fs) j["target_acc_fs"] = *target_acc_fs;
  if (target_acc_ft) j["target_acc_ft"] = *target_acc_ft;
  if (openset) {
    j["os"] = openset->os;
    j["os_star"] = openset->os_star;
    j["unknown_acc"] = openset->unknown_acc;
    j["absent_classes"] = openset->absent;
  }
  if (!omega.empty()) j["omega"] = omega;
  return j;
}

Surrogate surrogate_of(Method m) {
  switch (m) {
    case Method::mcdal_l1: return Surrogate::l1;
    case Method::mcdal_kl: return Surrogate::kl;
    case Method::mcdal_ce: return Surrogate::ce;
    case Method::mcdal_mdd_variant: return Surrogate::mdd_variant;
    case Method::mcdal_dann: return Surrogate::dann;
    default: throw std::invalid_argument(to_string(m) + " is not a McDalNets method");
  }
}

std::vector<std::size_t> predict(const Eigen::MatrixXd& scores) {
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
  }
  return out;
}

double accuracy(std::span<const std::size_t> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  if (labels.empty()) throw std::invalid_argument("no labels to score");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i].index();
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double resolve_policy(const std::string& policy, double lambda) {
  if (policy == "lambda") return lambda;
  return std::stod(policy);
}

void add_mcdal_heads(MlpScorer& model, Surrogate surrogate, std::size_t k) {
  model.add_head(kTaskHead, k);
  if (surrogate == Surrogate::dann) {
    model.add_head(kDomainHead, 1);
  } else {
    model.add_head(kAuxFirst, k);
    model.add_head(kAuxSecond, k);
  }
}

Gradients mcdal_gradients(const MlpScorer& model, Surrogate surrogate, const Eigen::MatrixXd& x_src,
                          std::span<const std::size_t> y_src, const Eigen::MatrixXd& x_tgt,
                          double zeta, bool zeta_scales_heads, double aux_weight,
                          McdalLosses* losses, ClampCounter* clamps) {
  const Eigen::Index ns = x_src.rows(), nt = x_tgt.rows(), n = ns + nt;
  if (ns == 0 || nt == 0) throw std::invalid_argument("empty batch");
  Eigen::MatrixXd x(n, x_src.cols());
  x << x_src, x_tgt;
  const ForwardPass pass = model.forward_features(x);
  const Eigen::MatrixXd& feats = pass.features();
  const Eigen::MatrixXd zf = model.head_scores(feats, kTaskHead);
  const std::size_t k = static_cast<std::size_t>(zf.cols());
  const ClassWeights ones = unit_weights(k);

  McdalLosses l;
  const LossGrad task = loss_task_src(zf.topRows(ns), y_src, ones);
  l.task = task.value;
  std::vector<HeadSignal> signals{{kTaskHead, pad_rows(task.grad, n), 1.0, 1.0}};
  std::vector<std::pair<std::string, Eigen::MatrixXd>> disagreement;

  const double ws = 1.0 / static_cast<double>(ns), wt = 1.0 / static_cast<double>(nt);
  if (surrogate == Surrogate::dann) {
    const Eigen::MatrixXd zd = model.head_scores(feats, kDomainHead);
    Eigen::MatrixXd dd = Eigen::MatrixXd::Zero(n, 1);
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r < ns) {
        l.src_term += ws * dann_src_point(zd(r, 0), clamps);
        dd(r, 0) = -ws * dann_src_point_grad(zd(r, 0));
      } else {
        l.tgt_term += wt * dann_tgt_point(zd(r, 0), clamps);
        dd(r, 0) = wt * dann_tgt_point_grad(zd(r, 0));
      }
    }
    disagreement.emplace_back(kDomainHead, std::move(dd));
  } else {
    const Eigen::MatrixXd z1 = model.head_scores(feats, kAuxFirst);
    const Eigen::MatrixXd z2 = model.head_scores(feats, kAuxSecond);
    const LossGrad aux1 = loss_task_src(z1.topRows(ns), y_src, ones);
    const LossGrad aux2 = loss_task_src(z2.topRows(ns), y_src, ones);
    l.aux = aux1.value + aux2.value;
    if (aux_weight > 0.0) {
      signals.push_back({kAuxFirst, aux_weight * pad_rows(aux1.grad, n), 1.0, 0.0});
      signals.push_back({kAuxSecond, aux_weight * pad_rows(aux2.grad, n), 1.0, 0.0});
    }
    Eigen::MatrixXd d1 = Eigen::MatrixXd::Zero(n, z1.cols()), d2 = d1;
    for (Eigen::Index r = 0; r < n; ++r) {
      const bool src = r < ns;
      const double w = src ? -ws : wt;
      const std::vector<double> a = row_of(z1, r), b = row_of(z2, r);
      double value = 0.0;
      if (surrogate == Surrogate::mdd_variant) {
        value = src ? mdd_src_point(a, b) : mdd_tgt_point(a, b, clamps);
        set_row(d2, r, src ? mdd_src_point_grad(a, b) : mdd_tgt_point_grad(a, b), w);
      } else {
        const ProbVector p1 = softmax(std::span<const double>(a)), p2 = softmax(std::span<const double>(b));
        std::pair<std::vector<double>, std::vector<double>> g;
        switch (surrogate) {
          case Surrogate::l1:
            value = sur_l1(p1, p2);
            g = sur_l1_grad(a, b);
            break;
          case Surrogate::kl:
            value = sur_kl(p1, p2);
            g = sur_kl_grad(a, b);
            break;
          default:
            value = sur_ce(p1, p2);
            g = sur_ce_grad(a, b);
            break;
        }
        set_row(d1, r, g.first, w);
        set_row(d2, r, g.second, w);
      }
      (src ? l.src_term : l.tgt_term) += (src ? ws : wt) * value;
    }
    disagreement.emplace_back(kAuxFirst, std::move(d1));
    disagreement.emplace_back(kAuxSecond, std::move(d2));
  }

  Gradients grads = model.zero_gradients();
  model.backward(pass, reversal_signals(std::move(signals), disagreement, zeta, zeta_scales_heads), grads);
  if (losses) *losses = l;
  return grads;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  return run_experiment(cfg, build_dataset(cfg, seed), seed);
}

RunResult run_experiment(const ExperimentConfig& cfg, const DomainPair& data, std::uint64_t seed) {
  cfg.validate();
  if (cfg.method == Method::source_only) return run_source_only(cfg, data, seed);
  if (is_mcdal(cfg.method)) return run_mcdalnet(cfg, data, seed);
  return run_symmnets(cfg, data, seed);
}

namespace {

/// Source-only and McDalNets share the single-task-head evaluation.
void evaluate_task_head(const MlpScorer& model, const Data& d, RampParam rho, bool aux_pair,
                        nlohmann::json& record) {
  const Eigen::MatrixXd fs = model.forward_features(d.xs).features();
  const Eigen::MatrixXd ft = model.forward_features(d.xt).features();
  const Eigen::MatrixXd zs = model.head_scores(fs, kTaskHead), zt = model.head_scores(ft, kTaskHead);
  std::vector<Label> ys_labels;
  for (std::size_t y : d.ys) ys_labels.emplace_back(y);
  record["source_acc"] = accuracy(predict(zs), ys_labels);
  record["target_acc"] = accuracy(predict(zt), d.yt_hidden);
  record["source_margin_err"] = mean_margin_error(zs, d.ys, rho);
  if (aux_pair) {
    const double src = mean_mcsd(model.head_scores(fs, kAuxFirst), model.head_scores(fs, kAuxSecond), rho);
    const double tgt = mean_mcsd(model.head_scores(ft, kAuxFirst), model.head_scores(ft, kAuxSecond), rho);
    record["mcsd_src"] = src;
    record["mcsd_tgt"] = tgt;
    record["divergence"] = tgt - src;
  }
}

}  // namespace

RunResult run_source_only(const ExperimentConfig& cfg, const DomainPair& pair, std::uint64_t seed) {
  const Data d = unpack(pair);
  MlpScorer model(pair.source().dim(), cfg.widths, seed);
  model.add_head(kTaskHead, d.classes);
  const RampParam rho(cfg.rho);
  const ClassWeights ones = unit_weights(d.classes);

  MethodHooks hooks;
  hooks.gradients = [&](const Batch& b, double, double, nlohmann::json& losses, ClampCounter&) {
    const Eigen::MatrixXd x = gather(d.xs, b.src);
    const std::vector<std::size_t> y = gather(d.ys, b.src);
    const ForwardPass pass = model.forward_features(x);
    const LossGrad task = loss_task_src(model.head_scores(pass.features(), kTaskHead), y, ones);
    losses["task"] = task.value;
    Gradients g = model.zero_gradients();
    model.backward(pass, {{kTaskHead, task.grad, 1.0, 1.0}}, g);
    return g;
  };
  hooks.evaluate = [&](nlohmann::json& record) { evaluate_task_head(model, d, rho, false, record); };
  RunResult r = train_loop(cfg, d, seed, model, hooks);
  if (pair.mode() == Mode::openset && r.converged()) {
    const Eigen::MatrixXd zt = model.head_scores(model.forward_features(d.xt).features(), kTaskHead);
    r.openset = eval_openset(predict(zt), indices(d.yt_hidden), pair.meta().k_shared);
  }
  return r;
}

RunResult run_mcdalnet(const ExperimentConfig& cfg, const DomainPair& pair, std::uint64_t seed) {
  const Surrogate sur = surrogate_of(cfg.method);
  const Data d = unpack(pair);
  MlpScorer model(pair.source().dim(), cfg.widths, seed);
  add_mcdal_heads(model, sur, d.classes);
  const RampParam rho(cfg.rho);
  const bool scale_heads = cfg.zeta_scope == "both";

  MethodHooks hooks;
  hooks.gradients = [&](const Batch& b, double, double zeta, nlohmann::json& losses, ClampCounter& clamps) {
    McdalLosses l;
    const std::vector<std::size_t> y = gather(d.ys, b.src);
    Gradients g = mcdal_gradients(model, sur, gather(d.xs, b.src), y, gather(d.xt, b.tgt), zeta,
                                  scale_heads, cfg.aux_weight, &l, &clamps);
    losses["task"] = l.task;
    losses["aux"] = l.aux;
    losses["sur_src"] = l.src_term;
    losses["sur_tgt"] = l.tgt_term;
    losses["surrogate_gap"] = l.divergence();
    return g;
  };
  hooks.evaluate = [&](nlohmann::json& record) {
    evaluate_task_head(model, d, rho, sur != Surrogate::dann, record);
  };
  return train_loop(cfg, d, seed, model, hooks);
}

RunResult run_symmnets(const ExperimentConfig& cfg, const DomainPair& pair, std::uint64_t seed) {
  const Data d = unpack(pair);
  const SymmVariant variant = cfg.method == Method::symmnets_v2_no_Lt    ? SymmVariant::no_target_task
                              : cfg.method == Method::symmnets_v2_no_adv ? SymmVariant::no_adversarial
                                                                         : SymmVariant::full;
  // Without the target task loss f_t is never trained on labels, so the
  // ablation reports from f_s.
  const std::string eval_head = variant == SymmVariant::no_target_task ? kSourceHead
                                : cfg.eval_head == "fs"                ? kSourceHead
                                                                       : kTargetHead;
  const bool openset = pair.mode() == Mode::openset;
  const std::size_t k_shared = pair.meta().k_shared;

  MlpScorer model(pair.source().dim(), cfg.widths, seed);
  if (openset) {
    add_symm_heads(model, k_shared);
    openset_adapt(model, k_shared, d.classes);
  } else {
    add_symm_heads(model, d.classes);
  }
  const std::size_t outputs = model.head(kSourceHead).out();
  const RampParam rho(cfg.rho);
  const bool weighting = pair.mode() == Mode::partial && cfg.partial_weighting;
  ClassWeights omega = unit_weights(outputs);

  MethodHooks hooks;
  hooks.before_epoch = [&](nlohmann::json& record, double, double xi) {
    if (weighting) {
      omega = partial_weights(model.head_scores(model.forward_features(d.xt).features(), kTargetHead), xi);
    }
    if (pair.mode() == Mode::partial) {
      record["omega"] = std::vector<double>(omega.data(), omega.data() + omega.size());
    }
  };

  std::optional<OpenSetSampler> sampler;
  std::mt19937_64 tgt_rng(mix(seed ^ 0x7a3c9e11ULL));
  if (openset) {
    sampler.emplace(d.ys, k_shared, cfg.nu, cfg.batch_size, mix(seed ^ 0x0b5e7a11ULL));
    hooks.batches = [&] {
      const std::size_t ns = d.ys.size(), nt = static_cast<std::size_t>(d.xt.rows());
      const std::size_t steps = (ns + cfg.batch_size - 1) / cfg.batch_size;
      std::vector<std::size_t> perm(nt);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), tgt_rng);
      std::vector<Batch> out;
      for (std::size_t s = 0; s < steps; ++s) {
        Batch b{sampler->next_batch(), {}};
        for (std::size_t i = 0; i < cfg.batch_size; ++i) b.tgt.push_back(perm[(s * cfg.batch_size + i) % nt]);
        out.push_back(std::move(b));
      }
      return out;
    };
  }

  hooks.gradients = [&](const Batch& b, double lambda, double, nlohmann::json& losses, ClampCounter& clamps) {
    SymmLosses l;
    const std::vector<std::size_t> y = gather(d.ys, b.src);
    Gradients g = symmnets_gradients(model, gather(d.xs, b.src), y, gather(d.xt, b.tgt), lambda, omega,
                                     variant, &l, &clamps);
    losses["task_s"] = l.task_s;
    losses["task_t"] = l.task_t;
    losses["confuse_src"] = l.confuse_src;
    losses["confuse_tgt"] = l.confuse_tgt;
    losses["discrim"] = l.discrim;
    return g;
  };

  std::vector<Label> ys_labels;
  for (std::size_t y : d.ys) ys_labels.emplace_back(y);
  hooks.evaluate = [&](nlohmann::json& record) {
    const Eigen::MatrixXd fs = model.forward_features(d.xs).features();
    const Eigen::MatrixXd ft = model.forward_features(d.xt).features();
    const Eigen::MatrixXd src_s = model.head_scores(fs, kSourceHead), src_t = model.head_scores(fs, kTargetHead);
    const Eigen::MatrixXd tgt_s = model.head_scores(ft, kSourceHead), tgt_t = model.head_scores(ft, kTargetHead);
    const bool use_fs = eval_head == kSourceHead;
    const double acc_fs = accuracy(predict(tgt_s), d.yt_hidden), acc_ft = accuracy(predict(tgt_t), d.yt_hidden);
    record["source_acc"] = accuracy(predict(use_fs ? src_s : src_t), ys_labels);
    record["target_acc"] = use_fs ? acc_fs : acc_ft;
    record["target_acc_fs"] = acc_fs;
    record["target_acc_ft"] = acc_ft;
    // Instance of the pairwise bound MCSD_P(fs, ft) <= E_P(fs) + E_P(ft).
    const double src = mean_mcsd(src_s, src_t, rho), tgt = mean_mcsd(tgt_s, tgt_t, rho);
    record["mcsd_src"] = src;
    record["mcsd_tgt"] = tgt;
    record["divergence"] = tgt - src;
    record["margin_err_fs"] = mean_margin_error(src_s, d.ys, rho);
    record["margin_err_ft"] = mean_margin_error(src_t, d.ys, rho);
    if (openset) {
      const OpenSetScores os = eval_openset(predict(use_fs ? tgt_s : tgt_t), indices(d.yt_hidden), k_shared);
      record["os"] = os.os;
      record["os_star"] = os.os_star;
      record["unknown_acc"] = os.unknown_acc;
    }
  };

  RunResult r = train_loop(cfg, d, seed, model, hooks);
  if (!r.records.empty() && r.records.back().contains("target_acc_fs")) {
    r.target_acc_fs = r.records.back()["target_acc_fs"].get<double>();
    r.target_acc_ft = r.records.back()["target_acc_ft"].get<double>();
  }
  if (openset && !r.records.empty() && r.records.back().contains("os")) {
    const Eigen::MatrixXd ft = model.forward_features(d.xt).features();
    r.openset = eval_openset(predict(model.head_scores(ft, eval_head)), indices(d.yt_hidden), k_shared);
  }
  if (pair.mode() == Mode::partial) r.omega.assign(omega.data(), omega.data() + omega.size());
  return r;
}

}  // namespace mcsd
