#include "mcsd/neural.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "mcsd/errors.hpp"

namespace mcsd {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void add_into(Dense& acc, const Eigen::MatrixXd& dw, const Eigen::VectorXd& db, double scale) {
  acc.w.noalias() += scale * dw;
  acc.b.noalias() += scale * db;
}

template <typename Fn>
void for_each_tensor(std::vector<Dense>& psi, std::map<std::string, Dense>& heads, Fn&& fn) {
  for (auto& l : psi) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& [name, h] : heads) {
    fn(h.w);
    fn(h.b);
  }
}

}  // namespace

void Gradients::set_zero() {
  for (auto& l : psi) {
    l.w.setZero();
    l.b.setZero();
  }
  for (auto& [name, h] : heads) {
    h.w.setZero();
    h.b.setZero();
  }
}

Eigen::VectorXd Gradients::flatten() const {
  std::size_t n = 0;
  for (const auto& l : psi) n += l.parameter_count();
  for (const auto& [name, h] : heads) n += h.parameter_count();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) out[at++] = m(i, j);
    }
  };
  for (const auto& l : psi) {
    put(l.w);
    put(l.b);
  }
  for (const auto& [name, h] : heads) {
    put(h.w);
    put(h.b);
  }
  return out;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& l : psi) s += l.w.squaredNorm() + l.b.squaredNorm();
  for (const auto& [name, h] : heads) s += h.w.squaredNorm() + h.b.squaredNorm();
  return s;
}

MlpScorer::MlpScorer(std::size_t input_dim, std::vector<std::size_t> widths, std::uint64_t seed)
    : input_dim_(input_dim), seed_(seed) {
  if (input_dim == 0) throw DimensionError("input dimension must be positive");
  std::size_t in = input_dim;
  for (std::size_t w : widths) {
    if (w == 0) throw DimensionError("layer width must be positive");
    psi_.push_back(make_layer(in, w, HeadInit::uniform));
    in = w;
  }
}

MlpScorer MlpScorer::standard(std::size_t input_dim, std::uint64_t seed) {
  return MlpScorer(input_dim, {32, 32, 16}, seed);
}

Dense MlpScorer::make_layer(std::size_t in, std::size_t out, HeadInit init) {
  Dense d{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
  const std::uint64_t stream = splitmix64(seed_ ^ splitmix64(draws_++));
  if (init == HeadInit::zero) return d;
  std::mt19937_64 rng(stream);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index j = 0; j < d.w.cols(); ++j) {
    for (Eigen::Index i = 0; i < d.w.rows(); ++i) d.w(i, j) = u(rng);
  }
  for (Eigen::Index i = 0; i < d.b.size(); ++i) d.b[i] = u(rng);
  return d;
}

void MlpScorer::add_head(const std::string& name, std::size_t outputs, HeadInit init) {
  if (has_head(name)) throw std::invalid_argument("head '" + name + "' already exists");
  if (outputs == 0) throw DimensionError("head needs at least one output");
  heads_.emplace(name, make_layer(feature_dim(), outputs, init));
}

void MlpScorer::resize_head(const std::string& name, std::size_t outputs) {
  if (!has_head(name)) throw std::out_of_range("unknown head '" + name + "'");
  if (outputs == 0) throw DimensionError("head needs at least one output");
  heads_.at(name) = make_layer(feature_dim(), outputs, HeadInit::uniform);
}

const Dense& MlpScorer::head(const std::string& name) const {
  const auto it = heads_.find(name);
  if (it == heads_.end()) throw std::out_of_range("unknown head '" + name + "'");
  return it->second;
}

Dense& MlpScorer::head(const std::string& name) {
  const auto it = heads_.find(name);
  if (it == heads_.end()) throw std::out_of_range("unknown head '" + name + "'");
  return it->second;
}

std::vector<std::string> MlpScorer::head_names() const {
  std::vector<std::string> names;
  for (const auto& [name, h] : heads_) names.push_back(name);
  return names;
}

std::size_t MlpScorer::feature_dim() const noexcept {
  return psi_.empty() ? input_dim_ : psi_.back().out();
}

std::size_t MlpScorer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : psi_) n += l.parameter_count();
  for (const auto& [name, h] : heads_) n += h.parameter_count();
  return n;
}

ForwardPass MlpScorer::forward_features(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim_) {
    throw DimensionError("expected " + std::to_string(input_dim_) + " input features, got " +
                         std::to_string(x.cols()));
  }
  ForwardPass pass;
  pass.activations.reserve(psi_.size() + 1);
  pass.activations.push_back(x);
  for (const auto& l : psi_) {
    Eigen::MatrixXd z = pass.activations.back() * l.w.transpose();
    z.rowwise() += l.b.transpose();
    // tanh through the vectorized exp; Eigen's double tanh is a scalar libm call.
    const Eigen::ArrayXXd e = (2.0 * z.array().min(40.0)).exp();
    pass.activations.push_back((1.0 - 2.0 / (e + 1.0)).matrix());
  }
  return pass;
}

Eigen::MatrixXd MlpScorer::head_scores(const Eigen::MatrixXd& features,
                                       const std::string& name) const {
  const Dense& h = head(name);
  Eigen::MatrixXd z = features * h.w.transpose();
  z.rowwise() += h.b.transpose();
  return z;
}

ScoreVector MlpScorer::forward(std::span<const double> x, const std::string& name) const {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  const Eigen::MatrixXd z = head_scores(forward_features(row).features(), name);
  return ScoreVector(std::vector<double>(z.data(), z.data() + z.size()));
}

Gradients MlpScorer::zero_gradients() const {
  Gradients g;
  for (const auto& l : psi_) {
    g.psi.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()), Eigen::VectorXd::Zero(l.b.size())});
  }
  for (const auto& [name, h] : heads_) {
    g.heads.emplace(name, Dense{Eigen::MatrixXd::Zero(h.w.rows(), h.w.cols()),
                                Eigen::VectorXd::Zero(h.b.size())});
  }
  return g;
}

void MlpScorer::backward(const ForwardPass& pass, const std::vector<HeadSignal>& signals,
                         Gradients& grads) const {
  const Eigen::MatrixXd& f = pass.features();
  Eigen::MatrixXd d_feat = Eigen::MatrixXd::Zero(f.rows(), f.cols());
  bool psi_touched = false;
  for (const auto& s : signals) {
    const Dense& h = head(s.head);
    if (s.d_scores.rows() != f.rows() || static_cast<std::size_t>(s.d_scores.cols()) != h.out()) {
      throw DimensionError("gradient signal for head '" + s.head + "' has the wrong shape");
    }
    if (s.to_head != 0.0) {
      add_into(grads.heads.at(s.head), s.d_scores.transpose() * f,
               s.d_scores.colwise().sum().transpose(), s.to_head);
    }
    if (s.to_psi != 0.0) {
      d_feat.noalias() += s.to_psi * (s.d_scores * h.w);
      psi_touched = true;
    }
  }
  if (!psi_touched) return;
  Eigen::MatrixXd delta = d_feat;
  for (std::size_t l = psi_.size(); l-- > 0;) {
    const Eigen::MatrixXd& a_out = pass.activations[l + 1];
    const Eigen::MatrixXd& a_in = pass.activations[l];
    delta = (delta.array() * (1.0 - a_out.array().square())).matrix();
    add_into(grads.psi[l], delta.transpose() * a_in, delta.colwise().sum().transpose(), 1.0);
    if (l > 0) delta = delta * psi_[l].w;
  }
}

Eigen::VectorXd MlpScorer::flatten() const {
  Gradients view;
  view.psi = psi_;
  view.heads = heads_;
  return view.flatten();
}

void MlpScorer::unflatten(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count()) {
    throw DimensionError("parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  for_each_tensor(psi_, heads_, [&](auto& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = theta[at++];
    }
  });
}

namespace {
constexpr char kMagic[8] = {'M', 'C', 'S', 'D', 'C', 'K', 'P', '1'};
}

void MlpScorer::save(const std::string& path) const {
  nlohmann::json header;
  header["input_dim"] = input_dim_;
  header["seed"] = seed_;
  header["layer_draws"] = draws_;
  header["psi"] = nlohmann::json::array();
  for (const auto& l : psi_) header["psi"].push_back({l.out(), l.in()});
  header["heads"] = nlohmann::json::array();
  for (const auto& [name, h] : heads_) {
    header["heads"].push_back({{"name", name}, {"outputs", h.out()}, {"inputs", h.in()}});
  }
  const std::string text = header.dump();
  const Eigen::VectorXd theta = flatten();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(theta.size())));
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

MlpScorer MlpScorer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error("'" + path + "' is not a model checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 24)) throw std::runtime_error("corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);

  std::vector<std::size_t> widths;
  for (const auto& l : header.at("psi")) widths.push_back(l.at(0).get<std::size_t>());
  MlpScorer model(header.at("input_dim").get<std::size_t>(), widths,
                  header.at("seed").get<std::uint64_t>());
  for (const auto& h : header.at("heads")) {
    model.add_head(h.at("name").get<std::string>(), h.at("outputs").get<std::size_t>(),
                   HeadInit::zero);
  }
  model.draws_ = header.value("layer_draws", model.draws_);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(model.parameter_count()));
  in.read(reinterpret_cast<char*>(theta.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(theta.size())));
  if (!in) throw std::runtime_error("checkpoint '" + path + "' is truncated");
  model.unflatten(theta);
  return model;
}

std::vector<HeadSignal> reversal_signals(
    std::vector<HeadSignal> task,
    const std::vector<std::pair<std::string, Eigen::MatrixXd>>& disagreement, double zeta,
    bool scale_heads) {
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw std::invalid_argument("zeta must lie in [0, 1]");
  for (const auto& [head, d] : disagreement) {
    // Heads descend -D. Psi descends +zeta D, which is the head signal
    // passed through a reversal layer of weight -zeta.
    task.push_back({head, -d, scale_heads ? zeta : 1.0, -zeta});
  }
  return task;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw DimensionError("ragged batch");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void Schedules::validate() const {
  if (!(eta0 > 0 && alpha > 0 && beta > 0 && gamma > 0 && momentum > 0)) {
    throw ConfigError("schedule parameters must all be positive");
  }
}

namespace {
void require_progress(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("training progress must lie in [0, 1]");
}
}  // namespace

double lr_schedule(double p, const Schedules& s) {
  require_progress(p);
  return s.eta0 / std::pow(1.0 + s.alpha * p, s.beta);
}

double lambda_schedule(double p, const Schedules& s) {
  require_progress(p);
  return 2.0 / (1.0 + std::exp(-s.gamma * p)) - 1.0;
}

SgdMomentum::SgdMomentum(const MlpScorer& model, double momentum, double head_multiplier)
    : momentum_(momentum), head_multiplier_(head_multiplier), velocity_(model.zero_gradients()) {}

void SgdMomentum::reset(const MlpScorer& model) { velocity_ = model.zero_gradients(); }

void SgdMomentum::step(MlpScorer& model, const Gradients& grads, double lr) {
  if (grads.psi.size() != model.psi().size() || grads.heads.size() != velocity_.heads.size()) {
    throw DimensionError("gradient layout does not match the model");
  }
  auto update = [&](Dense& param, Dense& vel, const Dense& g, double rate) {
    if (g.w.rows() != param.w.rows() || g.w.cols() != param.w.cols() || g.b.size() != param.b.size()) {
      throw DimensionError("gradient shape does not match parameter shape");
    }
    vel.w = momentum_ * vel.w + g.w;
    vel.b = momentum_ * vel.b + g.b;
    param.w -= rate * vel.w;
    param.b -= rate * vel.b;
  };
  for (std::size_t l = 0; l < model.psi().size(); ++l) {
    update(model.psi()[l], velocity_.psi[l], grads.psi[l], lr);
  }
  for (auto& [name, vel] : velocity_.heads) {
    update(model.head(name), vel, grads.heads.at(name), lr * head_multiplier_);
  }
}

void sgd_momentum_update(std::span<double> params, std::span<const double> grads,
                         std::span<double> velocity, double lr, double momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw DimensionError("parameter, gradient and velocity lengths differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-6});
  return (a - b).norm() / denom;
}

}  // namespace mcsd
