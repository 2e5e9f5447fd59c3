#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "mcsd/errors.hpp"
#include "mcsd/neural.hpp"
#include "mcsd/surrogates.hpp"

using namespace mcsd;

namespace {

Eigen::MatrixXd random_batch(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

// Mean log loss of one head and its gradient w.r.t. the raw scores.
double mean_log_loss(const Eigen::MatrixXd& z, const std::vector<std::size_t>& y, Eigen::MatrixXd* grad) {
  double v = 0.0;
  if (grad) grad->resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index k = 0; k < z.cols(); ++k) r[static_cast<std::size_t>(k)] = z(i, k);
    const ProbVector p = softmax(r);
    v += log_loss(p, Label(y[static_cast<std::size_t>(i)])) / static_cast<double>(z.rows());
    if (grad) {
      const auto g = log_loss_grad(r, Label(y[static_cast<std::size_t>(i)]));
      for (Eigen::Index k = 0; k < z.cols(); ++k) (*grad)(i, k) = g[static_cast<std::size_t>(k)] / static_cast<double>(z.rows());
    }
  }
  return v;
}

Eigen::VectorXd numeric_gradient(MlpScorer model, const std::function<double(const MlpScorer&)>& f, double h) {
  Eigen::VectorXd theta = model.flatten(), g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    model.unflatten(theta);
    const double up = f(model);
    theta[i] = keep - h;
    model.unflatten(theta);
    const double down = f(model);
    theta[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("forward basics") {
  MlpScorer m(2, {8, 4}, 7);
  m.add_head("zero", 3, HeadInit::zero);
  m.add_head("f", 3);
  const std::vector<double> x = {0.3, -1.2};
  const ScoreVector zero = m.forward(x, "zero");
  for (double v : zero.values()) CHECK(v == 0.0);
  CHECK(m.feature_dim() == 4);
  CHECK(m.parameter_count() == (8 * 2 + 8) + (4 * 8 + 4) + 2 * (3 * 4 + 3));

  MlpScorer twin(2, {8, 4}, 7);
  twin.add_head("zero", 3, HeadInit::zero);
  twin.add_head("f", 3);
  const auto a = m.forward(x, "f"), b = twin.forward(x, "f");
  for (std::size_t k = 0; k < 3; ++k) CHECK(a[k] == b[k]);

  CHECK_THROWS_AS(m.forward(std::vector<double>{1.0, 2.0, 3.0}, "f"), DimensionError);
  CHECK_THROWS(m.head("missing"));
  CHECK_THROWS(m.add_head("f", 2));
  CHECK_THROWS_AS(MlpScorer(0, {4}, 0), DimensionError);
}

TEST_CASE("activation is tanh") {
  MlpScorer m(1, {1}, 3);
  m.psi()[0].w(0, 0) = 1.0;
  m.psi()[0].b(0) = 0.0;
  for (double x : {-30.0, -2.0, -0.5, 0.0, 1e-9, 0.7, 3.0, 25.0, 500.0}) {
    Eigen::MatrixXd in(1, 1);
    in(0, 0) = x;
    REQUIRE(std::abs(m.forward_features(in).features()(0, 0) - std::tanh(x)) <= 1e-15);
  }
}

TEST_CASE("linear head with log loss has the closed-form softmax gradient") {
  std::mt19937_64 rng(71);
  MlpScorer m(3, {}, 1);
  m.add_head("f", 4);
  const Eigen::MatrixXd x = random_batch(rng, 5, 3);
  const std::vector<std::size_t> y = {0, 3, 1, 2, 1};
  const ForwardPass pass = m.forward_features(x);
  Eigen::MatrixXd dz;
  mean_log_loss(m.head_scores(pass.features(), "f"), y, &dz);
  Gradients g = m.zero_gradients();
  m.backward(pass, {{"f", dz, 1.0, 1.0}}, g);

  // dW = (1/n) sum_i (p_i - e_{y_i}) x_i^T
  Eigen::MatrixXd w_oracle = Eigen::MatrixXd::Zero(4, 3);
  Eigen::VectorXd b_oracle = Eigen::VectorXd::Zero(4);
  const Eigen::MatrixXd z = m.head_scores(x, "f");
  for (Eigen::Index i = 0; i < 5; ++i) {
    Eigen::VectorXd p = (z.row(i).transpose().array() - z.row(i).maxCoeff()).exp();
    p /= p.sum();
    p[static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)])] -= 1.0;
    w_oracle += p * x.row(i) / 5.0;
    b_oracle += p / 5.0;
  }
  CHECK((g.heads.at("f").w - w_oracle).norm() <= 1e-14);
  CHECK((g.heads.at("f").b - b_oracle).norm() <= 1e-14);
}

TEST_CASE("zero input: bias gradient equals the constant-feature case") {
  MlpScorer m(2, {}, 5);
  m.add_head("f", 3);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 2);
  const ForwardPass pass = m.forward_features(x);
  Eigen::MatrixXd dz;
  mean_log_loss(m.head_scores(pass.features(), "f"), {2}, &dz);
  Gradients g = m.zero_gradients();
  m.backward(pass, {{"f", dz, 1.0, 1.0}}, g);
  // with x = 0 the scores are the bias alone: d/db = softmax(b) - e_2
  const Eigen::VectorXd b = m.head("f").b;
  Eigen::VectorXd p = (b.array() - b.maxCoeff()).exp();
  p /= p.sum();
  p[2] -= 1.0;
  CHECK((g.heads.at("f").b - p).norm() <= 1e-15);
  CHECK(g.heads.at("f").w.norm() == 0.0);
}

TEST_CASE("full backward pass matches finite differences") {
  std::mt19937_64 rng(73);
  MlpScorer m(2, {6, 5}, 11);
  m.add_head("a", 3);
  m.add_head("b", 3);
  const Eigen::MatrixXd x = random_batch(rng, 7, 2);
  const std::vector<std::size_t> ya = {0, 1, 2, 0, 1, 2, 0}, yb = {2, 2, 1, 0, 0, 1, 1};
  auto objective = [&](const MlpScorer& mm) {
    const ForwardPass p = mm.forward_features(x);
    return mean_log_loss(mm.head_scores(p.features(), "a"), ya, nullptr) +
           0.5 * mean_log_loss(mm.head_scores(p.features(), "b"), yb, nullptr);
  };
  const ForwardPass pass = m.forward_features(x);
  Eigen::MatrixXd da, db;
  mean_log_loss(m.head_scores(pass.features(), "a"), ya, &da);
  mean_log_loss(m.head_scores(pass.features(), "b"), yb, &db);
  Gradients g = m.zero_gradients();
  m.backward(pass, {{"a", da, 1.0, 1.0}, {"b", 0.5 * db, 1.0, 1.0}}, g);
  CHECK(relative_error(g.flatten(), numeric_gradient(m, objective, 1e-6)) <= 1e-7);
}

TEST_CASE("head and psi multipliers route the gradient") {
  std::mt19937_64 rng(75);
  MlpScorer m(2, {4}, 13);
  m.add_head("a", 2);
  const Eigen::MatrixXd x = random_batch(rng, 3, 2);
  const ForwardPass pass = m.forward_features(x);
  const Eigen::MatrixXd d = random_batch(rng, 3, 2);
  Gradients full = m.zero_gradients(), head_only = m.zero_gradients(), psi_only = m.zero_gradients();
  m.backward(pass, {{"a", d, 1.0, 1.0}}, full);
  m.backward(pass, {{"a", d, 1.0, 0.0}}, head_only);
  m.backward(pass, {{"a", d, 0.0, -0.5}}, psi_only);
  CHECK(head_only.psi[0].w.norm() == 0.0);
  CHECK((head_only.heads.at("a").w - full.heads.at("a").w).norm() == 0.0);
  CHECK(psi_only.heads.at("a").w.norm() == 0.0);
  CHECK((psi_only.psi[0].w + 0.5 * full.psi[0].w).norm() <= 1e-15);
  CHECK_THROWS_AS(m.backward(pass, {{"a", Eigen::MatrixXd::Zero(2, 2), 1.0, 1.0}}, full), DimensionError);
}

TEST_CASE("reversal step") {
  std::mt19937_64 rng(77);
  MlpScorer m(1, {1}, 17);  // psi has exactly two parameters
  m.add_head("f", 2);
  m.add_head("f1", 2);
  m.add_head("f2", 2);
  const Eigen::MatrixXd x = random_batch(rng, 4, 1);
  const std::vector<std::size_t> y = {0, 1, 1, 0};

  // D = mean squared difference of the two auxiliary heads' scores
  auto disagreement = [&](const MlpScorer& mm) {
    const ForwardPass p = mm.forward_features(x);
    return (mm.head_scores(p.features(), "f1") - mm.head_scores(p.features(), "f2")).squaredNorm() / 4.0;
  };
  auto task = [&](const MlpScorer& mm) {
    const ForwardPass p = mm.forward_features(x);
    return mean_log_loss(mm.head_scores(p.features(), "f"), y, nullptr);
  };
  const ForwardPass pass = m.forward_features(x);
  const Eigen::MatrixXd diff = m.head_scores(pass.features(), "f1") - m.head_scores(pass.features(), "f2");
  const Eigen::MatrixXd d1 = 2.0 * diff / 4.0, d2 = -2.0 * diff / 4.0;
  Eigen::MatrixXd dt;
  mean_log_loss(m.head_scores(pass.features(), "f"), y, &dt);

  auto psi_grad = [&](double zeta, bool with_task) {
    std::vector<HeadSignal> t;
    if (with_task) t.push_back({"f", dt, 1.0, 1.0});
    Gradients g = m.zero_gradients();
    m.backward(pass, reversal_signals(t, {{"f1", d1}, {"f2", d2}}, zeta), g);
    return g;
  };

  SUBCASE("zeta = 0 leaves psi with the source-only gradient") {
    Gradients plain = m.zero_gradients();
    m.backward(pass, {{"f", dt, 1.0, 1.0}}, plain);
    const Gradients g = psi_grad(0.0, true);
    CHECK((g.psi[0].w - plain.psi[0].w).norm() == 0.0);
    CHECK((g.psi[0].b - plain.psi[0].b).norm() == 0.0);
  }
  SUBCASE("zeta = 1 without task loss: psi descends D, heads ascend it") {
    const Gradients g = psi_grad(1.0, false);
    const Eigen::VectorXd num = numeric_gradient(m, disagreement, 1e-6);
    // flatten order: psi w, psi b, then heads by name (f, f1, f2), 4 values each
    CHECK(g.psi[0].w(0, 0) == doctest::Approx(num[0]).epsilon(1e-7));
    CHECK(g.psi[0].b(0) == doctest::Approx(num[1]).epsilon(1e-7));
    Eigen::VectorXd heads(8);
    Eigen::Index at = 0;
    for (const char* h : {"f1", "f2"}) {
      const Dense& d = g.heads.at(h);
      for (Eigen::Index j = 0; j < d.w.cols(); ++j) {
        for (Eigen::Index i = 0; i < d.w.rows(); ++i) heads[at++] = d.w(i, j);
      }
      for (Eigen::Index i = 0; i < d.b.size(); ++i) heads[at++] = d.b[i];
    }
    CHECK(relative_error(heads, -num.tail(8)) <= 1e-7);
    CHECK(g.heads.at("f").w.norm() == 0.0);
  }
  SUBCASE("composed update against the two-parameter numeric gradient") {
    const double zeta = 0.3;
    const Gradients g = psi_grad(zeta, true);
    auto composed = [&](const MlpScorer& mm) { return task(mm) + zeta * disagreement(mm); };
    const Eigen::VectorXd num = numeric_gradient(m, composed, 1e-6);
    CHECK(g.psi[0].w(0, 0) == doctest::Approx(num[0]).epsilon(1e-7));
    CHECK(g.psi[0].b(0) == doctest::Approx(num[1]).epsilon(1e-7));
  }
  SUBCASE("scale_heads multiplies the ascent by zeta") {
    Gradients a = m.zero_gradients(), b = m.zero_gradients();
    m.backward(pass, reversal_signals({}, {{"f1", d1}}, 0.25, false), a);
    m.backward(pass, reversal_signals({}, {{"f1", d1}}, 0.25, true), b);
    CHECK((b.heads.at("f1").w - 0.25 * a.heads.at("f1").w).norm() <= 1e-16);
    CHECK((b.psi[0].w - a.psi[0].w).norm() == 0.0);
  }
  CHECK_THROWS(reversal_signals({}, {}, 1.5));
  CHECK_THROWS(reversal_signals({}, {}, -0.1));
}

TEST_CASE("schedules at eleven grid points") {
  const Schedules s;
  for (int i = 0; i <= 10; ++i) {
    const double p = i / 10.0;
    REQUIRE(std::abs(lr_schedule(p, s) - 0.01 / std::pow(1.0 + 10.0 * p, 0.75)) <= 1e-12);
    REQUIRE(std::abs(lambda_schedule(p, s) - (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0)) <= 1e-12);
  }
  CHECK(lr_schedule(0.0, s) == 0.01);
  CHECK(lr_schedule(1.0, s) == doctest::Approx(1.6560e-3).epsilon(1e-4));
  CHECK(lambda_schedule(0.0, s) == 0.0);
  CHECK(lambda_schedule(1.0, s) == doctest::Approx(0.999909).epsilon(1e-6));
  for (int i = 1; i <= 100; ++i) {
    REQUIRE(lr_schedule(i / 100.0, s) < lr_schedule((i - 1) / 100.0, s));
    REQUIRE(lambda_schedule(i / 100.0, s) > lambda_schedule((i - 1) / 100.0, s));
    REQUIRE(lambda_schedule(i / 100.0, s) <= 1.0);
  }
  CHECK_THROWS(lr_schedule(1.5, s));
  CHECK_THROWS(lambda_schedule(-0.1, s));
  Schedules bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("momentum update") {
  SUBCASE("zero momentum is plain SGD") {
    std::vector<double> p = {1.0, -2.0}, v = {0.0, 0.0};
    const std::vector<double> g = {0.5, 0.25};
    sgd_momentum_update(p, g, v, 0.1, 0.0);
    CHECK(p[0] == 1.0 - 0.1 * 0.5);
    CHECK(p[1] == -2.0 - 0.1 * 0.25);
  }
  SUBCASE("constant gradient follows the geometric series") {
    std::vector<double> p = {0.0}, v = {0.0};
    const std::vector<double> g = {0.7};
    const double m = 0.9;
    for (int t = 1; t <= 50; ++t) {
      sgd_momentum_update(p, g, v, 0.01, m);
      REQUIRE(v[0] == doctest::Approx(0.7 * (1.0 - std::pow(m, t)) / (1.0 - m)).epsilon(1e-12));
    }
  }
  SUBCASE("zero gradient keeps parameters fixed") {
    std::vector<double> p = {3.0, 4.0}, v = {0.0, 0.0};
    for (int t = 0; t < 10; ++t) sgd_momentum_update(p, std::vector<double>{0.0, 0.0}, v, 0.5, 0.9);
    CHECK(p[0] == 3.0);
    CHECK(p[1] == 4.0);
  }
  auto mismatched = [] {
    std::vector<double> p = {1.0}, v = {0.0, 0.0};
    sgd_momentum_update(p, std::vector<double>{1.0}, v, 0.1, 0.9);
  };
  CHECK_THROWS_AS(mismatched(), DimensionError);
}

TEST_CASE("heads step at exactly ten times the psi rate") {
  MlpScorer m(2, {3}, 19);
  m.add_head("f", 2);
  m.unflatten(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.parameter_count())));
  Gradients g = m.zero_gradients();
  g.psi[0].w.setOnes();
  g.psi[0].b.setOnes();
  g.heads.at("f").w.setOnes();
  g.heads.at("f").b.setOnes();
  SgdMomentum opt(m, 0.9, 10.0);
  for (double lr : {0.0625, 0.5, 0.125}) {
    m.unflatten(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.parameter_count())));
    opt.reset(m);
    opt.step(m, g, lr);
    const double psi_step = -m.psi()[0].w(0, 0), head_step = -m.head("f").w(0, 0);
    CHECK(psi_step == lr);
    CHECK(head_step / psi_step == 10.0);
    CHECK(-m.head("f").b(1) == lr * 10.0);
  }
}

TEST_CASE("checkpoint round trip") {
  MlpScorer m(3, {5, 4}, 23);
  m.add_head("fs", 3);
  m.add_head("ft", 3);
  const auto path = std::filesystem::temp_directory_path() / "mcsd_ckpt_test.bin";
  m.save(path.string());
  const MlpScorer r = MlpScorer::load(path.string());
  CHECK(r.flatten() == m.flatten());
  CHECK(r.head_names() == m.head_names());
  CHECK(r.seed() == m.seed());
  {
    std::FILE* f = std::fopen(path.string().c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputs("garbage!", f);
    std::fclose(f);
  }
  CHECK_THROWS(MlpScorer::load(path.string()));
  std::filesystem::remove(path);
  CHECK_THROWS(MlpScorer::load(path.string()));
}

TEST_CASE("parameter trajectories are deterministic") {
  auto run = [] {
    std::mt19937_64 rng(79);
    MlpScorer m(2, {6}, 29);
    m.add_head("f", 3);
    const Eigen::MatrixXd x = random_batch(rng, 10, 2);
    const std::vector<std::size_t> y = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    SgdMomentum opt(m, 0.9);
    for (int t = 0; t < 25; ++t) {
      const ForwardPass pass = m.forward_features(x);
      Eigen::MatrixXd dz;
      mean_log_loss(m.head_scores(pass.features(), "f"), y, &dz);
      Gradients g = m.zero_gradients();
      m.backward(pass, {{"f", dz, 1.0, 1.0}}, g);
      opt.step(m, g, 0.05);
    }
    return m.flatten();
  };
  const Eigen::VectorXd a = run(), b = run();
  CHECK(a == b);
}

}  // TEST_SUITE
