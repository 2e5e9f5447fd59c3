#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mcsd/errors.hpp"
#include "mcsd/trainers.hpp"

using namespace mcsd;

namespace {

ExperimentConfig quick(Method m, std::size_t epochs = 6) {
  ExperimentConfig c = preset_config("moons");
  c.method = m;
  c.epochs = epochs;
  c.steps_per_epoch = 2;
  c.dataset.n_src = 60;
  c.dataset.n_tgt = 60;
  c.dnc_chance_factor = 0.0;
  return c;
}

Eigen::MatrixXd points(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

}  // namespace

TEST_SUITE("trainers") {

TEST_CASE("prediction and accuracy") {
  Eigen::MatrixXd z(3, 3);
  z << 1, 2, 2, 5, 0, 1, 0, 0, 0;
  CHECK(predict(z) == std::vector<std::size_t>{1, 0, 0});
  const std::vector<Label> y = {Label(1), Label(2), Label(0)};
  CHECK(accuracy(predict(z), y) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(accuracy(std::vector<std::size_t>{0}, y), DimensionError);
  CHECK(resolve_policy("lambda", 0.3) == 0.3);
  CHECK(resolve_policy("0.25", 0.3) == 0.25);
}

TEST_CASE("trade-offs follow lambda in every epoch record") {
  for (Method m : {Method::mcdal_kl, Method::symmnets_v2}) {
    const RunResult r = run_experiment(quick(m), 3);
    REQUIRE(r.records.size() == 6);
    for (const auto& rec : r.records) {
      CHECK(rec.at("zeta").get<double>() == rec.at("lambda").get<double>());
      CHECK(rec.at("xi").get<double>() == rec.at("lambda").get<double>());
    }
    CHECK(r.records.front().at("lambda").get<double>() == 0.0);
  }
  ExperimentConfig fixed = quick(Method::mcdal_l1, 3);
  fixed.zeta_policy = "0.5";
  for (const auto& rec : run_experiment(fixed, 3).records) CHECK(rec.at("zeta").get<double>() == 0.5);
}

TEST_CASE("metrics stream is one JSON object per epoch") {
  const auto dir = std::filesystem::temp_directory_path() / "mcsd_trainer_metrics";
  std::filesystem::remove_all(dir);
  ExperimentConfig c = quick(Method::symmnets_v2);
  c.output_dir = dir.string();
  const RunResult r = run_experiment(c, 4);
  std::ifstream in(dir / "symmnets_v2_seed4.jsonl");
  REQUIRE(in);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("epoch").get<std::size_t>() == n);
    for (const char* key : {"lr", "lambda", "source_acc", "target_acc", "mcsd_src", "mcsd_tgt", "losses"}) {
      CHECK(j.contains(key));
    }
    ++n;
  }
  CHECK(n == r.epochs_run);
  std::filesystem::remove_all(dir);
}

TEST_CASE("runs are deterministic per seed") {
  for (Method m : {Method::source_only, Method::mcdal_dann, Method::symmnets_v2_no_Lt}) {
    const RunResult a = run_experiment(quick(m), 8), b = run_experiment(quick(m), 8);
    CHECK(a.target_acc == b.target_acc);
    CHECK(a.records == b.records);
  }
  CHECK(run_experiment(quick(Method::mcdal_l1), 1).records != run_experiment(quick(Method::mcdal_l1), 2).records);
}

TEST_CASE("evaluation head") {
  const RunResult ft = run_experiment(quick(Method::symmnets_v2), 5);
  REQUIRE(ft.target_acc_ft.has_value());
  CHECK(ft.target_acc == *ft.target_acc_ft);
  ExperimentConfig c = quick(Method::symmnets_v2);
  c.eval_head = "fs";
  const RunResult fs = run_experiment(c, 5);
  CHECK(fs.target_acc == *fs.target_acc_fs);
  const RunResult no_lt = run_experiment(quick(Method::symmnets_v2_no_Lt), 5);
  CHECK(no_lt.target_acc == *no_lt.target_acc_fs);
}

TEST_CASE("l1 disagreement between identical heads has zero gradient") {
  std::mt19937_64 rng(107);
  MlpScorer m(2, {5}, 43);
  add_mcdal_heads(m, Surrogate::l1, 3);
  m.head(kAuxSecond) = m.head(kAuxFirst);
  const Eigen::MatrixXd xs = points(rng, 6), xt = points(rng, 5);
  const std::vector<std::size_t> ys = {0, 1, 2, 0, 1, 2};
  McdalLosses l;
  const Gradients with = mcdal_gradients(m, Surrogate::l1, xs, ys, xt, 1.0, false, 0.0, &l);
  const Gradients without = mcdal_gradients(m, Surrogate::l1, xs, ys, xt, 0.0, false, 0.0);
  CHECK(l.src_term == 0.0);
  CHECK(l.tgt_term == 0.0);
  CHECK(with.heads.at(kAuxFirst).w.norm() == 0.0);
  CHECK(with.heads.at(kAuxSecond).w.norm() == 0.0);
  CHECK((with.psi[0].w - without.psi[0].w).norm() == 0.0);
}

TEST_CASE("reversal gradients against finite differences") {
  std::mt19937_64 rng(109);
  const Eigen::MatrixXd xs = points(rng, 5), xt = points(rng, 4);
  const std::vector<std::size_t> ys = {0, 1, 2, 1, 0};
  const double zeta = 0.6;
  for (Surrogate s : {Surrogate::kl, Surrogate::ce, Surrogate::dann}) {
    MlpScorer m(2, {4}, 47);
    add_mcdal_heads(m, s, 3);
    const Gradients g = mcdal_gradients(m, s, xs, ys, xt, zeta, false, 0.0);
    // psi descends task + zeta D; the disagreement heads ascend D.
    auto value = [&](const MlpScorer& mm, double w) {
      McdalLosses l;
      mcdal_gradients(mm, s, xs, ys, xt, 0.0, false, 0.0, &l);
      return l.task + w * l.divergence();
    };
    const Eigen::VectorXd theta = m.flatten();
    const Eigen::VectorXd flat = g.flatten();
    const double h = 1e-6;
    double worst = 0.0;
    MlpScorer probe = m;
    const auto psi_count = static_cast<Eigen::Index>(m.psi()[0].parameter_count());
    for (Eigen::Index i = 0; i < psi_count; ++i) {
      Eigen::VectorXd t = theta;
      t[i] += h;
      probe.unflatten(t);
      const double up = value(probe, zeta);
      t[i] -= 2.0 * h;
      probe.unflatten(t);
      const double numeric = (up - value(probe, zeta)) / (2.0 * h);
      worst = std::max(worst, std::abs(flat[i] - numeric) / std::max(1.0, std::abs(numeric)));
    }
    INFO(to_string(s));
    CHECK(worst <= 1e-6);

    // disagreement heads: gradient equals -dD/dtheta
    const std::string head = s == Surrogate::dann ? kDomainHead : kAuxFirst;
    const Dense& gh = g.heads.at(head);
    MlpScorer moved = m;
    moved.head(head).b[0] += h;
    const double up = value(moved, 1.0) - value(moved, 0.0);
    moved.head(head).b[0] -= 2.0 * h;
    const double down = value(moved, 1.0) - value(moved, 0.0);
    CHECK(gh.b[0] == doctest::Approx(-(up - down) / (2.0 * h)).epsilon(1e-6));
  }
}

TEST_CASE("auxiliary heads learn from the source labels only through their own parameters") {
  std::mt19937_64 rng(113);
  MlpScorer m(2, {4}, 53);
  add_mcdal_heads(m, Surrogate::kl, 2);
  const Eigen::MatrixXd xs = points(rng, 4), xt = points(rng, 4);
  const std::vector<std::size_t> ys = {0, 1, 1, 0};
  const Gradients a = mcdal_gradients(m, Surrogate::kl, xs, ys, xt, 0.0, false, 0.0);
  const Gradients b = mcdal_gradients(m, Surrogate::kl, xs, ys, xt, 0.0, false, 1.0);
  CHECK((a.psi[0].w - b.psi[0].w).norm() == 0.0);
  CHECK((a.heads.at(kAuxFirst).w - b.heads.at(kAuxFirst).w).norm() > 0.0);
}

TEST_CASE("did-not-converge rule") {
  ExperimentConfig c = quick(Method::source_only, 9);
  c.dnc_chance_factor = 2.5;  // 1.25 accuracy on two classes is unreachable
  const RunResult r = run_experiment(c, 6);
  CHECK(r.status == "did_not_converge");
  CHECK(!r.converged());
  CHECK(r.epochs_run == 5);
  CHECK(r.records.back().at("status") == "did_not_converge");
  CHECK(r.to_json().contains("reason"));
  c.dnc_chance_factor = 0.0;
  CHECK(run_experiment(c, 6).converged());
}

TEST_CASE("partial and open-set runs report their extras") {
  ExperimentConfig p = preset_config("partial_blobs");
  p.epochs = 4;
  p.steps_per_epoch = 2;
  p.dnc_chance_factor = 0.0;
  const RunResult pr = run_experiment(p, 1);
  CHECK(pr.omega.size() == 5);
  CHECK(pr.records.back().contains("omega"));

  ExperimentConfig o = preset_config("openset_blobs");
  o.epochs = 4;
  o.steps_per_epoch = 2;
  o.dnc_chance_factor = 0.0;
  const RunResult orr = run_experiment(o, 1);
  REQUIRE(orr.openset.has_value());
  CHECK(orr.openset->per_class.size() == 4);
  CHECK(orr.to_json().contains("os_star"));
}

}  // TEST_SUITE
