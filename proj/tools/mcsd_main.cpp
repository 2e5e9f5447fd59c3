// Command-line front end: dataset generation, training runs, theory checks,
// disagreement surfaces and bound reports.
//
// Exit codes: 0 success, 1 usage or input error, 2 a check failed,
// 3 a training run did not converge.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcsd/config.hpp"
#include "mcsd/divergence.hpp"
#include "mcsd/errors.hpp"
#include "mcsd/surface.hpp"
#include "mcsd/synthdata.hpp"
#include "mcsd/theory.hpp"
#include "mcsd/trainers.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kCheckFailed = 2;
constexpr int kDidNotConverge = 3;

/// Sets a dotted key ("schedules.eta0") in a JSON patch. Values are parsed as
/// JSON when possible and kept as strings otherwise.
void set_path(nlohmann::json& patch, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw mcsd::ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json* node = &patch;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

std::vector<double> parse_scores(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct TrainArgs {
  std::string config, preset;
  std::string method, mode, output_dir, zeta, xi;
  std::vector<std::uint64_t> seeds;
  std::size_t epochs = 0;
  double rho = 0.0, eta0 = 0.0, nu = 0.0, angle = -1.0;
  std::vector<std::string> sets;
};

nlohmann::json train_patch(const TrainArgs& a) {
  nlohmann::json p = nlohmann::json::object();
  if (!a.method.empty()) p["method"] = a.method;
  if (!a.mode.empty()) p["mode"] = a.mode;
  if (!a.output_dir.empty()) p["output_dir"] = a.output_dir;
  if (!a.seeds.empty()) p["seeds"] = a.seeds;
  if (a.epochs) p["epochs"] = a.epochs;
  if (a.rho > 0.0) p["rho"] = a.rho;
  if (a.eta0 > 0.0) p["schedules"]["eta0"] = a.eta0;
  if (a.nu > 0.0) p["nu"] = a.nu;
  if (a.angle >= 0.0) p["dataset"]["angle_deg"] = a.angle;
  if (!a.zeta.empty()) set_path(p, "zeta=" + a.zeta);
  if (!a.xi.empty()) set_path(p, "xi=" + a.xi);
  for (const auto& s : a.sets) set_path(p, s);
  return p;
}

mcsd::ExperimentConfig base_config(const TrainArgs& a) {
  mcsd::ExperimentConfig cfg = a.preset.empty() ? mcsd::ExperimentConfig{} : mcsd::preset_config(a.preset);
  if (!a.config.empty()) cfg = mcsd::apply_overrides(cfg, mcsd::read_json_file(a.config));
  return mcsd::apply_overrides(cfg, train_patch(a));
}

int cmd_train(const TrainArgs& a) {
  mcsd::ExperimentConfig cfg = base_config(a);
  bool all_ok = true;
  for (std::uint64_t seed : cfg.seeds) {
    const mcsd::RunResult r = mcsd::run_experiment(cfg, seed);
    std::cout << r.to_json().dump() << '\n';
    if (!r.converged()) {
      std::cerr << to_string(cfg.method) << " seed " << seed << ": " << r.reason << '\n';
      all_ok = false;
    }
  }
  return all_ok ? kOk : kDidNotConverge;
}

int cmd_gen_data(const TrainArgs& a, const std::string& out) {
  mcsd::ExperimentConfig cfg = base_config(a);
  const std::uint64_t seed = cfg.dataset.seed.value_or(cfg.seeds.front());
  const mcsd::DomainPair pair = mcsd::build_dataset(cfg, seed);
  mcsd::write_csv(pair, out);
  std::cerr << "wrote " << out << " and " << out << ".json\n";
  return kOk;
}

int cmd_theory(std::uint64_t seed, std::size_t trials, bool mutant, const std::string& out) {
  mcsd::TheoryReport rep = mcsd::run_theory_checks(seed, trials);
  if (mutant) {
    // Halved rho on the violation-matrix side only; the identity must break.
    rep.checks.push_back(mcsd::check_decomposition_identity(
        seed + 1, trials, [](double x, mcsd::RampParam rho) { return mcsd::ramp_loss(x, rho.halved()); }));
  }
  for (const auto& c : rep.checks) {
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.trials << " trials, "
              << c.violations << " violations)\n";
  }
  write_text(out, rep.to_json().dump(2) + "\n");
  return rep.all_passed() ? kOk : kCheckFailed;
}

int cmd_surface(const std::string& which, const std::string& fixed, double rho, std::size_t resolution,
                const std::string& side, const std::string& out) {
  const auto nodes = mcsd::emit_surface_grid(mcsd::ScoreVector(parse_scores(fixed)), mcsd::RampParam(rho),
                                             mcsd::surface_kind_from_string(which), resolution,
                                             side == "second" ? mcsd::FixedSide::second : mcsd::FixedSide::first);
  std::ostringstream os;
  mcsd::write_surface_csv(os, nodes);
  write_text(out, os.str());
  return kOk;
}

/// Random linear scorers over the sample coordinates, plus the zero scorer.
mcsd::ScorerGrid random_linear_grid(std::size_t k, std::size_t dim, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<mcsd::LinearScorer> scorers;
  scorers.push_back({k, dim, std::vector<double>(k * dim, 0.0), std::vector<double>(k, 0.0)});
  while (scorers.size() < size) {
    mcsd::LinearScorer s{k, dim, std::vector<double>(k * dim), std::vector<double>(k)};
    for (double& w : s.weights) w = n(rng);
    for (double& b : s.bias) b = n(rng);
    scorers.push_back(std::move(s));
  }
  return mcsd::ScorerGrid::from_linear(scorers);
}

int cmd_pac(const std::string& data, std::size_t grid_size, std::size_t scorer, double rho, double delta,
            std::size_t draws, std::uint64_t seed, const std::string& out) {
  const mcsd::PacOptions opt{delta, draws, seed};
  mcsd::PacReport rep;
  if (data.empty()) {
    std::mt19937_64 rng(seed);
    const mcsd::ToyUniverse u = mcsd::random_universe(rng, 8, 3, grid_size);
    rep = mcsd::pac_bound_report(u.source, u.target, u.grid, mcsd::RampParam(rho), scorer, opt);
  } else {
    const mcsd::DomainPair pair = mcsd::read_csv(data);
    const mcsd::SampleSet tgt = mcsd::eval::labeled_target(pair);
    const mcsd::ScorerGrid grid = random_linear_grid(pair.meta().classes, pair.source().dim(), grid_size, seed);
    rep = mcsd::pac_bound_report(pair.source(), tgt, grid, mcsd::RampParam(rho), scorer, opt);
  }
  write_text(out, rep.to_json().dump(2) + "\n");
  return rep.holds ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-class scoring disagreement toolkit"};
  app.require_subcommand(1);

  TrainArgs targs;
  auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--preset", targs.preset, "start from a calibrated toy setting: moons | partial_blobs | openset_blobs");
    sub->add_option("--config", targs.config, "JSON experiment config (applied over the preset)");
    sub->add_option("--method", targs.method, "source_only | mcdal_{l1,kl,ce,mdd_variant,dann} | symmnets_v2[_no_Lt|_no_adv]");
    sub->add_option("--mode", targs.mode, "closed | partial | openset");
    sub->add_option("--seeds", targs.seeds, "run seeds");
    sub->add_option("--epochs", targs.epochs);
    sub->add_option("--rho", targs.rho);
    sub->add_option("--eta0", targs.eta0);
    sub->add_option("--zeta", targs.zeta, "\"lambda\" or a number in [0, 1]");
    sub->add_option("--xi", targs.xi, "\"lambda\" or a number in [0, 1]");
    sub->add_option("--nu", targs.nu);
    sub->add_option("--angle", targs.angle, "rotation of the target moons, degrees");
    sub->add_option("--output-dir", targs.output_dir, "directory for per-epoch JSONL metrics");
    sub->add_option("--set", targs.sets, "override any config key, e.g. --set schedules.alpha=5");
  };

  auto* train = app.add_subcommand("train", "train one method for every configured seed");
  add_train_flags(train);

  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic domain pair as CSV plus manifest");
  add_train_flags(gen);
  gen->add_option("--out", data_out, "output CSV path")->required();

  std::uint64_t theory_seed = 0;
  std::size_t trials = 10000;
  bool mutant = false;
  std::string theory_out = "-";
  auto* theory = app.add_subcommand("theory-check", "run every identity and bound check");
  theory->add_option("--seed", theory_seed);
  theory->add_option("--trials", trials, "draws per pointwise case (bound inequalities use 10x)")
      ->check(CLI::PositiveNumber);
  theory->add_flag("--inject-mutant-ramp", mutant, "also run the decomposition identity with a corrupted ramp");
  theory->add_option("--out", theory_out, "JSON report path ('-' for stdout)");

  std::string which = "mcsd", fixed = "10,-5,-5", side = "first", surface_out = "-";
  double surface_rho = 5.0;
  std::size_t resolution = 121;
  auto* surface = app.add_subcommand("surface", "disagreement surface over f = [a, b, -a-b]");
  surface->add_option("--which", which, "mcsd | tilde | hat | l1 | kl | ce | md");
  surface->add_option("--fixed", fixed, "comma-separated scores of the fixed scorer");
  surface->add_option("--rho", surface_rho);
  surface->add_option("--resolution", resolution, "nodes per axis");
  surface->add_option("--fix", side, "which scorer is fixed: first | second");
  surface->add_option("--out", surface_out, "CSV path ('-' for stdout)");

  std::string pac_data, pac_out = "-";
  std::size_t pac_grid = 20, pac_scorer = 0, pac_draws = 2000;
  double pac_rho = 1.0, pac_delta = 0.05;
  std::uint64_t pac_seed = 0;
  auto* pac = app.add_subcommand("pac-report", "every term of the data-dependent target-error bound");
  pac->add_option("--data", pac_data, "CSV domain pair; a random toy universe when omitted");
  pac->add_option("--grid", pac_grid, "number of candidate scorers");
  pac->add_option("--scorer", pac_scorer, "index of the bounded scorer");
  pac->add_option("--rho", pac_rho);
  pac->add_option("--delta", pac_delta);
  pac->add_option("--sigma-draws", pac_draws, "Monte-Carlo sign vectors (0 = exact)");
  pac->add_option("--seed", pac_seed);
  pac->add_option("--out", pac_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kError;
  }

  try {
    if (*train) return cmd_train(targs);
    if (*gen) return cmd_gen_data(targs, data_out);
    if (*theory) return cmd_theory(theory_seed, trials, mutant, theory_out);
    if (*surface) return cmd_surface(which, fixed, surface_rho, resolution, side, surface_out);
    if (*pac) return cmd_pac(pac_data, pac_grid, pac_scorer, pac_rho, pac_delta, pac_draws, pac_seed, pac_out);
  } catch (const mcsd::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}
