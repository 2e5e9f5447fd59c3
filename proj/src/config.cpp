#include "mcsd/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "mcsd/errors.hpp"

namespace mcsd {

namespace {

struct MethodName {
  Method method;
  const char* name;
};

constexpr MethodName kMethods[] = {
    {Method::source_only, "source_only"},
    {Method::mcdal_l1, "mcdal_l1"},
    {Method::mcdal_kl, "mcdal_kl"},
    {Method::mcdal_ce, "mcdal_ce"},
    {Method::mcdal_mdd_variant, "mcdal_mdd_variant"},
    {Method::mcdal_dann, "mcdal_dann"},
    {Method::symmnets_v2, "symmnets_v2"},
    {Method::symmnets_v2_no_Lt, "symmnets_v2_no_Lt"},
    {Method::symmnets_v2_no_adv, "symmnets_v2_no_adv"},
};

bool is_policy(const std::string& p) {
  if (p == "lambda") return true;
  try {
    std::size_t used = 0;
    const double v = std::stod(p, &used);
    return used == p.size() && v >= 0.0 && v <= 1.0;
  } catch (const std::exception&) {
    return false;
  }
}

std::string policy_from_json(const nlohmann::json& v, const char* key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  throw ConfigError(std::string(key) + " must be \"lambda\" or a number");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  const std::set<std::string> ok(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& e : kMethods) {
    if (e.method == m) return e.name;
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (const auto& e : kMethods) {
    if (name == e.name) return e.method;
  }
  throw ConfigError("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> all = [] {
    std::vector<Method> v;
    for (const auto& e : kMethods) v.push_back(e.method);
    return v;
  }();
  return all;
}

bool is_mcdal(Method m) {
  return m == Method::mcdal_l1 || m == Method::mcdal_kl || m == Method::mcdal_ce ||
         m == Method::mcdal_mdd_variant || m == Method::mcdal_dann;
}

bool is_symmnets(Method m) {
  return m == Method::symmnets_v2 || m == Method::symmnets_v2_no_Lt ||
         m == Method::symmnets_v2_no_adv;
}

void ExperimentConfig::validate() const {
  if (!(rho > 0.0)) throw ConfigError("rho must be positive");
  schedules.validate();
  if (!(head_lr_multiplier > 0.0)) throw ConfigError("head_lr_multiplier must be positive");
  if (!is_policy(zeta_policy)) throw ConfigError("zeta must be \"lambda\" or a number in [0, 1]");
  if (!is_policy(xi_policy)) throw ConfigError("xi must be \"lambda\" or a number in [0, 1]");
  if (zeta_scope != "psi" && zeta_scope != "both") throw ConfigError("zeta_scope must be psi or both");
  if (eval_head != "ft" && eval_head != "fs") throw ConfigError("eval_head must be ft or fs");
  if (!(aux_weight >= 0.0)) throw ConfigError("aux_weight must be non-negative");
  if (!(nu >= 1.0)) throw ConfigError("nu must be at least 1");
  if (epochs == 0 || steps_per_epoch == 0 || batch_size == 0) {
    throw ConfigError("epochs, steps_per_epoch and batch_size must be positive");
  }
  if (widths.empty()) throw ConfigError("the feature extractor needs at least one layer");
  if (seeds.empty()) throw ConfigError("seeds list is empty");
  if (!(dnc_chance_factor >= 0.0)) throw ConfigError("dnc_chance_factor must be non-negative");

  const auto& d = dataset;
  if (d.generator != "rotated_moons" && d.generator != "gauss_blobs" && d.generator != "csv") {
    throw ConfigError("unknown generator '" + d.generator + "'");
  }
  if (d.generator == "csv" && d.path.empty()) throw ConfigError("csv dataset needs a path");
  switch (mode) {
    case Mode::closed:
      if (!d.kept.empty() || !d.shared.empty()) {
        throw ConfigError("closed mode takes no kept/shared class lists");
      }
      break;
    case Mode::partial:
      if (d.generator != "csv" && d.kept.empty()) throw ConfigError("partial mode needs dataset.kept");
      break;
    case Mode::openset:
      if (!is_symmnets(method) && method != Method::source_only) {
        throw ConfigError("open-set mode is supported for SymmNets and source-only runs");
      }
      if (d.generator != "csv") {
        if (d.shared.empty() || d.src_extra.empty() || d.tgt_extra.empty()) {
          throw ConfigError("open-set mode needs dataset.shared, src_extra and tgt_extra");
        }
        if (k_shared != 0 && k_shared != d.shared.size()) {
          throw ConfigError("k_shared disagrees with dataset.shared");
        }
      }
      break;
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json ds{{"generator", dataset.generator},
                    {"n_src", dataset.n_src},
                    {"n_tgt", dataset.n_tgt},
                    {"angle_deg", dataset.angle_deg},
                    {"noise_sd", dataset.noise_sd},
                    {"classes", dataset.classes},
                    {"n_per_class", dataset.n_per_class},
                    {"shift", dataset.shift},
                    {"kept", dataset.kept},
                    {"shared", dataset.shared},
                    {"src_extra", dataset.src_extra},
                    {"tgt_extra", dataset.tgt_extra}};
  if (!dataset.path.empty()) ds["path"] = dataset.path;
  if (dataset.seed) ds["seed"] = *dataset.seed;
  return {{"dataset", ds},
          {"method", to_string(method)},
          {"mode", to_string(mode)},
          {"rho", rho},
          {"schedules",
           {{"eta0", schedules.eta0},
            {"alpha", schedules.alpha},
            {"beta", schedules.beta},
            {"gamma", schedules.gamma},
            {"momentum", schedules.momentum}}},
          {"head_lr_multiplier", head_lr_multiplier},
          {"zeta", zeta_policy},
          {"zeta_scope", zeta_scope},
          {"xi", xi_policy},
          {"aux_weight", aux_weight},
          {"partial_weighting", partial_weighting},
          {"eval_head", eval_head},
          {"nu", nu},
          {"k_shared", k_shared},
          {"epochs", epochs},
          {"steps_per_epoch", steps_per_epoch},
          {"batch_size", batch_size},
          {"full_batch_limit", full_batch_limit},
          {"widths", widths},
          {"dnc_chance_factor", dnc_chance_factor},
          {"seeds", seeds},
          {"output_dir", output_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  return apply_overrides(ExperimentConfig{}, j);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) { return from_json(read_json_file(path)); }

ExperimentConfig apply_overrides(const ExperimentConfig& base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"dataset", "method", "mode", "rho", "schedules", "head_lr_multiplier", "zeta",
                  "zeta_scope", "xi", "aux_weight", "partial_weighting", "eval_head", "nu",
                  "k_shared", "epochs", "steps_per_epoch", "batch_size", "full_batch_limit",
                  "widths", "dnc_chance_factor", "seeds", "output_dir"},
                 "config");
  ExperimentConfig c = base;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    reject_unknown(d,
                   {"generator", "path", "n_src", "n_tgt", "angle_deg", "noise_sd", "classes",
                    "n_per_class", "shift", "seed", "kept", "shared", "src_extra", "tgt_extra"},
                   "dataset");
    read(d, "generator", c.dataset.generator);
    read(d, "path", c.dataset.path);
    read(d, "n_src", c.dataset.n_src);
    read(d, "n_tgt", c.dataset.n_tgt);
    read(d, "angle_deg", c.dataset.angle_deg);
    read(d, "noise_sd", c.dataset.noise_sd);
    read(d, "classes", c.dataset.classes);
    read(d, "n_per_class", c.dataset.n_per_class);
    read(d, "shift", c.dataset.shift);
    read(d, "kept", c.dataset.kept);
    read(d, "shared", c.dataset.shared);
    read(d, "src_extra", c.dataset.src_extra);
    read(d, "tgt_extra", c.dataset.tgt_extra);
    if (d.contains("seed")) {
      if (d.at("seed").is_null()) {
        c.dataset.seed.reset();
      } else {
        std::uint64_t s = 0;
        read(d, "seed", s);
        c.dataset.seed = s;
      }
    }
  }
  if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  read(j, "rho", c.rho);
  if (j.contains("schedules")) {
    const auto& s = j.at("schedules");
    reject_unknown(s, {"eta0", "alpha", "beta", "gamma", "momentum"}, "schedules");
    read(s, "eta0", c.schedules.eta0);
    read(s, "alpha", c.schedules.alpha);
    read(s, "beta", c.schedules.beta);
    read(s, "gamma", c.schedules.gamma);
    read(s, "momentum", c.schedules.momentum);
  }
  read(j, "head_lr_multiplier", c.head_lr_multiplier);
  if (j.contains("zeta")) c.zeta_policy = policy_from_json(j.at("zeta"), "zeta");
  read(j, "zeta_scope", c.zeta_scope);
  if (j.contains("xi")) c.xi_policy = policy_from_json(j.at("xi"), "xi");
  read(j, "aux_weight", c.aux_weight);
  read(j, "partial_weighting", c.partial_weighting);
  read(j, "eval_head", c.eval_head);
  read(j, "nu", c.nu);
  read(j, "k_shared", c.k_shared);
  read(j, "epochs", c.epochs);
  read(j, "steps_per_epoch", c.steps_per_epoch);
  read(j, "batch_size", c.batch_size);
  read(j, "full_batch_limit", c.full_batch_limit);
  read(j, "widths", c.widths);
  read(j, "dnc_chance_factor", c.dnc_chance_factor);
  read(j, "seeds", c.seeds);
  read(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"moons", "partial_blobs", "openset_blobs"};
  return names;
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.widths = {16, 16};
  c.schedules.eta0 = 0.05;
  c.steps_per_epoch = 20;
  if (name == "moons") return c;
  c.dataset.generator = "gauss_blobs";
  if (name == "partial_blobs") {
    c.mode = Mode::partial;
    c.dataset.classes = 5;
    c.dataset.kept = {0, 1, 2};
    return c;
  }
  if (name == "openset_blobs") {
    c.mode = Mode::openset;
    c.dataset.classes = 6;
    c.dataset.shift = {1.0, 0.0};
    c.dataset.shared = {0, 1, 2};
    c.dataset.src_extra = {3, 4};
    c.dataset.tgt_extra = {5};
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

DomainPair build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& d = cfg.dataset;
  const std::uint64_t data_seed = d.seed.value_or(seed);
  if (d.generator == "csv") {
    DomainPair pair = read_csv(d.path);
    if (pair.mode() != cfg.mode) {
      throw ConfigError("dataset file is in " + to_string(pair.mode()) + " mode but the config says " +
                        to_string(cfg.mode));
    }
    return pair;
  }
  DomainPair base = d.generator == "rotated_moons"
                        ? gen_rotated_moons(d.n_src, d.n_tgt, d.angle_deg, d.noise_sd, data_seed)
                        : gen_gauss_blobs(d.classes, d.n_per_class, d.shift, data_seed);
  switch (cfg.mode) {
    case Mode::closed: return base;
    case Mode::partial: return make_partial(base, d.kept);
    case Mode::openset: return make_openset(base, d.shared, d.src_extra, d.tgt_extra);
  }
  return base;
}

}  // namespace mcsd
