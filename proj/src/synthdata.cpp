#include "mcsd/synthdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mcsd/errors.hpp"

namespace mcsd {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::closed: return "closed";
    case Mode::partial: return "partial";
    case Mode::openset: return "openset";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  if (name == "closed") return Mode::closed;
  if (name == "partial") return Mode::partial;
  if (name == "openset") return Mode::openset;
  throw ConfigError("unknown mode '" + name + "'");
}

namespace {

std::set<std::size_t> label_set(const std::vector<Label>& labels) {
  std::set<std::size_t> s;
  for (Label y : labels) s.insert(y.index());
  return s;
}

std::vector<Label> labels_of(const SampleSet& s) {
  std::vector<Label> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s.label(i));
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

DomainPair::DomainPair(SampleSet source, std::vector<std::vector<double>> target_points,
                       std::vector<Label> target_labels, Mode mode, DomainMeta meta)
    : source_(std::move(source)),
      target_(std::move(target_points)),
      target_labels_(std::move(target_labels)),
      mode_(mode),
      meta_(std::move(meta)) {
  if (!source_.has_labels()) throw std::invalid_argument("source sample must be labeled");
  if (target_labels_.size() != target_.size()) throw DimensionError("target label count mismatch");
  if (source_.dim() != target_.dim()) throw DimensionError("source and target dimensions differ");
  const auto src = label_set(labels_of(source_));
  const auto tgt = label_set(target_labels_);
  if (meta_.classes < 2) throw ConfigError("a domain pair needs at least 2 classes");
  if (*src.rbegin() >= meta_.classes || *tgt.rbegin() >= meta_.classes) {
    throw ConfigError("labels exceed the declared class count");
  }
  switch (mode_) {
    case Mode::closed:
      if (src != tgt) throw ConfigError("closed pair: source and target label sets differ");
      if (meta_.k_shared != meta_.classes) throw ConfigError("closed pair: K_shared must equal K");
      break;
    case Mode::partial:
      if (!std::includes(src.begin(), src.end(), tgt.begin(), tgt.end()) || src == tgt) {
        throw ConfigError("partial pair: target labels must be a strict subset of source labels");
      }
      if (meta_.k_shared != meta_.classes) throw ConfigError("partial pair: K_shared must equal K");
      break;
    case Mode::openset:
      if (meta_.k_shared + 1 != meta_.classes) throw ConfigError("open-set pair: K must be K_shared + 1");
      if (!src.count(meta_.k_shared) || !tgt.count(meta_.k_shared)) {
        throw ConfigError("open-set pair: both domains need an aggregated unknown class");
      }
      break;
  }
}

std::vector<std::size_t> DomainPair::source_labels() const {
  std::vector<std::size_t> out(source_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = source_.label(i).index();
  return out;
}

const std::vector<Label>& eval::hidden_labels(const DomainPair& pair) { return pair.target_labels_; }

SampleSet eval::labeled_target(const DomainPair& pair) {
  return SampleSet(pair.target_.points(), pair.target_labels_);
}

namespace {

void moons(std::size_t n, double noise_sd, std::mt19937_64& rng, std::vector<std::vector<double>>& pts,
           std::vector<Label>& labels) {
  std::uniform_real_distribution<double> t(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, noise_sd);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % 2;
    const double a = t(rng);
    double x1 = y == 0 ? std::cos(a) : 1.0 - std::cos(a);
    double x2 = y == 0 ? std::sin(a) : 0.5 - std::sin(a);
    if (noise_sd > 0.0) {
      x1 += noise(rng);
      x2 += noise(rng);
    }
    pts.push_back({x1, x2});
    labels.emplace_back(y);
  }
}

}  // namespace

DomainPair gen_rotated_moons(std::size_t n_src, std::size_t n_tgt, double angle_deg,
                             double noise_sd, std::uint64_t seed) {
  if (!(angle_deg >= 0.0 && angle_deg <= 90.0)) throw std::invalid_argument("angle must lie in [0, 90]");
  if (n_src < 20 || n_tgt < 20) throw std::invalid_argument("need at least 10 points per class");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise must be non-negative");

  std::vector<std::vector<double>> sp, tp;
  std::vector<Label> sl, tl;
  std::mt19937_64 rs(stream_seed(seed, 0)), rt(stream_seed(seed, 1));
  moons(n_src, noise_sd, rs, sp, sl);
  moons(n_tgt, noise_sd, rt, tp, tl);

  const double th = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double cx = 0.5, cy = 0.25;
  for (auto& p : tp) {
    const double dx = p[0] - cx, dy = p[1] - cy;
    p = {cx + c * dx - s * dy, cy + s * dx + c * dy};
  }
  DomainMeta meta{"rotated_moons", seed, 2, 2,
                  {{"n_src", n_src}, {"n_tgt", n_tgt}, {"angle_deg", angle_deg}, {"noise_sd", noise_sd}}};
  return DomainPair(SampleSet(std::move(sp), std::move(sl)), std::move(tp), std::move(tl),
                    Mode::closed, std::move(meta));
}

DomainPair gen_gauss_blobs(std::size_t k, std::size_t n_per_class, const std::vector<double>& shift,
                           std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need K >= 2");
  if (n_per_class == 0) throw std::invalid_argument("need at least one point per class");
  if (shift.size() < 2) throw DimensionError("shift vector needs at least 2 coordinates");
  const std::size_t d = shift.size();
  std::normal_distribution<double> g(0.0, 1.0);

  auto draw = [&](std::mt19937_64& rng, bool shifted, std::vector<std::vector<double>>& pts,
                  std::vector<Label>& labels) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
        std::vector<double> p(d, 0.0);
        p[0] = 4.0 * std::cos(a);
        p[1] = 4.0 * std::sin(a);
        for (std::size_t j = 0; j < d; ++j) p[j] += g(rng) + (shifted ? shift[j] : 0.0);
        pts.push_back(std::move(p));
        labels.emplace_back(c);
      }
    }
  };
  std::vector<std::vector<double>> sp, tp;
  std::vector<Label> sl, tl;
  std::mt19937_64 rs(stream_seed(seed, 0)), rt(stream_seed(seed, 1));
  draw(rs, false, sp, sl);
  draw(rt, true, tp, tl);
  DomainMeta meta{"gauss_blobs", seed, k, k,
                  {{"K", k}, {"n_per_class", n_per_class}, {"shift", shift}}};
  return DomainPair(SampleSet(std::move(sp), std::move(sl)), std::move(tp), std::move(tl),
                    Mode::closed, std::move(meta));
}

DomainPair make_partial(const DomainPair& pair, const std::vector<std::size_t>& kept) {
  if (kept.empty()) throw std::invalid_argument("kept class set is empty");
  if (pair.mode() != Mode::closed) throw ConfigError("partial split expects a closed pair");
  const std::set<std::size_t> keep(kept.begin(), kept.end());
  for (std::size_t c : keep) {
    if (c >= pair.meta().classes) throw std::invalid_argument("kept class outside the source classes");
  }
  const auto& labels = eval::hidden_labels(pair);
  std::vector<std::vector<double>> pts;
  std::vector<Label> ls;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (keep.count(labels[i].index())) {
      pts.push_back(pair.target().points()[i]);
      ls.push_back(labels[i]);
    }
  }
  if (pts.empty()) throw std::invalid_argument("kept classes leave the target empty");
  DomainMeta meta = pair.meta();
  meta.params["kept"] = std::vector<std::size_t>(keep.begin(), keep.end());
  const Mode mode = keep.size() == pair.meta().classes ? Mode::closed : Mode::partial;
  return DomainPair(pair.source(), std::move(pts), std::move(ls), mode, std::move(meta));
}

DomainPair make_openset(const DomainPair& pair, const std::vector<std::size_t>& shared,
                        const std::vector<std::size_t>& src_extra,
                        const std::vector<std::size_t>& tgt_extra) {
  if (pair.mode() != Mode::closed) throw ConfigError("open-set split expects a closed pair");
  if (shared.empty()) throw std::invalid_argument("open-set split needs shared classes");
  const std::set<std::size_t> sh(shared.begin(), shared.end());
  const std::set<std::size_t> se(src_extra.begin(), src_extra.end());
  const std::set<std::size_t> te(tgt_extra.begin(), tgt_extra.end());
  if (sh.size() != shared.size()) throw std::invalid_argument("shared classes repeat");
  for (std::size_t c : se) {
    if (sh.count(c) || te.count(c)) throw std::invalid_argument("class lists overlap");
  }
  for (std::size_t c : te) {
    if (sh.count(c)) throw std::invalid_argument("class lists overlap");
  }
  for (const auto* s : {&sh, &se, &te}) {
    for (std::size_t c : *s) {
      if (c >= pair.meta().classes) throw std::invalid_argument("class outside the dataset");
    }
  }
  const std::size_t k_shared = shared.size();
  auto remap = [&](std::size_t c, const std::set<std::size_t>& extra) -> std::optional<std::size_t> {
    const auto it = std::find(shared.begin(), shared.end(), c);
    if (it != shared.end()) return static_cast<std::size_t>(it - shared.begin());
    if (extra.count(c)) return k_shared;
    return std::nullopt;
  };

  std::vector<std::vector<double>> sp, tp;
  std::vector<Label> sl, tl;
  for (std::size_t i = 0; i < pair.source().size(); ++i) {
    if (auto y = remap(pair.source().label(i).index(), se)) {
      sp.push_back(pair.source().points()[i]);
      sl.emplace_back(*y);
    }
  }
  const auto& hidden = eval::hidden_labels(pair);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (auto y = remap(hidden[i].index(), te)) {
      tp.push_back(pair.target().points()[i]);
      tl.emplace_back(*y);
    }
  }
  if (sp.empty() || tp.empty()) throw std::invalid_argument("open-set split leaves a domain empty");

  DomainMeta meta = pair.meta();
  meta.params["shared"] = shared;
  meta.params["src_extra"] = src_extra;
  meta.params["tgt_extra"] = tgt_extra;
  meta.k_shared = k_shared;
  const bool closed = se.empty() && te.empty();
  meta.classes = closed ? k_shared : k_shared + 1;
  if (closed) meta.k_shared = k_shared;
  return DomainPair(SampleSet(std::move(sp), std::move(sl)), std::move(tp), std::move(tl),
                    closed ? Mode::closed : Mode::openset, std::move(meta));
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(line, "'" + s + "' is not a finite number");
  }
  return v;
}

}  // namespace

void write_csv(const DomainPair& pair, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::size_t d = pair.source().dim();
  for (std::size_t j = 0; j < d; ++j) out << 'x' << (j + 1) << ',';
  out << "label,domain\n";
  auto rows = [&](const SampleSet& s, const std::vector<Label>& labels, const char* domain) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (double v : s.point(i)) out << format_double(v) << ',';
      out << labels[i].one_based_index() << ',' << domain << '\n';
    }
  };
  rows(pair.source(), labels_of(pair.source()), "source");
  rows(pair.target(), eval::hidden_labels(pair), "target");
  if (!out) throw std::runtime_error("failed writing '" + path + "'");

  nlohmann::json manifest{{"mode", to_string(pair.mode())},
                          {"seed", pair.meta().seed},
                          {"K", pair.meta().classes},
                          {"K_shared", pair.meta().k_shared},
                          {"generator", pair.meta().generator},
                          {"params", pair.meta().params},
                          {"target_labels", "evaluation only"}};
  std::ofstream side(path + ".json");
  side << manifest.dump(2) << '\n';
  if (!side) throw std::runtime_error("failed writing manifest for '" + path + "'");
}

DomainPair read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  const auto header = split_row(line);
  if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "domain") {
    throw ParseError(1, "header must be x1,...,xd,label,domain");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "x" + std::to_string(j + 1)) throw ParseError(1, "unexpected column '" + header[j] + "'");
  }

  std::vector<std::vector<double>> sp, tp;
  std::vector<Label> sl, tl;
  std::size_t line_no = 1, max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != d + 2) {
      throw ParseError(line_no, "expected " + std::to_string(d + 2) + " columns, got " +
                                    std::to_string(cells.size()));
    }
    std::vector<double> p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = parse_double(cells[j], line_no);
    const std::string& lab = cells[d];
    const std::string& dom = cells[d + 1];
    if (dom != "source" && dom != "target") throw ParseError(line_no, "domain must be source or target");
    if (lab.empty()) throw ParseError(line_no, "missing label for a " + dom + " row");
    std::size_t y = 0;
    const auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), y);
    if (ec != std::errc() || ptr != lab.data() + lab.size() || y == 0) {
      throw ParseError(line_no, "label '" + lab + "' is not a positive integer");
    }
    max_label = std::max(max_label, y);
    if (dom == "source") {
      sp.push_back(std::move(p));
      sl.push_back(Label::one_based(y));
    } else {
      tp.push_back(std::move(p));
      tl.push_back(Label::one_based(y));
    }
  }
  if (sp.empty()) throw ParseError(line_no, "file has no source rows");
  if (tp.empty()) throw ParseError(line_no, "file has no target rows");

  DomainMeta meta{"csv", 0, max_label, max_label, {{"path", path}}};
  Mode mode = Mode::closed;
  const std::string side = path + ".json";
  if (std::filesystem::exists(side)) {
    std::ifstream ms(side);
    const auto m = nlohmann::json::parse(ms);
    mode = mode_from_string(m.at("mode").get<std::string>());
    meta.seed = m.value("seed", std::uint64_t{0});
    meta.classes = m.at("K").get<std::size_t>();
    meta.k_shared = m.value("K_shared", meta.classes);
    meta.generator = m.value("generator", std::string("csv"));
    meta.params = m.value("params", nlohmann::json::object());
  }
  return DomainPair(SampleSet(std::move(sp), std::move(sl)), std::move(tp), std::move(tl), mode,
                    std::move(meta));
}

}  // namespace mcsd
