#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mcsd/margin.hpp"

namespace testing {

// Raw scores with a mix of scales so that ramp kinks and ties both show up.
inline std::vector<double> raw_scores(std::mt19937_64& rng, std::size_t k, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  std::uniform_int_distribution<int> coin(0, 5);
  std::vector<double> v(k);
  for (double& x : v) x = coin(rng) == 0 ? std::round(n(rng) / (scale / 2.0)) * (scale / 2.0) : n(rng);
  return v;
}

inline mcsd::ScoreVector scores(std::mt19937_64& rng, std::size_t k, double scale) {
  return mcsd::ScoreVector(raw_scores(rng, k, scale));
}

// Independent violation-matrix oracle written straight from the definitions.
inline double ramp_oracle(double x, double rho) {
  if (x <= 0.0) return 1.0;
  if (x >= rho) return 0.0;
  return 1.0 - x / rho;
}

inline std::vector<double> violation_oracle(std::span<const double> raw, double rho) {
  const std::size_t k = raw.size();
  double mean = 0.0;
  for (double v : raw) mean += v / static_cast<double>(k);
  std::vector<double> m(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double f = raw[i] - mean;
      m[i * k + j] = ramp_oracle(i == j ? f : -f, rho);
    }
  }
  return m;
}

inline double mcsd_oracle(std::span<const double> a, std::span<const double> b, double rho) {
  const auto ma = violation_oracle(a, rho), mb = violation_oracle(b, rho);
  double s = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) s += std::abs(ma[i] - mb[i]);
  return s / static_cast<double>(a.size());
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(num) / std::max({std::sqrt(na), std::sqrt(nb), 1e-6});
}

}  // namespace testing
