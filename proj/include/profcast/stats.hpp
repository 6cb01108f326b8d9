#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/policies/policy.hpp>

#include "profcast/errors.hpp"

namespace profcast {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLnTwoPi = 1.8378770664093454836;

inline double logit(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw data_error("logit: argument outside (0,1)");
  return std::log(p / (1.0 - p));
}

inline double inv_logit(double x) {
  // Branch keeps exp() argument nonpositive for stability at both tails.
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw numeric_error("mean of empty range");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  if (v.size() < 2) throw numeric_error("variance needs >= 2 values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

// Type-7 (linear interpolation) quantile, matching the common default.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw numeric_error("quantile of empty range");
  if (p < 0.0 || p > 1.0) throw numeric_error("quantile: p outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double f = h - static_cast<double>(lo);
  return (1.0 - f) * v[lo] + f * v[hi];
}

inline double normal_logpdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * (kLnTwoPi + z * z) - std::log(sd);
}

inline double normal_pdf(double x, double mu, double sd) {
  return std::exp(normal_logpdf(x, mu, sd));
}

inline double normal_cdf(double x, double mu = 0.0, double sd = 1.0) {
  return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0)));
}

// Location-scale Student-t.
inline double student_t_logpdf(double x, double df, double loc, double scale) {
  if (scale <= 0.0) throw numeric_error("student_t_logpdf: nonpositive scale");
  const double z = (x - loc) / scale;
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * kPi) - std::log(scale) -
         0.5 * (df + 1.0) * std::log1p(z * z / df);
}

inline double student_t_cdf(double x, double df, double loc, double scale) {
  // double-precision policy; the default promotes to long double and is an
  // order of magnitude slower for the same 1e-16 scale accuracy target
  using policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
  boost::math::students_t_distribution<double, policy> dist(df);
  return boost::math::cdf(dist, (x - loc) / scale);
}

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw numeric_error("log_sum_exp of empty range");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double lchoose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Silverman's rule of thumb.
inline double kde_bandwidth(std::span<const double> v) {
  const double sd = stddev(v);
  std::vector<double> tmp(v.begin(), v.end());
  const double iqr = quantile(tmp, 0.75) - quantile(tmp, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = std::max(sd, 1e-12);
  return 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
}

inline std::vector<double> kde_evaluate(std::span<const double> draws,
                                        std::span<const double> grid, double bandwidth) {
  if (bandwidth <= 0.0) throw numeric_error("kde_evaluate: nonpositive bandwidth");
  std::vector<double> out(grid.size(), 0.0);
  const double inv_h = 1.0 / bandwidth;
  const double norm = inv_h / (std::sqrt(2.0 * kPi) * static_cast<double>(draws.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double d : draws) {
      const double z = (grid[g] - d) * inv_h;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = acc * norm;
  }
  return out;
}

}  // namespace profcast
