#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "profcast/errors.hpp"
#include "profcast/rng.hpp"
#include "profcast/stats.hpp"

namespace profcast::mcmc {

// Univariate slice sampler with stepping-out and shrinkage (Neal 2003).
// `lo`/`hi` bound the support; the step width `w` is in the sampled scale.
inline double slice_sample(const std::function<double(double)>& log_density, double x0,
                           Rng& rng, double w = 1.0, int max_steps = 50,
                           double lo = -std::numeric_limits<double>::infinity(),
                           double hi = std::numeric_limits<double>::infinity()) {
  const double f0 = log_density(x0);
  if (!std::isfinite(f0)) throw numeric_error("slice_sample: non-finite density at start");
  const double log_y = f0 + std::log(rng.uniform() + 1e-300);

  double left = x0 - w * rng.uniform();
  double right = left + w;
  int j = static_cast<int>(std::floor(max_steps * rng.uniform()));
  int k = max_steps - 1 - j;
  while (j-- > 0 && left > lo && log_density(std::max(left, lo)) > log_y) left -= w;
  while (k-- > 0 && right < hi && log_density(std::min(right, hi)) > log_y) right += w;
  left = std::max(left, lo);
  right = std::min(right, hi);

  for (int it = 0; it < 1000; ++it) {
    const double x1 = left + (right - left) * rng.uniform();
    if (log_density(x1) > log_y) return x1;
    if (x1 < x0) left = x1;
    else right = x1;
  }
  return x0;  // shrinkage exhausted; keep current state
}

// Split-chain potential scale reduction factor. `chains` is per-chain draws.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) return std::numeric_limits<double>::quiet_NaN();
    halves.emplace_back(c.begin(), c.begin() + half);
    halves.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  const double m = static_cast<double>(halves.size());
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    means.push_back(mean(h));
    w += variance(h);
  }
  w /= m;
  const double b = n * variance(means);
  if (w <= 0.0) return 1.0;  // degenerate (constant) parameter
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

// Effective sample size following the combined-chain autocorrelation estimator
// with Geyer's initial monotone positive sequence truncation.
inline double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  if (n < 4) return std::numeric_limits<double>::quiet_NaN();

  std::vector<double> chain_means(m), chain_vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    chain_means[c] = mean(chains[c]);
    chain_vars[c] = variance(chains[c]);
  }
  const double w = mean(chain_vars);
  double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w;
  if (m > 1) var_plus += variance(chain_means);
  if (var_plus <= 0.0) return static_cast<double>(m * n);

  // Average within-chain autocovariances at each lag.
  auto acov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t)
        s += (chains[c][t] - chain_means[c]) * (chains[c][t + lag] - chain_means[c]);
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };

  double rho_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  const std::size_t max_lag = std::min(n - 2, static_cast<std::size_t>(500));
  for (std::size_t lag = 1; lag + 1 < max_lag; lag += 2) {
    const double rho_a = 1.0 - (w - acov(lag)) / var_plus;
    const double rho_b = 1.0 - (w - acov(lag + 1)) / var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone decrease
    prev_pair = pair;
    rho_sum += pair;
  }
  const double tau = 1.0 + 2.0 * rho_sum;
  return static_cast<double>(m * n) / std::max(tau, 1e-12);
}

}  // namespace profcast::mcmc
