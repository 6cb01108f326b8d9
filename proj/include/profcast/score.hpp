#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profcast/errors.hpp"
#include "profcast/stats.hpp"

namespace profcast::score {

// Closed-form KL divergence between two univariate normals, I(f, g).
inline double kld_gaussian(double f_mean, double f_sd, double g_mean, double g_sd) {
  if (f_sd <= 0.0 || g_sd <= 0.0) throw numeric_error("kld_gaussian: nonpositive sd");
  const double dm = f_mean - g_mean;
  return std::log(g_sd / f_sd) + (f_sd * f_sd + dm * dm) / (2.0 * g_sd * g_sd) - 0.5;
}

// Sample-based KL divergence via Gaussian KDEs on a shared grid. Densities
// are discretized to cell masses, floored at 1e-12 and renormalized, so the
// discrete divergence is nonnegative by construction.
inline double kld_samples(std::span<const double> f_draws, std::span<const double> g_draws,
                          int n_grid = 512) {
  if (f_draws.size() < 100 || g_draws.size() < 100)
    throw data_error("kld_samples: need at least 100 draws per sample");
  if (n_grid < 16) throw config_error("kld_samples: grid too small");

  const double hf = kde_bandwidth(f_draws);
  const double hg = kde_bandwidth(g_draws);
  const double pad = 3.0 * std::max(hf, hg);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : f_draws) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : g_draws) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  lo -= pad;
  hi += pad;

  std::vector<double> grid(static_cast<std::size_t>(n_grid));
  for (int i = 0; i < n_grid; ++i)
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n_grid - 1);

  auto to_mass = [&](std::span<const double> draws, double h) {
    auto dens = kde_evaluate(draws, grid, h);
    double total = 0.0;
    for (double d : dens) total += d;
    if (total <= 0.0) throw numeric_error("kld_samples: degenerate density");
    for (double& d : dens) d = std::max(d / total, 1e-12);
    total = 0.0;
    for (double d : dens) total += d;
    for (double& d : dens) d /= total;
    return dens;
  };

  const auto p = to_mass(f_draws, hf);
  const auto q = to_mass(g_draws, hg);
  double kl = 0.0;
  for (int i = 0; i < n_grid; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    kl += p[k] * std::log(p[k] / q[k]);
  }
  return std::max(kl, 0.0);
}

// Negative log Gaussian density of the observation under the prediction.
inline double log_predictive_score(double pred_mean, double pred_sd, double observed) {
  if (pred_sd <= 0.0) throw numeric_error("log_predictive_score: nonpositive sd");
  return -normal_logpdf(observed, pred_mean, pred_sd);
}

struct GpdFit {
  double xi = 0.0;     // shape
  double sigma = 0.0;  // scale
  bool valid = false;
};

// Hosking-Wallis method-of-moments fit to excesses over a threshold.
inline GpdFit fit_gpd_moments(std::span<const double> excesses) {
  GpdFit fit;
  if (excesses.size() < 5) return fit;
  const double m = mean(excesses);
  const double v = variance(excesses);
  if (!(v > 0.0) || !(m > 0.0)) return fit;
  const double ratio = m * m / v;
  fit.xi = 0.5 * (1.0 - ratio);
  fit.sigma = 0.5 * m * (ratio + 1.0);
  fit.valid = fit.sigma > 0.0;
  return fit;
}

inline double gpd_quantile(const GpdFit& fit, double p) {
  if (std::abs(fit.xi) < 1e-8) return -fit.sigma * std::log1p(-p);
  return fit.sigma * (std::pow(1.0 - p, -fit.xi) - 1.0) / fit.xi;
}

struct LooResult {
  double elpd_loo = 0.0;
  double loo_ic = 0.0;
  std::vector<double> pointwise;  // per-observation elpd contributions
  std::vector<double> pareto_k;   // NaN when not applicable
  int n_bad_k = 0;                // count of k-hat > 0.7
  std::string scale;              // estimation scale recorded by the caller
};

// PSIS-LOO from an S x n matrix of pointwise log-likelihood draws.
// Importance ratios are 1/likelihood; the largest 20% are replaced by fitted
// generalized-Pareto order statistics and all weights truncated at
// S^{3/4} * mean weight.
inline LooResult psis_loo(const Eigen::MatrixXd& log_lik) {
  const Eigen::Index s = log_lik.rows();
  const Eigen::Index n = log_lik.cols();
  if (s < 2 || n < 1) throw data_error("psis_loo: degenerate log-likelihood matrix");
  if (!log_lik.allFinite()) throw data_error("psis_loo: non-finite log-likelihood entries");

  LooResult result;
  result.pointwise.resize(static_cast<std::size_t>(n));
  result.pareto_k.resize(static_cast<std::size_t>(n));

  const Eigen::Index tail_len = static_cast<Eigen::Index>(0.2 * static_cast<double>(s));

  for (Eigen::Index i = 0; i < n; ++i) {
    // log raw ratios, stabilized by their maximum
    std::vector<double> lw(static_cast<std::size_t>(s));
    for (Eigen::Index r = 0; r < s; ++r) lw[static_cast<std::size_t>(r)] = -log_lik(r, i);
    const double lw_max = *std::max_element(lw.begin(), lw.end());
    for (double& v : lw) v -= lw_max;

    double khat = std::numeric_limits<double>::quiet_NaN();
    if (tail_len >= 5) {
      // ranks of the tail_len largest ratios
      std::vector<int> order(static_cast<std::size_t>(s));
      for (Eigen::Index r = 0; r < s; ++r) order[static_cast<std::size_t>(r)] = static_cast<int>(r);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (lw[static_cast<std::size_t>(a)] != lw[static_cast<std::size_t>(b)])
          return lw[static_cast<std::size_t>(a)] < lw[static_cast<std::size_t>(b)];
        return a < b;
      });
      const std::size_t cut = static_cast<std::size_t>(s - tail_len);
      const double threshold = std::exp(lw[static_cast<std::size_t>(order[cut - 1])]);
      std::vector<double> excess(static_cast<std::size_t>(tail_len));
      for (std::size_t t = 0; t < excess.size(); ++t)
        excess[t] = std::exp(lw[static_cast<std::size_t>(order[cut + t])]) - threshold;
      const GpdFit fit = fit_gpd_moments(excess);
      if (fit.valid) {
        khat = fit.xi;
        const double m = static_cast<double>(tail_len);
        for (std::size_t t = 0; t < excess.size(); ++t) {
          const double p = (static_cast<double>(t) + 0.5) / m;
          const double smoothed = threshold + gpd_quantile(fit, p);
          lw[static_cast<std::size_t>(order[cut + t])] = std::log(smoothed);
        }
      }
    }

    // truncate at S^{3/4} * mean weight (log scale)
    std::vector<double> tmp = lw;
    const double log_sum = log_sum_exp(tmp);
    const double log_mean = log_sum - std::log(static_cast<double>(s));
    const double log_cap = 0.75 * std::log(static_cast<double>(s)) + log_mean;
    for (double& v : lw) v = std::min(v, log_cap);

    // elpd_i = log( sum_s w_s lik_s / sum_s w_s )
    std::vector<double> lw_plus(lw.size());
    for (Eigen::Index r = 0; r < s; ++r)
      lw_plus[static_cast<std::size_t>(r)] = lw[static_cast<std::size_t>(r)] + log_lik(r, i);
    const double elpd_i = log_sum_exp(lw_plus) - log_sum_exp(lw);

    result.pointwise[static_cast<std::size_t>(i)] = elpd_i;
    result.pareto_k[static_cast<std::size_t>(i)] = khat;
    if (std::isfinite(khat) && khat > 0.7) ++result.n_bad_k;
  }

  result.elpd_loo = 0.0;
  for (double v : result.pointwise) result.elpd_loo += v;
  result.loo_ic = -2.0 * result.elpd_loo;
  return result;
}

}  // namespace profcast::score
