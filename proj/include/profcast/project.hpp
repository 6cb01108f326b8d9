#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profcast/bma.hpp"
#include "profcast/errors.hpp"
#include "profcast/lgcm.hpp"
#include "profcast/panel.hpp"
#include "profcast/rng.hpp"
#include "profcast/stats.hpp"

namespace profcast::project {

struct ForecastPoint {
  int year = 0;
  double mean = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
};

// Percentage-scale trajectory for one country (or the cross-country pool).
// Logit-scale draws are retained so pooled bands can be formed downstream.
struct ProjectionResult {
  std::string country;
  panel::Group group = panel::Group::boys;
  panel::Domain domain = panel::Domain::reading;
  std::vector<int> history_years;
  std::vector<double> history;  // observed percentages
  std::vector<double> fitted;   // model-implied percentages at observed cycles
  std::vector<double> fitted_lo;
  std::vector<double> fitted_hi;
  std::vector<ForecastPoint> forecast;
  double change_first_to_last = 0.0;  // last forecast minus first observed, pp

  Eigen::MatrixXd logit_draws;  // S x (n_history + n_future), logit scale
};

struct FutureCycle {
  int year = 0;
  double loading = 0.0;  // extension of the per-cycle ladder
};

namespace detail {

inline ForecastPoint summarize_logit_column(const Eigen::MatrixXd& draws, Eigen::Index col,
                                            int year) {
  std::vector<double> v(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index s = 0; s < draws.rows(); ++s) v[static_cast<std::size_t>(s)] = draws(s, col);
  ForecastPoint p;
  p.year = year;
  p.mean = 100.0 * inv_logit(mean(v));
  p.lo95 = std::min(100.0 * inv_logit(quantile(v, 0.025)), p.mean);
  p.hi95 = std::max(100.0 * inv_logit(quantile(v, 0.975)), p.mean);
  return p;
}

}  // namespace detail

// Forward trajectory for one country: country intercept draws from the growth
// posterior paired with rate-of-progress draws from the BMA predictive
// mixture, pushed through the loading ladder and summarized on the logit
// scale before back-transforming.
inline ProjectionResult project_country(const lgcm::GrowthPosterior& growth,
                                        const bma::BmaResult& bma_result,
                                        const Eigen::VectorXd& x_country,
                                        const panel::OutcomeSeries& observed,
                                        const std::vector<panel::Cycle>& cycles,
                                        const std::vector<FutureCycle>& future,
                                        std::uint64_t seed) {
  const int n_hist = static_cast<int>(cycles.size());
  if (static_cast<int>(observed.values.size()) != n_hist)
    throw data_error("project_country: observed series / cycle mismatch");
  const int last_year = cycles.back().year;
  for (const auto& f : future)
    if (f.year <= last_year)
      throw data_error("project_country: future year " + std::to_string(f.year) +
                       " not after the last observed cycle");

  const Eigen::VectorXd intercepts = growth.column("intercept[" + observed.country + "]");
  const Eigen::Index s_total = intercepts.size();

  // Per-cycle loadings: fixed ladder values or posterior draws for freed ones.
  Eigen::MatrixXd loadings(s_total, n_hist);
  for (int t = 0; t < n_hist; ++t) {
    const auto& entry = growth.spec.slope_loadings[static_cast<std::size_t>(t)];
    if (entry.fixed) {
      loadings.col(t).setConstant(entry.value);
    } else {
      loadings.col(t) = growth.column("loading[t" + std::to_string(t) + "]");
    }
  }

  Rng rng(seed);
  const bma::PredictiveSampler slope_sampler(bma_result, x_country);
  Eigen::VectorXd slopes(s_total);
  for (Eigen::Index s = 0; s < s_total; ++s) slopes(s) = slope_sampler.draw(rng);

  ProjectionResult result;
  result.country = observed.country;
  result.group = observed.group;
  result.domain = observed.domain;
  result.logit_draws.resize(s_total, n_hist + static_cast<int>(future.size()));
  for (int t = 0; t < n_hist; ++t)
    result.logit_draws.col(t) = intercepts.array() + slopes.array() * loadings.col(t).array();
  for (std::size_t f = 0; f < future.size(); ++f)
    result.logit_draws.col(n_hist + static_cast<int>(f)) =
        intercepts.array() + slopes.array() * future[f].loading;

  for (int t = 0; t < n_hist; ++t) {
    result.history_years.push_back(cycles[static_cast<std::size_t>(t)].year);
    result.history.push_back(100.0 * observed.values[static_cast<std::size_t>(t)]);
    const ForecastPoint p = detail::summarize_logit_column(
        result.logit_draws, t, cycles[static_cast<std::size_t>(t)].year);
    result.fitted.push_back(p.mean);
    result.fitted_lo.push_back(p.lo95);
    result.fitted_hi.push_back(p.hi95);
  }
  for (std::size_t f = 0; f < future.size(); ++f)
    result.forecast.push_back(detail::summarize_logit_column(
        result.logit_draws, n_hist + static_cast<Eigen::Index>(f), future[f].year));

  if (!result.forecast.empty())
    result.change_first_to_last = result.forecast.back().mean - result.history.front();
  return result;
}

// Unweighted cross-country mean trajectory with pooled credible bands
// (quantiles of the cross-country draw mixture).
inline ProjectionResult project_overall(const std::vector<ProjectionResult>& per_country) {
  if (per_country.empty()) throw data_error("project_overall: no country results");
  const auto& first = per_country.front();
  for (const auto& r : per_country) {
    if (r.history_years != first.history_years)
      throw data_error("project_overall: mismatched cycle sets");
    if (r.forecast.size() != first.forecast.size())
      throw data_error("project_overall: mismatched forecast horizons");
    for (std::size_t f = 0; f < r.forecast.size(); ++f)
      if (r.forecast[f].year != first.forecast[f].year)
        throw data_error("project_overall: mismatched forecast years");
  }

  ProjectionResult overall;
  overall.country = "ALL";
  overall.group = first.group;
  overall.domain = first.domain;
  overall.history_years = first.history_years;

  const double n = static_cast<double>(per_country.size());
  for (std::size_t t = 0; t < first.history.size(); ++t) {
    double h = 0.0, fit = 0.0;
    for (const auto& r : per_country) {
      h += r.history[t];
      fit += r.fitted[t];
    }
    overall.history.push_back(h / n);
    overall.fitted.push_back(fit / n);
  }
  // pooled bands at the observed cycles come from the stacked draws below

  // Pool logit draws across countries column-by-column.
  const Eigen::Index cols = first.logit_draws.cols();
  Eigen::Index total_rows = 0;
  for (const auto& r : per_country) total_rows += r.logit_draws.rows();
  overall.logit_draws.resize(total_rows, cols);
  Eigen::Index at = 0;
  for (const auto& r : per_country) {
    overall.logit_draws.middleRows(at, r.logit_draws.rows()) = r.logit_draws;
    at += r.logit_draws.rows();
  }

  for (std::size_t t = 0; t < first.history.size(); ++t) {
    const ForecastPoint p = detail::summarize_logit_column(
        overall.logit_draws, static_cast<Eigen::Index>(t), overall.history_years[t]);
    overall.fitted_lo.push_back(p.lo95);
    overall.fitted_hi.push_back(p.hi95);
  }

  for (std::size_t f = 0; f < first.forecast.size(); ++f) {
    const Eigen::Index col = static_cast<Eigen::Index>(first.history.size() + f);
    ForecastPoint p = detail::summarize_logit_column(overall.logit_draws, col,
                                                     first.forecast[f].year);
    // point forecast: unweighted mean of the per-country forecast means
    double m = 0.0;
    for (const auto& r : per_country) m += r.forecast[f].mean;
    p.mean = m / n;
    p.lo95 = std::min(p.lo95, p.mean);
    p.hi95 = std::max(p.hi95, p.mean);
    overall.forecast.push_back(p);
  }
  if (!overall.forecast.empty())
    overall.change_first_to_last = overall.forecast.back().mean - overall.history.front();
  return overall;
}

struct ChangeRow {
  std::string country;
  panel::Group group = panel::Group::boys;
  panel::Domain domain = panel::Domain::reading;
  double base_exact = 0.0;
  double target_exact = 0.0;
  double change_exact = 0.0;
  int base = 0;    // rounded presentation values
  int target = 0;
  int change = 0;
};

namespace detail {

inline double value_at_year(const ProjectionResult& r, int year, const char* which) {
  for (std::size_t t = 0; t < r.history_years.size(); ++t)
    if (r.history_years[t] == year) return r.history[t];
  for (const auto& f : r.forecast)
    if (f.year == year) return f.mean;
  throw data_error(std::string("change_table: ") + which + " year " + std::to_string(year) +
                   " absent from history and forecast for " + r.country);
}

}  // namespace detail

// Base/target percentages and their difference, rounded for presentation with
// exact values retained. Increases are positive.
inline std::vector<ChangeRow> change_table(const std::vector<ProjectionResult>& results,
                                           int base_year, int target_year) {
  std::vector<ChangeRow> rows;
  for (const auto& r : results) {
    ChangeRow row;
    row.country = r.country;
    row.group = r.group;
    row.domain = r.domain;
    row.base_exact = detail::value_at_year(r, base_year, "base");
    row.target_exact = detail::value_at_year(r, target_year, "target");
    row.change_exact = row.target_exact - row.base_exact;
    row.base = static_cast<int>(std::lround(row.base_exact));
    row.target = static_cast<int>(std::lround(row.target_exact));
    row.change = static_cast<int>(std::lround(row.change_exact));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace profcast::project
