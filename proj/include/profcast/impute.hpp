#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profcast/errors.hpp"
#include "profcast/panel.hpp"
#include "profcast/rng.hpp"

namespace profcast::impute {

struct FilledCell {
  std::string country;
  std::string indicator;
  std::string donor_country;
  double donated_value = 0.0;
};

struct ImputationReport {
  std::vector<FilledCell> filled;
  int n_missing_before = 0;
  int n_missing_after = 0;
  std::uint64_t seed = 0;
  int sweeps = 0;
  std::vector<std::string> fallback_columns;  // columns matched on column-mean distance
  std::string note = "single imputation (predictive mean matching)";
};

namespace detail {

struct ColumnState {
  int col = 0;
  std::vector<int> missing_rows;
  std::vector<int> observed_rows;
};

// Least-squares fit of column `c` on all other columns plus an intercept,
// using only `observed_rows`. Returns fitted values for every row; falls back
// to the observed column mean when the regression is rank deficient.
inline bool regression_fits(const Eigen::MatrixXd& X, const ColumnState& st,
                            Eigen::VectorXd& fitted) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();  // intercept + all other columns
  Eigen::MatrixXd design(static_cast<Eigen::Index>(st.observed_rows.size()), p);
  Eigen::VectorXd target(static_cast<Eigen::Index>(st.observed_rows.size()));
  for (std::size_t r = 0; r < st.observed_rows.size(); ++r) {
    const Eigen::Index row = st.observed_rows[r];
    Eigen::Index k = 0;
    design(static_cast<Eigen::Index>(r), k++) = 1.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (j == st.col) continue;
      design(static_cast<Eigen::Index>(r), k++) = X(row, j);
    }
    target(static_cast<Eigen::Index>(r)) = X(row, st.col);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols() || design.rows() < design.cols()) return false;
  const Eigen::VectorXd beta = qr.solve(target);

  fitted.resize(n);
  for (Eigen::Index row = 0; row < n; ++row) {
    double f = beta(0);
    Eigen::Index k = 1;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (j == st.col) continue;
      f += beta(k++) * X(row, j);
    }
    fitted(row) = f;
  }
  return true;
}

}  // namespace detail

// Predictive mean matching with chained passes. Missing cells receive an
// observed donor value from the row whose regression-fitted value is nearest;
// ties and multiple matches resolve uniformly at random. Passes repeat until
// donor assignments stabilize or 10 sweeps elapse.
inline std::pair<panel::DesignMatrix, ImputationReport> pmm_impute(
    const panel::DesignMatrix& input, int k_neighbors, std::uint64_t seed) {
  if (k_neighbors < 1) throw config_error("pmm_impute: k_neighbors must be positive");
  panel::DesignMatrix X = input;
  ImputationReport report;
  report.seed = seed;
  report.n_missing_before = input.missing_count();
  if (report.n_missing_before == 0) {
    report.n_missing_after = 0;
    return {std::move(X), std::move(report)};
  }

  const Eigen::Index n = X.values.rows();
  const Eigen::Index q = X.values.cols();

  std::vector<detail::ColumnState> incomplete;
  bool any_complete = false;
  for (Eigen::Index j = 0; j < q; ++j) {
    detail::ColumnState st;
    st.col = static_cast<int>(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(X.values(i, j))) st.missing_rows.push_back(static_cast<int>(i));
      else st.observed_rows.push_back(static_cast<int>(i));
    }
    if (static_cast<int>(st.observed_rows.size()) < k_neighbors + 1)
      throw data_error("pmm_impute: column \"" + X.columns[static_cast<std::size_t>(j)] +
                       "\" has fewer than k+1 observed entries");
    if (st.missing_rows.empty()) any_complete = true;
    else incomplete.push_back(std::move(st));
  }
  if (!any_complete)
    throw data_error("pmm_impute: no fully observed column to seed the regression cycle");

  // Ascending missing count stabilizes the early regressions of each sweep.
  std::stable_sort(incomplete.begin(), incomplete.end(),
                   [](const auto& a, const auto& b) {
                     return a.missing_rows.size() < b.missing_rows.size();
                   });

  // Mean-initialize missing cells before the first sweep.
  for (const auto& st : incomplete) {
    double m = 0.0;
    for (int r : st.observed_rows) m += X.values(r, st.col);
    m /= static_cast<double>(st.observed_rows.size());
    for (int r : st.missing_rows) X.values(r, st.col) = m;
  }

  Rng rng(seed);
  std::vector<std::vector<int>> donors(incomplete.size());
  for (std::size_t c = 0; c < incomplete.size(); ++c)
    donors[c].assign(incomplete[c].missing_rows.size(), -1);
  std::vector<bool> used_fallback(incomplete.size(), false);

  const int max_sweeps = 10;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (std::size_t c = 0; c < incomplete.size(); ++c) {
      const auto& st = incomplete[c];
      Eigen::VectorXd fitted;
      bool ok = detail::regression_fits(X.values, st, fitted);
      if (!ok) {
        // Column-mean-distance fallback: donors ranked by |value - mean|.
        used_fallback[c] = true;
        double m = 0.0;
        for (int r : st.observed_rows) m += X.values(r, st.col);
        m /= static_cast<double>(st.observed_rows.size());
        fitted = Eigen::VectorXd::Constant(n, m);
        for (int r : st.observed_rows) fitted(r) = X.values(r, st.col);
      }

      for (std::size_t mi = 0; mi < st.missing_rows.size(); ++mi) {
        const int row = st.missing_rows[mi];
        std::vector<std::pair<double, int>> dist;
        dist.reserve(st.observed_rows.size());
        for (int orow : st.observed_rows)
          dist.emplace_back(std::abs(fitted(orow) - fitted(row)), orow);
        std::partial_sort(dist.begin(), dist.begin() + k_neighbors, dist.end());
        const std::size_t pick = rng.uniform_index(static_cast<std::size_t>(k_neighbors));
        const int donor = dist[pick].second;
        if (donor != donors[c][mi]) {
          donors[c][mi] = donor;
          changed = true;
        }
        X.values(row, st.col) = X.values(donor, st.col);
      }
    }
    if (!changed) {
      ++sweep;
      break;
    }
  }
  report.sweeps = sweep;

  for (std::size_t c = 0; c < incomplete.size(); ++c) {
    const auto& st = incomplete[c];
    if (used_fallback[c])
      report.fallback_columns.push_back(X.columns[static_cast<std::size_t>(st.col)]);
    for (std::size_t mi = 0; mi < st.missing_rows.size(); ++mi) {
      FilledCell cell;
      cell.country = X.countries[static_cast<std::size_t>(st.missing_rows[mi])];
      cell.indicator = X.columns[static_cast<std::size_t>(st.col)];
      cell.donor_country = X.countries[static_cast<std::size_t>(donors[c][mi])];
      cell.donated_value = X.values(st.missing_rows[mi], st.col);
      report.filled.push_back(std::move(cell));
    }
  }
  report.n_missing_after = X.missing_count();
  return {std::move(X), std::move(report)};
}

// Per-country missing fraction over the design matrix; countries above the
// cutoff are dropped from the analysis set and reported.
struct ExclusionResult {
  panel::DesignMatrix matrix;
  std::vector<panel::ExcludedCountry> excluded;
};

inline ExclusionResult exclude_high_missingness(const panel::DesignMatrix& X,
                                                double max_missing_fraction) {
  const Eigen::Index n = X.values.rows();
  const Eigen::Index q = X.values.cols();
  std::vector<int> keep_rows;
  ExclusionResult result;
  for (Eigen::Index i = 0; i < n; ++i) {
    int miss = 0;
    for (Eigen::Index j = 0; j < q; ++j)
      if (std::isnan(X.values(i, j))) ++miss;
    const double frac = q == 0 ? 0.0 : static_cast<double>(miss) / static_cast<double>(q);
    if (frac > max_missing_fraction) {
      result.excluded.push_back({X.countries[static_cast<std::size_t>(i)],
                                 "missing fraction " + csv::format_number(frac) +
                                     " exceeds max_missing_fraction"});
    } else {
      keep_rows.push_back(static_cast<int>(i));
    }
  }
  result.matrix.columns = X.columns;
  result.matrix.dropped = X.dropped;
  result.matrix.values.resize(static_cast<Eigen::Index>(keep_rows.size()), q);
  for (std::size_t r = 0; r < keep_rows.size(); ++r) {
    result.matrix.countries.push_back(X.countries[static_cast<std::size_t>(keep_rows[r])]);
    result.matrix.values.row(static_cast<Eigen::Index>(r)) = X.values.row(keep_rows[r]);
  }
  return result;
}

}  // namespace profcast::impute
