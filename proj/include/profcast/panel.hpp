#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include "profcast/csv.hpp"
#include "profcast/errors.hpp"
#include "profcast/stats.hpp"
#include "profcast/unicode.hpp"

namespace profcast::panel {

using profcast::inv_logit;
using profcast::logit;

enum class Group { boys, girls };
enum class Domain { reading, mathematics };

inline const char* to_string(Group g) { return g == Group::boys ? "boys" : "girls"; }
inline const char* to_string(Domain d) { return d == Domain::reading ? "reading" : "mathematics"; }

inline Group group_from_string(const std::string& s) {
  if (s == "boys") return Group::boys;
  if (s == "girls") return Group::girls;
  throw data_error("unknown group: " + s);
}

inline Domain domain_from_string(const std::string& s) {
  if (s == "reading") return Domain::reading;
  if (s == "mathematics") return Domain::mathematics;
  throw data_error("unknown domain: " + s);
}

// Ordinal time axis for the assessment cycles.
struct Cycle {
  int year = 0;
  int index = 0;
};

inline std::vector<Cycle> make_cycles(const std::vector<int>& years) {
  std::vector<Cycle> cycles;
  int prev = std::numeric_limits<int>::min();
  for (std::size_t i = 0; i < years.size(); ++i) {
    if (years[i] <= prev) throw config_error("cycle years must be strictly increasing");
    prev = years[i];
    cycles.push_back({years[i], static_cast<int>(i)});
  }
  return cycles;
}

// One country trajectory for a (group, domain) pair. `values` are proportions
// in (0,1); `logit_values` their exact logit transforms.
struct OutcomeSeries {
  std::string country;
  Group group = Group::boys;
  Domain domain = Domain::reading;
  std::vector<double> values;
  std::vector<double> logit_values;
};

struct IndicatorMeta {
  std::string name;
  int end_year = 0;
  std::optional<int> substitute_year;
  int start_year = 0;
  std::string category;  // descriptive grouping, carried as metadata only
};

// Long-format indicator observations with explicit missingness.
struct IndicatorTable {
  std::vector<std::string> countries;
  std::vector<IndicatorMeta> meta;
  // values[indicator][year] -> per-country cell, nullopt = missing
  std::vector<std::map<int, std::vector<std::optional<double>>>> values;

  int indicator_index(const std::string& name) const {
    for (std::size_t i = 0; i < meta.size(); ++i)
      if (meta[i].name == name) return static_cast<int>(i);
    return -1;
  }

  std::optional<double> cell(int indicator, int country, int year) const {
    const auto& by_year = values[static_cast<std::size_t>(indicator)];
    auto it = by_year.find(year);
    if (it == by_year.end()) return std::nullopt;
    return it->second[static_cast<std::size_t>(country)];
  }
};

struct DroppedColumn {
  std::string name;
  std::string reason;
};

// Country x predictor matrix. NaN cells mark missing values awaiting
// imputation; analysis-ready matrices have none.
struct DesignMatrix {
  std::vector<std::string> countries;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  std::vector<DroppedColumn> dropped;
  bool standardized = false;
  std::vector<double> col_means;
  std::vector<double> col_sds;

  int missing_count() const {
    int n = 0;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      for (Eigen::Index j = 0; j < values.cols(); ++j)
        if (std::isnan(values(i, j))) ++n;
    return n;
  }
};

struct PanelOptions {
  std::vector<int> cycle_years{2009, 2012, 2015, 2018, 2022};
  std::vector<Group> groups{Group::boys, Group::girls};
  std::vector<Domain> domains{Domain::reading, Domain::mathematics};
  double n_eff_clamp = 10000.0;  // 0%/100% map to 0.5/n_eff from the boundary
  std::string indicator_meta_path;
};

struct ExcludedCountry {
  std::string country;
  std::string reason;
};

struct PanelLoadResult {
  std::vector<OutcomeSeries> series;
  IndicatorTable indicators;
  std::vector<ExcludedCountry> excluded;
  std::vector<Cycle> cycles;
};

// Proportion from a percentage, clamping exact boundary values off 0/1.
inline double proportion_from_percent(double pct, double n_eff) {
  if (!(pct >= 0.0 && pct <= 100.0))
    throw data_error("pct_min_prof outside [0,100]: " + std::to_string(pct));
  double p = pct / 100.0;
  const double eps = 0.5 / n_eff;
  if (p <= 0.0) p = eps;
  if (p >= 1.0) p = 1.0 - eps;
  return p;
}

inline std::vector<IndicatorMeta> load_indicator_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open indicator metadata: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("indicator metadata parse error: " + std::string(e.what()));
  }
  if (!j.contains("indicators") || !j["indicators"].is_array())
    throw data_error("indicator metadata: missing \"indicators\" array");
  std::vector<IndicatorMeta> out;
  for (const auto& item : j["indicators"]) {
    IndicatorMeta m;
    m.name = item.at("name").get<std::string>();
    m.end_year = item.at("end_year").get<int>();
    m.start_year = item.at("start_year").get<int>();
    if (item.contains("substitute_year") && !item["substitute_year"].is_null())
      m.substitute_year = item["substitute_year"].get<int>();
    if (item.contains("category")) m.category = item["category"].get<std::string>();
    out.push_back(std::move(m));
  }
  if (out.empty()) throw data_error("indicator metadata: no indicators defined");
  return out;
}

namespace detail {

inline int require_column(const csv::Table& t, const std::string& name, const std::string& path) {
  const int c = t.column(name);
  if (c < 0) throw data_error(path + ": missing required column \"" + name + "\"");
  return c;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    if (!std::isfinite(v)) throw std::invalid_argument("nonfinite");
    return v;
  } catch (const std::exception&) {
    throw data_error(context + ": not a number: \"" + s + "\"");
  }
}

inline int parse_year(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw data_error(context + ": not a year: \"" + s + "\"");
  }
}

}  // namespace detail

// Ingest the outcome and indicator CSVs, keep countries that have a complete
// outcome panel and indicator coverage, and report every exclusion.
inline PanelLoadResult load_panel(const std::string& outcome_csv_path,
                                  const std::string& indicator_csv_path,
                                  const PanelOptions& opts) {
  PanelLoadResult result;
  result.cycles = make_cycles(opts.cycle_years);
  const auto& cycles = result.cycles;

  const csv::Table outcome = csv::read_file(outcome_csv_path);
  const int c_country = detail::require_column(outcome, "country", outcome_csv_path);
  const int c_year = detail::require_column(outcome, "year", outcome_csv_path);
  const int c_group = detail::require_column(outcome, "group", outcome_csv_path);
  const int c_domain = detail::require_column(outcome, "domain", outcome_csv_path);
  const int c_pct = detail::require_column(outcome, "pct_min_prof", outcome_csv_path);

  std::map<int, int> year_to_index;
  for (const auto& c : cycles) year_to_index[c.year] = c.index;

  std::vector<std::string> order;  // first-appearance country order
  // key: (country, group, domain) -> per-cycle proportion
  std::map<std::tuple<std::string, int, int>, std::vector<std::optional<double>>> cells;

  for (std::size_t r = 0; r < outcome.rows.size(); ++r) {
    const auto& row = outcome.rows[r];
    const std::string where = outcome_csv_path + ":" + std::to_string(r + 2);
    const std::string country = canonical_id(row[static_cast<std::size_t>(c_country)]);
    if (country.empty()) throw data_error(where + ": empty country");
    const int year = detail::parse_year(row[static_cast<std::size_t>(c_year)], where);
    const Group g = group_from_string(row[static_cast<std::size_t>(c_group)]);
    const Domain d = domain_from_string(row[static_cast<std::size_t>(c_domain)]);
    const double pct = detail::parse_double(row[static_cast<std::size_t>(c_pct)], where);
    if (!(pct >= 0.0 && pct <= 100.0))
      throw data_error(where + ": pct_min_prof outside [0,100]");

    auto yit = year_to_index.find(year);
    if (yit == year_to_index.end()) continue;  // years outside the configured cycles are ignored

    if (std::find(order.begin(), order.end(), country) == order.end()) order.push_back(country);
    auto key = std::make_tuple(country, static_cast<int>(g), static_cast<int>(d));
    auto& vec = cells[key];
    if (vec.empty()) vec.assign(cycles.size(), std::nullopt);
    auto& slot = vec[static_cast<std::size_t>(yit->second)];
    if (slot.has_value())
      throw data_error(where + ": duplicate (country, cycle) row for " + country + ", " +
                       std::to_string(year) + ", " + to_string(g) + ", " + to_string(d));
    slot = proportion_from_percent(pct, opts.n_eff_clamp);
  }

  // Indicator ingestion.
  auto meta = load_indicator_meta(opts.indicator_meta_path.empty() ? indicator_csv_path + ".meta.json"
                                                                   : opts.indicator_meta_path);
  const csv::Table ind = csv::read_file(indicator_csv_path);
  const int i_country = detail::require_column(ind, "country", indicator_csv_path);
  const int i_name = detail::require_column(ind, "indicator", indicator_csv_path);
  const int i_year = detail::require_column(ind, "year", indicator_csv_path);
  const int i_value = detail::require_column(ind, "value", indicator_csv_path);

  std::map<std::string, int> meta_index;
  for (std::size_t i = 0; i < meta.size(); ++i) meta_index[meta[i].name] = static_cast<int>(i);

  std::set<std::string> indicator_countries;
  // (indicator, country, year) -> value
  std::map<std::tuple<int, std::string, int>, double> ind_cells;
  for (std::size_t r = 0; r < ind.rows.size(); ++r) {
    const auto& row = ind.rows[r];
    const std::string where = indicator_csv_path + ":" + std::to_string(r + 2);
    const std::string country = canonical_id(row[static_cast<std::size_t>(i_country)]);
    const std::string name = row[static_cast<std::size_t>(i_name)];
    auto mit = meta_index.find(name);
    if (mit == meta_index.end())
      throw data_error(where + ": indicator \"" + name + "\" not present in metadata");
    const int year = detail::parse_year(row[static_cast<std::size_t>(i_year)], where);
    const std::string& raw = row[static_cast<std::size_t>(i_value)];
    indicator_countries.insert(country);
    if (raw.empty()) continue;  // empty field = missing
    ind_cells[{mit->second, country, year}] = detail::parse_double(raw, where);
  }

  // Retain countries with complete outcome panels and indicator presence.
  std::vector<std::string> retained;
  for (const auto& country : order) {
    std::string reason;
    for (Group g : opts.groups) {
      for (Domain d : opts.domains) {
        auto it = cells.find({country, static_cast<int>(g), static_cast<int>(d)});
        if (it == cells.end()) {
          reason = std::string("missing outcome series for ") + to_string(g) + "/" + to_string(d);
          break;
        }
        for (std::size_t t = 0; t < cycles.size(); ++t) {
          if (!it->second[t].has_value()) {
            reason = std::string("incomplete cycles for ") + to_string(g) + "/" + to_string(d) +
                     " (missing " + std::to_string(cycles[t].year) + ")";
            break;
          }
        }
        if (!reason.empty()) break;
      }
      if (!reason.empty()) break;
    }
    if (reason.empty() && indicator_countries.count(country) == 0)
      reason = "absent from indicator table";
    if (reason.empty()) retained.push_back(country);
    else result.excluded.push_back({country, reason});
  }
  for (const auto& country : indicator_countries) {
    if (std::find(order.begin(), order.end(), country) == order.end())
      result.excluded.push_back({country, "absent from outcome panel"});
  }

  for (const auto& country : retained) {
    for (Group g : opts.groups) {
      for (Domain d : opts.domains) {
        const auto& vec = cells.at({country, static_cast<int>(g), static_cast<int>(d)});
        OutcomeSeries s;
        s.country = country;
        s.group = g;
        s.domain = d;
        for (const auto& v : vec) {
          s.values.push_back(*v);
          s.logit_values.push_back(logit(*v));
        }
        result.series.push_back(std::move(s));
      }
    }
  }

  IndicatorTable table;
  table.countries = retained;
  table.meta = meta;
  table.values.resize(meta.size());
  std::map<std::string, int> country_index;
  for (std::size_t i = 0; i < retained.size(); ++i) country_index[retained[i]] = static_cast<int>(i);
  for (const auto& [key, value] : ind_cells) {
    const auto& [ind_idx, country, year] = key;
    auto cit = country_index.find(country);
    if (cit == country_index.end()) continue;
    auto& by_year = table.values[static_cast<std::size_t>(ind_idx)];
    auto yit = by_year.find(year);
    if (yit == by_year.end())
      yit = by_year.emplace(year, std::vector<std::optional<double>>(retained.size())).first;
    yit->second[static_cast<std::size_t>(cit->second)] = value;
  }
  result.indicators = std::move(table);
  return result;
}

// Difference variables: end-year (or substitute-year) value minus start-year
// value per indicator. Missing cells propagate as NaN unless disallowed.
// Columns with no variance across countries are dropped and recorded.
inline DesignMatrix make_difference_variables(const IndicatorTable& table,
                                              bool allow_missing = true) {
  const std::size_t n = table.countries.size();
  std::vector<std::vector<double>> cols;
  std::vector<std::string> names;
  std::vector<DroppedColumn> dropped;

  for (std::size_t k = 0; k < table.meta.size(); ++k) {
    const auto& m = table.meta[k];
    std::vector<double> col(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
      auto end_v = table.cell(static_cast<int>(k), static_cast<int>(i), m.end_year);
      if (!end_v.has_value() && m.substitute_year.has_value())
        end_v = table.cell(static_cast<int>(k), static_cast<int>(i), *m.substitute_year);
      const auto start_v = table.cell(static_cast<int>(k), static_cast<int>(i), m.start_year);
      if (!end_v.has_value() || !start_v.has_value()) {
        if (!allow_missing)
          throw data_error("indicator \"" + m.name + "\", country \"" + table.countries[i] +
                           "\": end and substitute years both missing and imputation disabled");
        continue;
      }
      col[i] = *end_v - *start_v;
    }

    // variance over observed entries
    std::vector<double> observed;
    for (double v : col)
      if (!std::isnan(v)) observed.push_back(v);
    if (observed.size() < 2) {
      dropped.push_back({m.name, "fewer than 2 observed cells"});
      continue;
    }
    if (variance(observed) == 0.0) {
      dropped.push_back({m.name, "zero variance"});
      continue;
    }
    names.push_back(m.name);
    cols.push_back(std::move(col));
  }

  DesignMatrix X;
  X.countries = table.countries;
  X.columns = std::move(names);
  X.dropped = std::move(dropped);
  X.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(X.columns.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < n; ++i)
      X.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  return X;
}

inline double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  const Eigen::VectorXd ca = a.array() - ma;
  const Eigen::VectorXd cb = b.array() - mb;
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  if (denom == 0.0) return 0.0;
  return ca.dot(cb) / denom;
}

// Greedy collinearity filter: scan pairs in column order, drop the later
// column of any pair whose |correlation| exceeds the threshold.
inline DesignMatrix drop_collinear(const DesignMatrix& X, double threshold) {
  if (X.missing_count() > 0) throw data_error("drop_collinear: matrix has missing cells");
  const Eigen::Index q = X.values.cols();
  std::vector<bool> keep(static_cast<std::size_t>(q), true);
  std::vector<DroppedColumn> dropped = X.dropped;
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = i + 1; j < q; ++j) {
      if (!keep[static_cast<std::size_t>(j)]) continue;
      const double r = pearson_correlation(X.values.col(i), X.values.col(j));
      if (std::abs(r) > threshold) {
        keep[static_cast<std::size_t>(j)] = false;
        dropped.push_back({X.columns[static_cast<std::size_t>(j)],
                           "collinear with \"" + X.columns[static_cast<std::size_t>(i)] +
                               "\" (r=" + csv::format_number(r) + ")"});
      }
    }
  }

  DesignMatrix out;
  out.countries = X.countries;
  out.dropped = std::move(dropped);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < q; ++j)
    if (keep[static_cast<std::size_t>(j)]) {
      cols.push_back(j);
      out.columns.push_back(X.columns[static_cast<std::size_t>(j)]);
    }
  out.values.resize(X.values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = X.values.col(cols[j]);
  return out;
}

// Z-score all columns; required before g-prior model averaging.
inline DesignMatrix standardize(const DesignMatrix& X) {
  if (X.missing_count() > 0) throw data_error("standardize: matrix has missing cells");
  DesignMatrix out = X;
  out.standardized = true;
  out.col_means.resize(static_cast<std::size_t>(X.values.cols()));
  out.col_sds.resize(static_cast<std::size_t>(X.values.cols()));
  for (Eigen::Index j = 0; j < X.values.cols(); ++j) {
    const double m = X.values.col(j).mean();
    const double n = static_cast<double>(X.values.rows());
    const double sd = std::sqrt((X.values.col(j).array() - m).square().sum() / (n - 1.0));
    if (sd <= 0.0)
      throw data_error("standardize: zero-variance column \"" +
                       X.columns[static_cast<std::size_t>(j)] + "\"");
    out.col_means[static_cast<std::size_t>(j)] = m;
    out.col_sds[static_cast<std::size_t>(j)] = sd;
    out.values.col(j) = (X.values.col(j).array() - m) / sd;
  }
  return out;
}

}  // namespace profcast::panel
