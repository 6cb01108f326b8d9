#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "profcast/bma.hpp"
#include "profcast/config.hpp"
#include "profcast/csv.hpp"
#include "profcast/errors.hpp"
#include "profcast/impute.hpp"
#include "profcast/lgcm.hpp"
#include "profcast/panel.hpp"
#include "profcast/project.hpp"
#include "profcast/score.hpp"
#include "profcast/svg.hpp"
#include "profcast/version.hpp"

namespace profcast::pipeline {

namespace fs = std::filesystem;

// Records files written by a run so partial outputs can be removed on failure.
class OutputTracker {
 public:
  void add(const fs::path& p) { paths_.push_back(p); }

  void rollback() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
    paths_.clear();
  }

  void commit() { paths_.clear(); }

 private:
  std::vector<fs::path> paths_;
};

// One pipeline run per output directory.
class LockFile {
 public:
  explicit LockFile(const fs::path& dir) : path_(dir / ".profcast.lock") {
    if (fs::exists(path_))
      throw config_error("output directory is locked by another run: " + path_.string());
    std::ofstream out(path_);
    if (!out) throw config_error("cannot create lockfile in " + dir.string());
    out << "locked\n";
  }
  ~LockFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  fs::path path_;
};

inline void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw config_error("output directory not writable: " + dir.string());
}

namespace detail {

inline std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) out.push_back(c);
    else out.push_back('_');
  }
  return out;
}

inline void write_json_file(OutputTracker& tracker, const fs::path& path,
                            const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  tracker.add(path);
}

inline std::string gd_tag(panel::Group g, panel::Domain d) {
  return std::string(panel::to_string(g)) + "_" + panel::to_string(d);
}

inline int gd_index(panel::Group g, panel::Domain d) {
  return static_cast<int>(g) * 2 + static_cast<int>(d);
}

inline int model_index(const std::string& label) {
  if (label == "m0") return 0;
  if (label == "m1") return 1;
  return 2;
}

}  // namespace detail

struct PreparedData {
  panel::PanelLoadResult panel;
  panel::DesignMatrix design_completed;  // post-imputation difference variables
  panel::DesignMatrix design;            // collinearity-filtered and standardized
  impute::ImputationReport imputation;
  std::vector<panel::ExcludedCountry> excluded;  // every exclusion across stages
  std::vector<panel::OutcomeSeries> series;      // restricted to the analysis set
};

// Ingest, differences, missingness exclusion, single imputation,
// collinearity filter, standardization.
inline PreparedData prepare_data(const PipelineConfig& cfg) {
  PreparedData out;
  out.panel = panel::load_panel(cfg.outcome_csv, cfg.indicator_csv, cfg.panel_options());
  out.excluded = out.panel.excluded;

  panel::DesignMatrix diffs = panel::make_difference_variables(out.panel.indicators, true);
  auto excl = impute::exclude_high_missingness(diffs, cfg.max_missing_fraction);
  for (const auto& e : excl.excluded) out.excluded.push_back(e);

  auto [completed, report] = impute::pmm_impute(excl.matrix, cfg.k_neighbors, cfg.impute_seed);
  out.design_completed = std::move(completed);
  out.imputation = std::move(report);

  panel::DesignMatrix filtered =
      panel::drop_collinear(out.design_completed, cfg.collinearity_threshold);
  out.design = panel::standardize(filtered);

  std::set<std::string> analysis_set(out.design.countries.begin(), out.design.countries.end());
  for (const auto& s : out.panel.series)
    if (analysis_set.count(s.country)) out.series.push_back(s);
  return out;
}

inline std::vector<panel::OutcomeSeries> series_for(const PreparedData& data, panel::Group g,
                                                    panel::Domain d) {
  std::vector<panel::OutcomeSeries> out;
  // keep design-matrix country order so outcome and predictor rows align
  for (const auto& country : data.design.countries)
    for (const auto& s : data.series)
      if (s.country == country && s.group == g && s.domain == d) out.push_back(s);
  return out;
}

inline nlohmann::json validation_report_json(const PreparedData& data) {
  nlohmann::json j;
  j["countries"] = data.design.countries;
  j["n_countries"] = data.design.countries.size();
  j["n_series"] = data.series.size();
  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& e : data.excluded)
    excluded.push_back({{"country", e.country}, {"reason", e.reason}});
  j["excluded"] = excluded;
  nlohmann::json dropped = nlohmann::json::array();
  for (const auto& d : data.design.dropped)
    dropped.push_back({{"column", d.name}, {"reason", d.reason}});
  j["dropped_columns"] = dropped;
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& c : data.panel.cycles) cycles.push_back({{"year", c.year}, {"index", c.index}});
  j["cycles"] = cycles;
  j["retained_predictors"] = data.design.columns;
  return j;
}

inline nlohmann::json imputation_report_json(const impute::ImputationReport& r) {
  nlohmann::json j;
  j["n_missing_before"] = r.n_missing_before;
  j["n_missing_after"] = r.n_missing_after;
  j["seed"] = r.seed;
  j["sweeps"] = r.sweeps;
  j["note"] = r.note;
  j["fallback_columns"] = r.fallback_columns;
  nlohmann::json filled = nlohmann::json::array();
  for (const auto& f : r.filled)
    filled.push_back({{"country", f.country},
                      {"indicator", f.indicator},
                      {"donor_country", f.donor_country},
                      {"donated_value", f.donated_value}});
  j["filled"] = filled;
  return j;
}

inline void write_design_csv(OutputTracker& tracker, const fs::path& path,
                             const panel::DesignMatrix& X) {
  csv::Writer w(path.string());
  std::vector<std::string> header{"country"};
  for (const auto& c : X.columns) header.push_back(c);
  w.row(header);
  for (Eigen::Index i = 0; i < X.values.rows(); ++i) {
    std::vector<std::string> row{X.countries[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < X.values.cols(); ++j)
      row.push_back(csv::format_number(X.values(i, j)));
    w.row(row);
  }
  tracker.add(path);
}

inline nlohmann::json growth_summary_json(const lgcm::GrowthPosterior& post,
                                          const std::string& label) {
  nlohmann::json j;
  j["model"] = label;
  j["group"] = panel::to_string(post.group);
  j["domain"] = panel::to_string(post.domain);
  j["n_chains"] = post.n_chains;
  j["retained_per_chain"] = post.retained_per_chain;
  j["convergence_warning"] = post.convergence_warning;
  j["warning_params"] = post.warning_params;
  j["jitter_repairs"] = post.jitter_repairs;
  nlohmann::json params;
  for (const auto& [name, s] : post.summaries) {
    params[name] = {{"mean", s.mean},   {"sd", s.sd},   {"q025", s.q025}, {"q500", s.q500},
                    {"q975", s.q975},   {"rhat", s.rhat}, {"ess", s.ess}};
  }
  j["params"] = params;
  const auto pct = lgcm::growth_percent_summary(post);
  j["percent_scale"] = {{"start_mean", pct.start_mean}, {"start_lo", pct.start_lo},
                        {"start_hi", pct.start_hi},     {"rate_mean", pct.rate_mean},
                        {"rate_lo", pct.rate_lo},       {"rate_hi", pct.rate_hi}};
  return j;
}

// Flat draws export: chain,iter,parameter,value.
inline void write_draws_csv(OutputTracker& tracker, const fs::path& path,
                            const lgcm::GrowthPosterior& post) {
  csv::Writer w(path.string());
  w.row({"chain", "iter", "parameter", "value"});
  const int retained = post.retained_per_chain;
  for (int c = 0; c < post.n_chains; ++c) {
    for (int r = 0; r < retained; ++r) {
      const Eigen::Index row = static_cast<Eigen::Index>(c) * retained + r;
      for (std::size_t k = 0; k < post.param_names.size(); ++k) {
        w.row({std::to_string(c), std::to_string(r), post.param_names[k],
               csv::format_number(post.draws(row, static_cast<Eigen::Index>(k)))});
      }
    }
  }
  tracker.add(path);
}

inline nlohmann::json bma_result_json(const bma::BmaResult& r) {
  nlohmann::json j;
  j["method"] = r.method == bma::Method::enumeration ? "enumeration" : "bd_mcmc";
  j["g_spec"] = {{"kind", bma::to_string(r.gspec.kind)},
                 {"hyper_alpha", r.gspec.hyper_alpha},
                 {"g_resolved", r.g_resolved}};
  j["model_prior"] = {{"kind", bma::to_string(r.mprior.kind)},
                      {"theta", r.mprior.theta},
                      {"a", r.mprior.a},
                      {"b", r.mprior.b}};
  j["n"] = r.n;
  j["q"] = r.q_total;
  j["intercept_mean"] = r.intercept_mean;
  j["total_visited_mass"] = r.total_visited_mass;
  j["n_visited"] = r.n_visited;
  j["low_mass_warning"] = r.low_mass_warning;
  nlohmann::json pips;
  nlohmann::json coef;
  for (int q = 0; q < r.q_total; ++q) {
    const std::string& name = r.columns.empty() ? "x" + std::to_string(q)
                                                : r.columns[static_cast<std::size_t>(q)];
    pips[name] = r.pip(q);
    coef[name] = {{"mean", r.coef_mean(q)}, {"sd", r.coef_sd(q)}};
  }
  j["pips"] = pips;
  j["coef"] = coef;
  nlohmann::json tops = nlohmann::json::array();
  const std::size_t n_top = std::min<std::size_t>(r.models.size(), 50);
  for (std::size_t k = 0; k < n_top; ++k) {
    const auto& m = r.models[k];
    char mask_hex[24];
    std::snprintf(mask_hex, sizeof(mask_hex), "%llx", static_cast<unsigned long long>(m.mask));
    tops.push_back({{"mask_hex", mask_hex},
                    {"size", m.size},
                    {"pmp", m.pmp},
                    {"empirical_freq", m.empirical_freq}});
  }
  j["top_models"] = tops;
  return j;
}

inline void write_pip_csv(OutputTracker& tracker, const fs::path& path, const bma::BmaResult& r,
                          panel::Group g, panel::Domain d) {
  // PIP table, descending (the layout used for the headline predictor tables)
  std::vector<int> order(static_cast<std::size_t>(r.q_total));
  for (int q = 0; q < r.q_total; ++q) order[static_cast<std::size_t>(q)] = q;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (r.pip(a) != r.pip(b)) return r.pip(a) > r.pip(b);
    return a < b;
  });
  csv::Writer w(path.string());
  w.row({"group", "domain", "indicator", "pip", "coef_mean", "coef_sd"});
  for (int q : order) {
    const std::string& name = r.columns.empty() ? "x" + std::to_string(q)
                                                : r.columns[static_cast<std::size_t>(q)];
    w.row({panel::to_string(g), panel::to_string(d), name, csv::format_number(r.pip(q)),
           csv::format_number(r.coef_mean(q)), csv::format_number(r.coef_sd(q))});
  }
  tracker.add(path);
}

inline void write_top_models_csv(OutputTracker& tracker, const fs::path& path,
                                 const bma::BmaResult& r) {
  csv::Writer w(path.string());
  w.row({"rank", "mask_hex", "size", "pmp", "empirical_freq"});
  const std::size_t n_top = std::min<std::size_t>(r.models.size(), 50);
  for (std::size_t k = 0; k < n_top; ++k) {
    const auto& m = r.models[k];
    char mask_hex[24];
    std::snprintf(mask_hex, sizeof(mask_hex), "%llx", static_cast<unsigned long long>(m.mask));
    w.row({std::to_string(k + 1), mask_hex, std::to_string(m.size), csv::format_number(m.pmp),
           csv::format_number(m.empirical_freq)});
  }
  tracker.add(path);
}

inline void write_projection_csv(OutputTracker& tracker, const fs::path& path,
                                 const std::vector<project::ProjectionResult>& results) {
  csv::Writer w(path.string());
  w.row({"country", "group", "domain", "year", "kind", "mean", "lo95", "hi95"});
  for (const auto& r : results) {
    for (std::size_t t = 0; t < r.history.size(); ++t) {
      w.row({r.country, panel::to_string(r.group), panel::to_string(r.domain),
             std::to_string(r.history_years[t]), "observed", csv::format_number(r.history[t]),
             csv::format_number(r.history[t]), csv::format_number(r.history[t])});
    }
    for (std::size_t t = 0; t < r.fitted.size(); ++t) {
      w.row({r.country, panel::to_string(r.group), panel::to_string(r.domain),
             std::to_string(r.history_years[t]), "fitted", csv::format_number(r.fitted[t]),
             csv::format_number(r.fitted_lo[t]), csv::format_number(r.fitted_hi[t])});
    }
    for (const auto& f : r.forecast) {
      w.row({r.country, panel::to_string(r.group), panel::to_string(r.domain),
             std::to_string(f.year), "forecast", csv::format_number(f.mean),
             csv::format_number(f.lo95), csv::format_number(f.hi95)});
    }
  }
  tracker.add(path);
}

inline void write_change_csv(OutputTracker& tracker, const fs::path& path,
                             const std::vector<project::ChangeRow>& rows, int base_year,
                             int target_year) {
  csv::Writer w(path.string());
  w.row({"country", "group", "domain", "base_year", "target_year", "base", "target", "change",
         "base_exact", "target_exact", "change_exact"});
  for (const auto& r : rows) {
    w.row({r.country, panel::to_string(r.group), panel::to_string(r.domain),
           std::to_string(base_year), std::to_string(target_year), std::to_string(r.base),
           std::to_string(r.target), std::to_string(r.change), csv::format_number(r.base_exact),
           csv::format_number(r.target_exact), csv::format_number(r.change_exact)});
  }
  tracker.add(path);
}

inline nlohmann::json loo_json(const score::LooResult& loo) {
  nlohmann::json j;
  j["elpd_loo"] = loo.elpd_loo;
  j["loo_ic"] = loo.loo_ic;
  j["n_bad_k"] = loo.n_bad_k;
  j["scale"] = loo.scale;
  j["pointwise"] = loo.pointwise;
  nlohmann::json ks = nlohmann::json::array();
  for (double k : loo.pareto_k) {
    if (std::isfinite(k)) ks.push_back(k);
    else ks.push_back(nullptr);
  }
  j["pareto_k"] = ks;
  return j;
}

struct GrowthFitSet {
  std::map<std::string, lgcm::GrowthPosterior> by_label;  // m0, m1, m2
  std::map<std::string, score::LooResult> loo_by_label;
};

// Fit the three loading specifications for one group x domain.
inline GrowthFitSet fit_models(const PipelineConfig& cfg, const PreparedData& data,
                               panel::Group g, panel::Domain d, bool all_models) {
  const auto series = series_for(data, g, d);
  if (series.empty()) throw data_error("no outcome series for " + detail::gd_tag(g, d));
  GrowthFitSet out;
  lgcm::GrowthPriors priors;
  std::vector<std::string> labels;
  if (all_models) labels = {"m0", "m1", "m2"};
  else labels = {cfg.model};
  for (const auto& label : labels) {
    lgcm::McmcConfig mc = cfg.mcmc;
    mc.seed = derive_seed(cfg.mcmc.seed,
                          static_cast<std::uint64_t>(detail::gd_index(g, d) * 3 +
                                                     detail::model_index(label)));
    auto post = lgcm::unconditional_growth(series, cfg.loading_spec(label), priors, mc);
    if (cfg.score_loo) {
      auto loo = score::psis_loo(post.loglik);
      loo.scale = "logit";
      out.loo_by_label[label] = std::move(loo);
    }
    out.by_label.emplace(label, std::move(post));
  }
  return out;
}

inline void write_model_comparison_csv(OutputTracker& tracker, const fs::path& path,
                                       const std::vector<nlohmann::json>& rows) {
  csv::Writer w(path.string());
  w.row({"group", "domain", "model", "start_mean", "start_lo", "start_hi", "rate_mean", "rate_lo",
         "rate_hi", "loo_ic", "elpd_loo", "n_bad_k"});
  for (const auto& r : rows) {
    w.row({r["group"].get<std::string>(), r["domain"].get<std::string>(),
           r["model"].get<std::string>(), csv::format_number(r["start_mean"].get<double>()),
           csv::format_number(r["start_lo"].get<double>()),
           csv::format_number(r["start_hi"].get<double>()),
           csv::format_number(r["rate_mean"].get<double>()),
           csv::format_number(r["rate_lo"].get<double>()),
           csv::format_number(r["rate_hi"].get<double>()),
           csv::format_number(r["loo_ic"].get<double>()),
           csv::format_number(r["elpd_loo"].get<double>()),
           std::to_string(r["n_bad_k"].get<int>())});
  }
  tracker.add(path);
}

struct RunOutcome {
  fs::path out_dir;
  int n_countries = 0;
  std::map<std::string, std::uint64_t> seeds;
};

// Full pipeline: impute -> fit growth (M0/M1/M2) -> score -> BMA -> project
// -> reports, with a manifest recording configuration and consumed seeds.
inline RunOutcome cmd_run(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path out_dir(cfg.out_dir);
  ensure_out_dir(out_dir);
  LockFile lock(out_dir);
  OutputTracker tracker;
  RunOutcome outcome;
  outcome.out_dir = out_dir;

  try {
    PreparedData data = prepare_data(cfg);
    outcome.n_countries = static_cast<int>(data.design.countries.size());
    outcome.seeds["impute"] = cfg.impute_seed;

    detail::write_json_file(tracker, out_dir / "validation_report.json",
                            validation_report_json(data));
    detail::write_json_file(tracker, out_dir / "imputation_report.json",
                            imputation_report_json(data.imputation));
    write_design_csv(tracker, out_dir / "design_matrix.csv", data.design_completed);
    write_design_csv(tracker, out_dir / "design_matrix_standardized.csv", data.design);

    const fs::path plot_dir = out_dir / "plots";
    ensure_out_dir(plot_dir);

    std::vector<nlohmann::json> comparison_rows;
    csv::Writer kld_writer((out_dir / "kld.csv").string());
    tracker.add(out_dir / "kld.csv");
    kld_writer.row({"group", "domain", "model", "kld_gaussian"});

    for (panel::Group g : cfg.groups) {
      for (panel::Domain d : cfg.domains) {
        const std::string tag = detail::gd_tag(g, d);
        GrowthFitSet fits = fit_models(cfg, data, g, d, true);

        for (const auto& [label, post] : fits.by_label) {
          detail::write_json_file(tracker, out_dir / ("growth_" + tag + "_" + label + ".json"),
                                  growth_summary_json(post, label));
          if (cfg.write_draws)
            write_draws_csv(tracker, out_dir / ("draws_" + tag + "_" + label + ".csv"), post);
          const auto pct = lgcm::growth_percent_summary(post);
          nlohmann::json row;
          row["group"] = panel::to_string(g);
          row["domain"] = panel::to_string(d);
          row["model"] = label;
          row["start_mean"] = pct.start_mean;
          row["start_lo"] = pct.start_lo;
          row["start_hi"] = pct.start_hi;
          row["rate_mean"] = pct.rate_mean;
          row["rate_lo"] = pct.rate_lo;
          row["rate_hi"] = pct.rate_hi;
          const auto lit = fits.loo_by_label.find(label);
          row["loo_ic"] = lit != fits.loo_by_label.end() ? lit->second.loo_ic : 0.0;
          row["elpd_loo"] = lit != fits.loo_by_label.end() ? lit->second.elpd_loo : 0.0;
          row["n_bad_k"] = lit != fits.loo_by_label.end() ? lit->second.n_bad_k : 0;
          comparison_rows.push_back(std::move(row));
          if (lit != fits.loo_by_label.end())
            detail::write_json_file(tracker, out_dir / ("loo_" + tag + "_" + label + ".json"),
                                    loo_json(lit->second));
        }

        // Selected model feeds model averaging and projection.
        const lgcm::GrowthPosterior& post = fits.by_label.at(cfg.model);
        outcome.seeds["lgcm_" + tag + "_" + cfg.model] =
            derive_seed(cfg.mcmc.seed, static_cast<std::uint64_t>(
                                           detail::gd_index(g, d) * 3 +
                                           detail::model_index(cfg.model)));

        const auto slopes = lgcm::posterior_slopes(post);
        Eigen::VectorXd y(static_cast<Eigen::Index>(slopes.size()));
        for (std::size_t i = 0; i < slopes.size(); ++i)
          y(static_cast<Eigen::Index>(i)) = slopes[i].mean;

        const std::uint64_t bma_seed =
            derive_seed(cfg.bma_seed, static_cast<std::uint64_t>(detail::gd_index(g, d)));
        outcome.seeds["bma_" + tag] = bma_seed;
        bma::BmaResult bres;
        const int q = static_cast<int>(data.design.values.cols());
        const bool enumerate = cfg.bma_method == "enumeration" ||
                               (cfg.bma_method == "auto" && q <= cfg.bma_options.enumeration_cap);
        if (enumerate) {
          bres = bma::enumerate_bma(y, data.design.values, cfg.g_prior, cfg.model_prior,
                                    cfg.bma_options);
        } else {
          bres = bma::bd_mcmc_bma(y, data.design.values, cfg.g_prior, cfg.model_prior,
                                  cfg.bma_iterations, cfg.bma_burn_in, bma_seed, cfg.bma_options);
        }
        bres.columns = data.design.columns;
        detail::write_json_file(tracker, out_dir / ("bma_" + tag + ".json"), bma_result_json(bres));
        write_pip_csv(tracker, out_dir / ("pip_" + tag + ".csv"), bres, g, d);
        write_top_models_csv(tracker, out_dir / ("top_models_" + tag + ".csv"), bres);

        // KLD: unconditional slope spread vs BMA-predicted slope spread.
        if (cfg.score_kld) {
          std::vector<double> uncond, predicted;
          for (std::size_t i = 0; i < slopes.size(); ++i) {
            uncond.push_back(slopes[i].mean);
            const auto [m, sd] = bma::averaged_prediction(
                bres, data.design.values.row(static_cast<Eigen::Index>(i)));
            predicted.push_back(m);
          }
          const double kld = score::kld_gaussian(mean(uncond), stddev(uncond), mean(predicted),
                                                 stddev(predicted));
          kld_writer.row({panel::to_string(g), panel::to_string(d), cfg.model,
                          csv::format_number(kld)});
        }

        // Projections: per country plus the cross-country pool.
        const auto series = series_for(data, g, d);
        std::vector<project::ProjectionResult> projections;
        for (std::size_t i = 0; i < series.size(); ++i) {
          const std::uint64_t pseed = derive_seed(
              cfg.project_seed,
              static_cast<std::uint64_t>(detail::gd_index(g, d)) * 100000ULL + i);
          projections.push_back(project::project_country(
              post, bres, data.design.values.row(static_cast<Eigen::Index>(i)), series[i],
              data.panel.cycles, cfg.future, pseed));
        }
        std::vector<project::ProjectionResult> with_overall = projections;
        with_overall.push_back(project::project_overall(projections));
        write_projection_csv(tracker, out_dir / ("projections_" + tag + ".csv"), with_overall);

        if (!cfg.future.empty()) {
          const auto changes = project::change_table(with_overall, cfg.cycles.front(),
                                                     cfg.future.back().year);
          write_change_csv(tracker, out_dir / ("changes_" + tag + ".csv"), changes,
                           cfg.cycles.front(), cfg.future.back().year);
        }

        const fs::path gd_plot_dir = plot_dir / tag;
        ensure_out_dir(gd_plot_dir);
        for (std::size_t i = 0; i < with_overall.size(); ++i) {
          const auto& r = with_overall[i];
          const std::string base = detail::sanitize_filename(r.country);
          const fs::path traj = gd_plot_dir / ("trajectory_" + base + ".svg");
          svg::write_trajectory_plot(traj.string(), r,
                                     r.country + " " + tag + " minimum proficiency");
          tracker.add(traj);
        }
        for (std::size_t i = 0; i < series.size(); ++i) {
          const auto curve =
              bma::predictive_density(bres, y, data.design.values, static_cast<int>(i));
          const fs::path dens =
              gd_plot_dir / ("density_" + detail::sanitize_filename(series[i].country) + ".svg");
          svg::write_density_plot(dens.string(), curve,
                                  series[i].country + " " + tag + " rate of progress");
          tracker.add(dens);
        }
      }
    }

    write_model_comparison_csv(tracker, out_dir / "model_comparison.csv", comparison_rows);

    nlohmann::json manifest;
    manifest["profcast_manifest"] = 1;
    manifest["version"] = kVersion;
    manifest["config"] = config_to_json(cfg);
    manifest["config_hash"] = config_hash(cfg);
    nlohmann::json seeds;
    for (const auto& [k, v] : outcome.seeds) seeds[k] = v;
    seeds["project_base"] = cfg.project_seed;
    seeds["lgcm_base"] = cfg.mcmc.seed;
    seeds["bma_base"] = cfg.bma_seed;
    manifest["seeds"] = seeds;
    detail::write_json_file(tracker, out_dir / "manifest.json", manifest);

    tracker.commit();
  } catch (...) {
    tracker.rollback();
    throw;
  }
  return outcome;
}

// Validation-only entry: ingest and report.
inline PreparedData cmd_ingest(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path out_dir(cfg.out_dir);
  ensure_out_dir(out_dir);
  OutputTracker tracker;
  PreparedData data;
  data.panel = panel::load_panel(cfg.outcome_csv, cfg.indicator_csv, cfg.panel_options());
  data.excluded = data.panel.excluded;
  // report validation without running imputation
  nlohmann::json j;
  std::vector<std::string> countries;
  std::set<std::string> seen;
  for (const auto& s : data.panel.series)
    if (seen.insert(s.country).second) countries.push_back(s.country);
  j["countries"] = countries;
  j["n_countries"] = countries.size();
  j["n_series"] = data.panel.series.size();
  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& e : data.excluded)
    excluded.push_back({{"country", e.country}, {"reason", e.reason}});
  j["excluded"] = excluded;
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& c : data.panel.cycles) cycles.push_back({{"year", c.year}, {"index", c.index}});
  j["cycles"] = cycles;
  detail::write_json_file(tracker, out_dir / "validation_report.json", j);
  tracker.commit();
  return data;
}

// Prior-sensitivity grid: fixed and hyper g-priors crossed with the three
// model-space priors, scored by KLD against the unconditional distribution.
inline void cmd_sensitivity(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path out_dir(cfg.out_dir);
  ensure_out_dir(out_dir);
  OutputTracker tracker;
  PreparedData data = prepare_data(cfg);

  const std::vector<bma::GPriorSpec> gspecs{
      bma::GPriorSpec::fixed(bma::GPriorKind::uip), bma::GPriorSpec::fixed(bma::GPriorKind::ric),
      bma::GPriorSpec::fixed(bma::GPriorKind::bric), bma::GPriorSpec::fixed(bma::GPriorKind::hq),
      bma::GPriorSpec::hyper(cfg.g_prior.hyper_alpha)};
  std::vector<bma::ModelPriorSpec> mspecs(3);
  mspecs[0].kind = bma::ModelPriorKind::uniform;
  mspecs[1].kind = bma::ModelPriorKind::binomial;
  mspecs[1].theta = cfg.model_prior.theta;
  mspecs[2].kind = bma::ModelPriorKind::beta_binomial;
  mspecs[2].a = cfg.model_prior.a;
  mspecs[2].b = cfg.model_prior.b;

  csv::Writer w((out_dir / "sensitivity.csv").string());
  tracker.add(out_dir / "sensitivity.csv");
  w.row({"group", "domain", "g_prior", "model_prior", "kld_gaussian", "total_visited_mass"});

  try {
    for (panel::Group g : cfg.groups) {
      for (panel::Domain d : cfg.domains) {
        GrowthFitSet fits = fit_models(cfg, data, g, d, false);
        const auto& post = fits.by_label.at(cfg.model);
        const auto slopes = lgcm::posterior_slopes(post);
        Eigen::VectorXd y(static_cast<Eigen::Index>(slopes.size()));
        std::vector<double> uncond;
        for (std::size_t i = 0; i < slopes.size(); ++i) {
          y(static_cast<Eigen::Index>(i)) = slopes[i].mean;
          uncond.push_back(slopes[i].mean);
        }

        int cell = 0;
        for (const auto& gs : gspecs) {
          for (const auto& ms : mspecs) {
            const int q = static_cast<int>(data.design.values.cols());
            bma::BmaResult bres;
            if (cfg.bma_method == "enumeration" ||
                (cfg.bma_method == "auto" && q <= cfg.bma_options.enumeration_cap)) {
              bres = bma::enumerate_bma(y, data.design.values, gs, ms, cfg.bma_options);
            } else {
              const std::uint64_t seed = derive_seed(
                  cfg.bma_seed, 1000ULL + static_cast<std::uint64_t>(
                                              detail::gd_index(g, d) * 100 + cell));
              bres = bma::bd_mcmc_bma(y, data.design.values, gs, ms, cfg.bma_iterations,
                                      cfg.bma_burn_in, seed, cfg.bma_options);
            }
            std::vector<double> predicted;
            for (std::size_t i = 0; i < slopes.size(); ++i) {
              const auto [m, sd] = bma::averaged_prediction(
                  bres, data.design.values.row(static_cast<Eigen::Index>(i)));
              predicted.push_back(m);
            }
            const double kld = score::kld_gaussian(mean(uncond), stddev(uncond), mean(predicted),
                                                   stddev(predicted));
            w.row({panel::to_string(g), panel::to_string(d), bma::to_string(gs.kind),
                   bma::to_string(ms.kind), csv::format_number(kld),
                   csv::format_number(bres.total_visited_mass)});
            ++cell;
          }
        }
      }
    }
    tracker.commit();
  } catch (...) {
    tracker.rollback();
    throw;
  }
}

}  // namespace profcast::pipeline
