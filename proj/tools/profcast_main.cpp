// profcast: probabilistic projections of minimum-proficiency trends.
//
// Subcommands: ingest, impute, fit-growth, score, bma, project, run,
// sensitivity. Exit codes: 0 success, 2 config error, 3 data error,
// 4 numerical failure.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "profcast/profcast.hpp"

namespace {

namespace fs = std::filesystem;
using profcast::PipelineConfig;

struct CliOverrides {
  std::string config_path;
  std::int64_t seed = -1;
  std::string out_dir;
  std::string group;
  std::string domain;
  std::string model;
};

PipelineConfig resolve_config(const CliOverrides& o) {
  PipelineConfig cfg = profcast::load_config(o.config_path);
  if (o.seed >= 0) profcast::apply_master_seed(cfg, static_cast<std::uint64_t>(o.seed));
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.group.empty()) cfg.groups = {profcast::panel::group_from_string(o.group)};
  if (!o.domain.empty()) cfg.domains = {profcast::panel::domain_from_string(o.domain)};
  if (!o.model.empty()) cfg.model = o.model;
  return cfg;
}

void add_common(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "pipeline config JSON (or a run manifest)")
      ->required();
  cmd->add_option("--seed", o.seed, "master seed; derives all stage seeds");
  cmd->add_option("--out", o.out_dir, "output directory override");
  cmd->add_option("--group", o.group, "restrict to one group (boys|girls)");
  cmd->add_option("--domain", o.domain, "restrict to one domain (reading|mathematics)");
  cmd->add_option("--model", o.model, "growth model for downstream stages (m0|m1|m2)");
}

int run_ingest(const PipelineConfig& cfg) {
  auto data = profcast::pipeline::cmd_ingest(cfg);
  std::set<std::string> countries;
  for (const auto& s : data.panel.series) countries.insert(s.country);
  std::cout << "validated " << countries.size() << " countries, " << data.panel.series.size()
            << " outcome series; " << data.excluded.size() << " exclusions\n";
  std::cout << "report: " << (fs::path(cfg.out_dir) / "validation_report.json").string() << "\n";
  return 0;
}

int run_impute(const PipelineConfig& cfg) {
  cfg.validate();
  profcast::pipeline::ensure_out_dir(cfg.out_dir);
  profcast::pipeline::OutputTracker tracker;
  auto data = profcast::pipeline::prepare_data(cfg);
  profcast::pipeline::detail::write_json_file(
      tracker, fs::path(cfg.out_dir) / "imputation_report.json",
      profcast::pipeline::imputation_report_json(data.imputation));
  profcast::pipeline::write_design_csv(tracker, fs::path(cfg.out_dir) / "design_matrix.csv",
                                       data.design_completed);
  profcast::pipeline::write_design_csv(
      tracker, fs::path(cfg.out_dir) / "design_matrix_standardized.csv", data.design);
  tracker.commit();
  std::cout << "imputed " << data.imputation.n_missing_before << " -> "
            << data.imputation.n_missing_after << " missing cells over "
            << data.imputation.sweeps << " sweeps\n";
  return 0;
}

int run_fit_growth(const PipelineConfig& cfg) {
  cfg.validate();
  profcast::pipeline::ensure_out_dir(cfg.out_dir);
  profcast::pipeline::OutputTracker tracker;
  auto data = profcast::pipeline::prepare_data(cfg);
  for (auto g : cfg.groups) {
    for (auto d : cfg.domains) {
      auto fits = profcast::pipeline::fit_models(cfg, data, g, d, false);
      const auto& post = fits.by_label.at(cfg.model);
      const std::string tag = profcast::pipeline::detail::gd_tag(g, d);
      profcast::pipeline::detail::write_json_file(
          tracker, fs::path(cfg.out_dir) / ("growth_" + tag + "_" + cfg.model + ".json"),
          profcast::pipeline::growth_summary_json(post, cfg.model));
      profcast::pipeline::write_draws_csv(
          tracker, fs::path(cfg.out_dir) / ("draws_" + tag + "_" + cfg.model + ".csv"), post);
      std::cout << tag << ": " << post.total_draws() << " draws, convergence warning: "
                << (post.convergence_warning ? "yes" : "no") << "\n";
    }
  }
  tracker.commit();
  return 0;
}

int run_score(const PipelineConfig& cfg) {
  cfg.validate();
  profcast::pipeline::ensure_out_dir(cfg.out_dir);
  profcast::pipeline::OutputTracker tracker;
  auto data = profcast::pipeline::prepare_data(cfg);
  std::vector<nlohmann::json> rows;
  for (auto g : cfg.groups) {
    for (auto d : cfg.domains) {
      auto fits = profcast::pipeline::fit_models(cfg, data, g, d, true);
      const std::string tag = profcast::pipeline::detail::gd_tag(g, d);
      for (const auto& [label, post] : fits.by_label) {
        const auto pct = profcast::lgcm::growth_percent_summary(post);
        nlohmann::json row;
        row["group"] = profcast::panel::to_string(g);
        row["domain"] = profcast::panel::to_string(d);
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
        rows.push_back(std::move(row));
        if (lit != fits.loo_by_label.end())
          profcast::pipeline::detail::write_json_file(
              tracker, fs::path(cfg.out_dir) / ("loo_" + tag + "_" + label + ".json"),
              profcast::pipeline::loo_json(lit->second));
      }
    }
  }
  profcast::pipeline::write_model_comparison_csv(
      tracker, fs::path(cfg.out_dir) / "model_comparison.csv", rows);
  tracker.commit();
  std::cout << "model comparison written for " << rows.size() << " rows\n";
  return 0;
}

int run_bma(const PipelineConfig& cfg) {
  cfg.validate();
  profcast::pipeline::ensure_out_dir(cfg.out_dir);
  profcast::pipeline::OutputTracker tracker;
  auto data = profcast::pipeline::prepare_data(cfg);
  for (auto g : cfg.groups) {
    for (auto d : cfg.domains) {
      auto fits = profcast::pipeline::fit_models(cfg, data, g, d, false);
      const auto& post = fits.by_label.at(cfg.model);
      const auto slopes = profcast::lgcm::posterior_slopes(post);
      Eigen::VectorXd y(static_cast<Eigen::Index>(slopes.size()));
      for (std::size_t i = 0; i < slopes.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = slopes[i].mean;
      const std::string tag = profcast::pipeline::detail::gd_tag(g, d);
      const int q = static_cast<int>(data.design.values.cols());
      profcast::bma::BmaResult bres;
      if (cfg.bma_method == "enumeration" ||
          (cfg.bma_method == "auto" && q <= cfg.bma_options.enumeration_cap)) {
        bres = profcast::bma::enumerate_bma(y, data.design.values, cfg.g_prior, cfg.model_prior,
                                            cfg.bma_options);
      } else {
        bres = profcast::bma::bd_mcmc_bma(
            y, data.design.values, cfg.g_prior, cfg.model_prior, cfg.bma_iterations,
            cfg.bma_burn_in,
            profcast::derive_seed(cfg.bma_seed, static_cast<std::uint64_t>(
                                                    profcast::pipeline::detail::gd_index(g, d))),
            cfg.bma_options);
      }
      bres.columns = data.design.columns;
      profcast::pipeline::detail::write_json_file(tracker,
                                                  fs::path(cfg.out_dir) / ("bma_" + tag + ".json"),
                                                  profcast::pipeline::bma_result_json(bres));
      profcast::pipeline::write_pip_csv(tracker, fs::path(cfg.out_dir) / ("pip_" + tag + ".csv"),
                                        bres, g, d);
      profcast::pipeline::write_top_models_csv(
          tracker, fs::path(cfg.out_dir) / ("top_models_" + tag + ".csv"), bres);
      std::cout << tag << ": visited " << bres.n_visited
                << " models, total mass " << bres.total_visited_mass << "\n";
    }
  }
  tracker.commit();
  return 0;
}

int run_project(const PipelineConfig& cfg) {
  // projections need the full upstream chain; reuse the orchestrated run
  auto outcome = profcast::pipeline::cmd_run(cfg);
  std::cout << "projections written under " << outcome.out_dir.string() << " for "
            << outcome.n_countries << " countries\n";
  return 0;
}

int run_full(const PipelineConfig& cfg) {
  auto outcome = profcast::pipeline::cmd_run(cfg);
  std::cout << "pipeline complete: " << outcome.n_countries << " countries, outputs in "
            << outcome.out_dir.string() << "\n";
  return 0;
}

int run_sensitivity(const PipelineConfig& cfg) {
  profcast::pipeline::cmd_sensitivity(cfg);
  std::cout << "sensitivity grid written to "
            << (fs::path(cfg.out_dir) / "sensitivity.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian projections of minimum-proficiency trends"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(profcast::kVersion));

  CliOverrides o;
  auto* ingest = app.add_subcommand("ingest", "validate and ingest the panel CSVs");
  auto* impute = app.add_subcommand("impute", "build and impute the predictor matrix");
  auto* fitg = app.add_subcommand("fit-growth", "fit the growth model, export draws");
  auto* sc = app.add_subcommand("score", "fit M0/M1/M2 and compare by LOO-IC");
  auto* bm = app.add_subcommand("bma", "model-average growth-rate predictors");
  auto* proj = app.add_subcommand("project", "run the pipeline through projections");
  auto* run = app.add_subcommand("run", "run the full pipeline");
  auto* sens = app.add_subcommand("sensitivity", "g-prior x model-prior sensitivity grid");
  for (auto* cmd : {ingest, impute, fitg, sc, bm, proj, run, sens}) add_common(cmd, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig cfg = resolve_config(o);
    if (ingest->parsed()) return run_ingest(cfg);
    if (impute->parsed()) return run_impute(cfg);
    if (fitg->parsed()) return run_fit_growth(cfg);
    if (sc->parsed()) return run_score(cfg);
    if (bm->parsed()) return run_bma(cfg);
    if (proj->parsed()) return run_project(cfg);
    if (run->parsed()) return run_full(cfg);
    if (sens->parsed()) return run_sensitivity(cfg);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const profcast::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const profcast::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const profcast::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
