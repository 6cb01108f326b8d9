#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "profcast/bma.hpp"
#include "profcast/errors.hpp"
#include "profcast/lgcm.hpp"
#include "profcast/panel.hpp"
#include "profcast/project.hpp"

namespace profcast {

struct PipelineConfig {
  // paths
  std::string outcome_csv;
  std::string indicator_csv;
  std::string indicator_meta;
  std::string out_dir = "out";

  std::vector<int> cycles{2009, 2012, 2015, 2018, 2022};
  std::vector<project::FutureCycle> future{{2029, 5.0}, {2033, 6.0}};
  std::vector<panel::Group> groups{panel::Group::boys, panel::Group::girls};
  std::vector<panel::Domain> domains{panel::Domain::reading, panel::Domain::mathematics};

  // panel
  double collinearity_threshold = 0.95;
  double n_eff_clamp = 10000.0;

  // impute
  int k_neighbors = 5;
  std::uint64_t impute_seed = 0;
  double max_missing_fraction = 0.5;

  // growth model
  std::string model = "m1";
  std::vector<int> m2_free_indices;  // empty -> last two cycles
  lgcm::McmcConfig mcmc;
  bool write_draws = false;

  // bma
  bma::GPriorSpec g_prior;
  bma::ModelPriorSpec model_prior;
  std::string bma_method = "auto";  // auto | enumeration | bd_mcmc
  std::uint64_t bma_iterations = 200000;
  std::uint64_t bma_burn_in = 20000;
  std::uint64_t bma_seed = 0;
  bma::BmaOptions bma_options;

  // projection
  std::uint64_t project_seed = 0;

  // score toggles
  bool score_kld = true;
  bool score_loo = true;

  bool seeds_set = false;

  panel::PanelOptions panel_options() const {
    panel::PanelOptions o;
    o.cycle_years = cycles;
    o.groups = groups;
    o.domains = domains;
    o.n_eff_clamp = n_eff_clamp;
    o.indicator_meta_path = indicator_meta;
    return o;
  }

  lgcm::LoadingSpec loading_spec(const std::string& label) const {
    const int t = static_cast<int>(cycles.size());
    if ((label == "m2" || label == "M2") && !m2_free_indices.empty())
      return lgcm::LoadingSpec::latent_basis(t, m2_free_indices, "M2");
    return lgcm::loading_spec_from_label(label, t);
  }

  void validate() const {
    if (outcome_csv.empty()) throw config_error("config: paths.outcome_csv is required");
    if (indicator_csv.empty()) throw config_error("config: paths.indicator_csv is required");
    if (indicator_meta.empty()) throw config_error("config: paths.indicator_meta is required");
    if (out_dir.empty()) throw config_error("config: paths.out_dir is required");
    if (cycles.size() < 2) throw config_error("config: need at least two cycles");
    if (groups.empty() || domains.empty())
      throw config_error("config: at least one group and one domain must be selected");
    if (!seeds_set)
      throw config_error("config: seeds are mandatory (impute.seed, lgcm.seed, bma.seed, "
                         "project.seed, or a master --seed)");
    for (const auto& f : future)
      if (f.year <= cycles.back())
        throw config_error("config: future year must follow the last cycle");
    if (model != "m0" && model != "m1" && model != "m2")
      throw config_error("config: lgcm.model must be one of m0, m1, m2");
    if (bma_method != "auto" && bma_method != "enumeration" && bma_method != "bd_mcmc")
      throw config_error("config: bma.method must be auto, enumeration or bd_mcmc");
    mcmc.validate();
  }
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config key \"" + key + "\": " + e.what());
  }
}

inline bma::GPriorKind g_prior_kind_from_string(const std::string& s) {
  if (s == "uip") return bma::GPriorKind::uip;
  if (s == "ric") return bma::GPriorKind::ric;
  if (s == "bric") return bma::GPriorKind::bric;
  if (s == "hq") return bma::GPriorKind::hq;
  if (s == "hyper_g" || s == "hyper-g") return bma::GPriorKind::hyper_g;
  throw config_error("unknown g-prior kind: " + s);
}

inline bma::ModelPriorKind model_prior_kind_from_string(const std::string& s) {
  if (s == "uniform") return bma::ModelPriorKind::uniform;
  if (s == "binomial") return bma::ModelPriorKind::binomial;
  if (s == "beta_binomial" || s == "beta-binomial") return bma::ModelPriorKind::beta_binomial;
  throw config_error("unknown model prior kind: " + s);
}

}  // namespace detail

// Parse a config JSON document. Accepts a manifest document as well (the
// resolved config is embedded under "config").
inline PipelineConfig config_from_json(const nlohmann::json& doc_in) {
  const nlohmann::json& doc =
      doc_in.contains("profcast_manifest") && doc_in.contains("config") ? doc_in["config"] : doc_in;

  PipelineConfig cfg;
  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    cfg.outcome_csv = detail::get_or<std::string>(p, "outcome_csv", "");
    cfg.indicator_csv = detail::get_or<std::string>(p, "indicator_csv", "");
    cfg.indicator_meta = detail::get_or<std::string>(p, "indicator_meta", "");
    cfg.out_dir = detail::get_or<std::string>(p, "out_dir", cfg.out_dir);
  }
  cfg.cycles = detail::get_or<std::vector<int>>(doc, "cycles", cfg.cycles);
  if (doc.contains("future")) {
    cfg.future.clear();
    for (const auto& f : doc["future"])
      cfg.future.push_back({f.at("year").get<int>(), f.at("loading").get<double>()});
  }
  if (doc.contains("groups")) {
    cfg.groups.clear();
    for (const auto& g : doc["groups"]) cfg.groups.push_back(panel::group_from_string(g));
  }
  if (doc.contains("domains")) {
    cfg.domains.clear();
    for (const auto& d : doc["domains"]) cfg.domains.push_back(panel::domain_from_string(d));
  }
  if (doc.contains("panel")) {
    const auto& p = doc["panel"];
    cfg.collinearity_threshold =
        detail::get_or<double>(p, "collinearity_threshold", cfg.collinearity_threshold);
    cfg.n_eff_clamp = detail::get_or<double>(p, "n_eff_clamp", cfg.n_eff_clamp);
  }

  bool have_impute_seed = false, have_lgcm_seed = false, have_bma_seed = false,
       have_project_seed = false;
  if (doc.contains("impute")) {
    const auto& p = doc["impute"];
    cfg.k_neighbors = detail::get_or<int>(p, "k_neighbors", cfg.k_neighbors);
    cfg.max_missing_fraction =
        detail::get_or<double>(p, "max_missing_fraction", cfg.max_missing_fraction);
    if (p.contains("seed")) {
      cfg.impute_seed = p["seed"].get<std::uint64_t>();
      have_impute_seed = true;
    }
  }
  if (doc.contains("lgcm")) {
    const auto& p = doc["lgcm"];
    cfg.model = detail::get_or<std::string>(p, "model", cfg.model);
    cfg.m2_free_indices = detail::get_or<std::vector<int>>(p, "m2_free_indices", cfg.m2_free_indices);
    cfg.mcmc.n_chains = detail::get_or<int>(p, "chains", cfg.mcmc.n_chains);
    cfg.mcmc.n_iter = detail::get_or<int>(p, "iterations", cfg.mcmc.n_iter);
    cfg.mcmc.burn_in = detail::get_or<int>(p, "burn_in", cfg.mcmc.burn_in);
    cfg.mcmc.thin = detail::get_or<int>(p, "thin", cfg.mcmc.thin);
    cfg.write_draws = detail::get_or<bool>(p, "write_draws", cfg.write_draws);
    if (p.contains("seed")) {
      cfg.mcmc.seed = p["seed"].get<std::uint64_t>();
      have_lgcm_seed = true;
    }
  }
  if (doc.contains("bma")) {
    const auto& p = doc["bma"];
    cfg.g_prior.kind = detail::g_prior_kind_from_string(
        detail::get_or<std::string>(p, "g_prior", "uip"));
    cfg.g_prior.hyper_alpha = detail::get_or<double>(p, "hyper_g_alpha", cfg.g_prior.hyper_alpha);
    cfg.model_prior.kind = detail::model_prior_kind_from_string(
        detail::get_or<std::string>(p, "model_prior", "uniform"));
    cfg.model_prior.theta = detail::get_or<double>(p, "theta", cfg.model_prior.theta);
    cfg.model_prior.a = detail::get_or<double>(p, "a", cfg.model_prior.a);
    cfg.model_prior.b = detail::get_or<double>(p, "b", cfg.model_prior.b);
    cfg.bma_method = detail::get_or<std::string>(p, "method", cfg.bma_method);
    cfg.bma_iterations = detail::get_or<std::uint64_t>(p, "iterations", cfg.bma_iterations);
    cfg.bma_burn_in = detail::get_or<std::uint64_t>(p, "burn_in", cfg.bma_burn_in);
    cfg.bma_options.enumeration_cap =
        detail::get_or<int>(p, "enumeration_cap", cfg.bma_options.enumeration_cap);
    cfg.bma_options.max_stored_models = detail::get_or<std::size_t>(
        p, "max_stored_models", cfg.bma_options.max_stored_models);
    if (p.contains("seed")) {
      cfg.bma_seed = p["seed"].get<std::uint64_t>();
      have_bma_seed = true;
    }
  }
  if (doc.contains("project")) {
    const auto& p = doc["project"];
    if (p.contains("seed")) {
      cfg.project_seed = p["seed"].get<std::uint64_t>();
      have_project_seed = true;
    }
  }
  if (doc.contains("score")) {
    const auto& p = doc["score"];
    cfg.score_kld = detail::get_or<bool>(p, "kld", cfg.score_kld);
    cfg.score_loo = detail::get_or<bool>(p, "loo", cfg.score_loo);
  }
  cfg.seeds_set = have_impute_seed && have_lgcm_seed && have_bma_seed && have_project_seed;
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

// Derive every stage seed from one master seed.
inline void apply_master_seed(PipelineConfig& cfg, std::uint64_t master) {
  cfg.impute_seed = derive_seed(master, 1);
  cfg.mcmc.seed = derive_seed(master, 2);
  cfg.bma_seed = derive_seed(master, 3);
  cfg.project_seed = derive_seed(master, 4);
  cfg.seeds_set = true;
}

// Canonical resolved-config document; also embedded in the run manifest.
inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["paths"] = {{"outcome_csv", cfg.outcome_csv},
                {"indicator_csv", cfg.indicator_csv},
                {"indicator_meta", cfg.indicator_meta},
                {"out_dir", cfg.out_dir}};
  j["cycles"] = cfg.cycles;
  j["future"] = nlohmann::json::array();
  for (const auto& f : cfg.future) j["future"].push_back({{"year", f.year}, {"loading", f.loading}});
  j["groups"] = nlohmann::json::array();
  for (auto g : cfg.groups) j["groups"].push_back(panel::to_string(g));
  j["domains"] = nlohmann::json::array();
  for (auto d : cfg.domains) j["domains"].push_back(panel::to_string(d));
  j["panel"] = {{"collinearity_threshold", cfg.collinearity_threshold},
                {"n_eff_clamp", cfg.n_eff_clamp}};
  j["impute"] = {{"k_neighbors", cfg.k_neighbors},
                 {"seed", cfg.impute_seed},
                 {"max_missing_fraction", cfg.max_missing_fraction}};
  j["lgcm"] = {{"model", cfg.model},
               {"chains", cfg.mcmc.n_chains},
               {"iterations", cfg.mcmc.n_iter},
               {"burn_in", cfg.mcmc.burn_in},
               {"thin", cfg.mcmc.thin},
               {"seed", cfg.mcmc.seed},
               {"write_draws", cfg.write_draws}};
  if (!cfg.m2_free_indices.empty()) j["lgcm"]["m2_free_indices"] = cfg.m2_free_indices;
  j["bma"] = {{"g_prior", bma::to_string(cfg.g_prior.kind)},
              {"hyper_g_alpha", cfg.g_prior.hyper_alpha},
              {"model_prior", bma::to_string(cfg.model_prior.kind)},
              {"theta", cfg.model_prior.theta},
              {"a", cfg.model_prior.a},
              {"b", cfg.model_prior.b},
              {"method", cfg.bma_method},
              {"iterations", cfg.bma_iterations},
              {"burn_in", cfg.bma_burn_in},
              {"seed", cfg.bma_seed},
              {"enumeration_cap", cfg.bma_options.enumeration_cap},
              {"max_stored_models", cfg.bma_options.max_stored_models}};
  j["project"] = {{"seed", cfg.project_seed}};
  j["score"] = {{"kld", cfg.score_kld}, {"loo", cfg.score_loo}};
  return j;
}

inline std::string config_hash(const PipelineConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace profcast
