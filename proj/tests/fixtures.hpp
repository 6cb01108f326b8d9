#pragma once

// Synthetic end-to-end fixture: a small country panel with logit-linear
// trajectories, an indicator table with missing cells (neighbor-year
// substitution + imputation paths), a collinear duplicate column, and a
// matching pipeline config.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "profcast/rng.hpp"
#include "profcast/stats.hpp"

namespace fixtures {

namespace fs = std::filesystem;

struct FixtureSpec {
  int n_countries = 12;
  std::uint64_t seed = 424242;
  int mcmc_iterations = 500;
  int mcmc_burn_in = 250;
  int mcmc_chains = 2;
};

inline void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Writes outcomes.csv, indicators.csv, indicators.meta.json and config.json
// under dir; returns the config path.
inline fs::path make_synthetic_dataset(const fs::path& dir, const FixtureSpec& spec = {}) {
  profcast::Rng rng(spec.seed);
  const std::vector<int> years{2009, 2012, 2015, 2018, 2022};

  std::vector<std::string> countries;
  for (int i = 0; i < spec.n_countries; ++i) countries.push_back("Country" + std::to_string(i));

  // country-level driver controls the slope
  std::vector<double> driver(static_cast<std::size_t>(spec.n_countries));
  for (auto& d : driver) d = rng.normal();

  std::ostringstream out;
  out << "country,year,group,domain,pct_min_prof\n";
  for (int i = 0; i < spec.n_countries; ++i) {
    for (const char* g : {"boys", "girls"}) {
      for (const char* d : {"reading", "mathematics"}) {
        const double b0 = rng.normal(0.8, 0.2);
        const double b1 = -0.04 + 0.03 * driver[static_cast<std::size_t>(i)] + rng.normal(0.0, 0.01);
        for (std::size_t t = 0; t < years.size(); ++t) {
          const double v = b0 + b1 * static_cast<double>(t) + rng.normal(0.0, 0.02);
          out << countries[static_cast<std::size_t>(i)] << ',' << years[t] << ',' << g << ',' << d
              << ',' << fmt(100.0 * profcast::inv_logit(v)) << '\n';
        }
      }
    }
  }
  write(dir / "outcomes.csv", out.str());

  std::ostringstream ind;
  ind << "country,indicator,year,value\n";
  for (int i = 0; i < spec.n_countries; ++i) {
    const auto& c = countries[static_cast<std::size_t>(i)];
    // driver: the 2022-2009 difference equals the slope driver
    ind << c << ",driver,2009," << fmt(1.0 + 0.1 * i) << '\n';
    if (i % 4 == 1) {
      // missing 2022, observed 2021 -> neighbor-year substitution
      ind << c << ",driver,2021," << fmt(1.0 + 0.1 * i + driver[static_cast<std::size_t>(i)]) << '\n';
      ind << c << ",driver,2022,\n";
    } else {
      ind << c << ",driver,2022," << fmt(1.0 + 0.1 * i + driver[static_cast<std::size_t>(i)]) << '\n';
    }
    // background indicators; one cell left missing for the imputer
    const double bg1 = rng.normal();
    ind << c << ",enrollment,2009," << fmt(90.0 + rng.normal()) << '\n';
    if (i != 5) ind << c << ",enrollment,2022," << fmt(90.0 + bg1) << '\n';
    const double f09 = 4.0 + 0.5 * rng.normal();
    const double f22 = 4.0 + 0.5 * rng.normal();
    ind << c << ",funding,2009," << fmt(f09) << '\n';
    ind << c << ",funding,2022," << fmt(f22) << '\n';
    // exact duplicate of funding (collinearity drop target)
    ind << c << ",funding_copy,2009," << fmt(f09) << '\n';
    ind << c << ",funding_copy,2022," << fmt(f22) << '\n';
  }
  write(dir / "indicators.csv", ind.str());

  write(dir / "indicators.meta.json", R"({
  "indicators": [
    {"name": "driver", "end_year": 2022, "substitute_year": 2021, "start_year": 2009, "category": "Context"},
    {"name": "enrollment", "end_year": 2022, "start_year": 2009, "category": "Input"},
    {"name": "funding", "end_year": 2022, "start_year": 2009, "category": "Context"},
    {"name": "funding_copy", "end_year": 2022, "start_year": 2009, "category": "Context"}
  ]
})");

  std::ostringstream cfg;
  cfg << R"({
  "paths": {
    "outcome_csv": ")" << (dir / "outcomes.csv").string() << R"(",
    "indicator_csv": ")" << (dir / "indicators.csv").string() << R"(",
    "indicator_meta": ")" << (dir / "indicators.meta.json").string() << R"(",
    "out_dir": ")" << (dir / "out").string() << R"("
  },
  "cycles": [2009, 2012, 2015, 2018, 2022],
  "future": [{"year": 2029, "loading": 5}, {"year": 2033, "loading": 6}],
  "groups": ["boys", "girls"],
  "domains": ["reading", "mathematics"],
  "impute": {"k_neighbors": 3, "seed": 1001, "max_missing_fraction": 0.5},
  "lgcm": {"model": "m1", "chains": )" << spec.mcmc_chains << R"(, "iterations": )"
      << spec.mcmc_iterations << R"(, "burn_in": )" << spec.mcmc_burn_in << R"(, "seed": 2002},
  "bma": {"g_prior": "uip", "model_prior": "uniform", "method": "auto", "seed": 3003},
  "project": {"seed": 4004}
})";
  write(dir / "config.json", cfg.str());
  return dir / "config.json";
}

// Full-scale variant: 53 countries and 31 indicators, two of which duplicate
// earlier columns (entrance-age twins), so 29 predictors survive the
// collinearity filter and model averaging runs through birth-death MCMC.
inline fs::path make_paper_scale_dataset(const fs::path& dir,
                                         const std::vector<std::string>& countries,
                                         int mcmc_iterations = 800, int bd_iterations = 30000,
                                         double intercept_mean = 0.8,
                                         double slope_mean = -0.05) {
  profcast::Rng rng(777001);
  const std::vector<int> years{2009, 2012, 2015, 2018, 2022};
  const int n = static_cast<int>(countries.size());

  std::vector<double> driver(static_cast<std::size_t>(n));
  for (auto& d : driver) d = rng.normal();

  std::ostringstream out;
  out << "country,year,group,domain,pct_min_prof\n";
  for (int i = 0; i < n; ++i) {
    for (const char* g : {"boys", "girls"}) {
      for (const char* d : {"reading", "mathematics"}) {
        const double b0 = rng.normal(intercept_mean, 0.25);
        const double b1 =
            slope_mean + 0.02 * driver[static_cast<std::size_t>(i)] + rng.normal(0.0, 0.015);
        for (std::size_t t = 0; t < years.size(); ++t) {
          const double v = b0 + b1 * static_cast<double>(t) + rng.normal(0.0, 0.04);
          out << countries[static_cast<std::size_t>(i)] << ',' << years[t] << ',' << g << ',' << d
              << ',' << fmt(100.0 * profcast::inv_logit(v)) << '\n';
        }
      }
    }
  }
  write(dir / "outcomes.csv", out.str());

  std::vector<std::string> names;
  for (int k = 0; k < 29; ++k) names.push_back("indicator_" + std::to_string(k));
  names.push_back("entrance_age_twin_a");  // duplicates indicator_5
  names.push_back("entrance_age_twin_b");  // duplicates indicator_11

  std::ostringstream ind;
  ind << "country,indicator,year,value\n";
  std::ostringstream meta;
  meta << R"({"indicators": [)";
  std::vector<std::vector<double>> base09(31, std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<std::vector<double>> base22(31, std::vector<double>(static_cast<std::size_t>(n)));
  for (int k = 0; k < 29; ++k) {
    for (int i = 0; i < n; ++i) {
      base09[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = rng.normal();
      double diff = rng.normal();
      if (k == 0) diff = driver[static_cast<std::size_t>(i)] + 0.2 * rng.normal();
      base22[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          base09[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] + diff;
    }
  }
  base09[29] = base09[5];
  base22[29] = base22[5];
  base09[30] = base09[11];
  base22[30] = base22[11];

  for (int k = 0; k < 31; ++k) {
    for (int i = 0; i < n; ++i) {
      const auto& c = countries[static_cast<std::size_t>(i)];
      ind << c << ',' << names[static_cast<std::size_t>(k)] << ",2009,"
          << fmt(base09[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]) << '\n';
      // a sprinkle of missing end-year cells for the imputer
      if (k >= 2 && (i + k) % 17 == 0) {
        ind << c << ',' << names[static_cast<std::size_t>(k)] << ",2022,\n";
      } else {
        ind << c << ',' << names[static_cast<std::size_t>(k)] << ",2022,"
            << fmt(base22[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]) << '\n';
      }
    }
    if (k) meta << ",\n";
    meta << R"({"name": ")" << names[static_cast<std::size_t>(k)]
         << R"(", "end_year": 2022, "start_year": 2009})";
  }
  meta << "]}";
  write(dir / "indicators.csv", ind.str());
  write(dir / "indicators.meta.json", meta.str());

  std::ostringstream cfg;
  cfg << R"({
  "paths": {
    "outcome_csv": ")" << (dir / "outcomes.csv").string() << R"(",
    "indicator_csv": ")" << (dir / "indicators.csv").string() << R"(",
    "indicator_meta": ")" << (dir / "indicators.meta.json").string() << R"(",
    "out_dir": ")" << (dir / "out").string() << R"("
  },
  "cycles": [2009, 2012, 2015, 2018, 2022],
  "future": [{"year": 2029, "loading": 5}, {"year": 2033, "loading": 6}],
  "impute": {"k_neighbors": 5, "seed": 1001},
  "lgcm": {"model": "m1", "chains": 2, "iterations": )" << mcmc_iterations
      << R"(, "burn_in": )" << mcmc_iterations / 2 << R"(, "seed": 2002},
  "bma": {"g_prior": "uip", "model_prior": "uniform", "method": "auto",
          "iterations": )" << bd_iterations << R"(, "burn_in": )" << bd_iterations / 10
      << R"(, "seed": 3003},
  "project": {"seed": 4004}
})";
  write(dir / "config.json", cfg.str());
  return dir / "config.json";
}

}  // namespace fixtures
