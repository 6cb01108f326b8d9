#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "profcast/csv.hpp"
#include "profcast/pipeline.hpp"
#include "testutil.hpp"

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PROFCAST_CLI_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("cli: ingest validates the fixture and writes a report") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path());
  CHECK(run_cli("ingest --config " + cfg.string()) == 0);
  const auto report = read_json(tmp.path() / "out" / "validation_report.json");
  CHECK(report["n_countries"].get<int>() == 12);
  CHECK(report["n_series"].get<int>() == 48);
}

TEST_CASE("cli: malformed CSV exits with the data error code") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path());
  fixtures::write(tmp.path() / "outcomes.csv", "country,year\nAlbania,2009\n");
  CHECK(run_cli("ingest --config " + cfg.string()) == 3);
}

TEST_CASE("cli: missing config file exits with the config error code") {
  CHECK(run_cli("run --config /nonexistent/config.json") == 2);
}

TEST_CASE("cli: full run produces the report artifacts") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path());
  REQUIRE(run_cli("run --config " + cfg.string()) == 0);
  const fs::path out = tmp.path() / "out";

  for (const char* name :
       {"manifest.json", "validation_report.json", "imputation_report.json",
        "design_matrix.csv", "design_matrix_standardized.csv", "model_comparison.csv",
        "kld.csv", "bma_boys_reading.json", "pip_girls_mathematics.csv",
        "projections_boys_reading.csv", "changes_girls_reading.csv",
        "top_models_boys_mathematics.csv"}) {
    INFO(name);
    CHECK(fs::exists(out / name));
  }
  CHECK(fs::exists(out / "plots" / "boys_reading" / "trajectory_Country0.svg"));
  CHECK(fs::exists(out / "plots" / "boys_reading" / "trajectory_ALL.svg"));
  CHECK(fs::exists(out / "plots" / "girls_mathematics" / "density_Country3.svg"));

  const auto imput = read_json(out / "imputation_report.json");
  CHECK(imput["n_missing_after"].get<int>() == 0);
  CHECK(imput["n_missing_before"].get<int>() > 0);

  // the duplicate indicator column was dropped for collinearity
  const auto validation = read_json(out / "validation_report.json");
  bool dropped_copy = false;
  for (const auto& d : validation["dropped_columns"])
    if (d["column"].get<std::string>() == "funding_copy") dropped_copy = true;
  CHECK(dropped_copy);

  const auto manifest = read_json(out / "manifest.json");
  CHECK(manifest["profcast_manifest"].get<int>() == 1);
  CHECK(manifest["config_hash"].is_string());
  CHECK(manifest["seeds"].contains("impute"));

  // growth summaries exist for all three specifications
  for (const char* m : {"m0", "m1", "m2"})
    CHECK(fs::exists(out / (std::string("growth_boys_reading_") + m + ".json")));

  // model comparison covers 4 combinations x 3 models
  const auto table = profcast::csv::read_file((out / "model_comparison.csv").string());
  CHECK(table.rows.size() == 12);
}

TEST_CASE("cli: single group/domain restriction via flags") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path());
  REQUIRE(run_cli("run --config " + cfg.string() + " --group boys --domain reading --out " +
                  (tmp.path() / "out2").string()) == 0);
  const fs::path out = tmp.path() / "out2";
  CHECK(fs::exists(out / "bma_boys_reading.json"));
  CHECK_FALSE(fs::exists(out / "bma_girls_reading.json"));
}

TEST_CASE("cli: manifest replay reproduces a run") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path());
  REQUIRE(run_cli("run --config " + cfg.string()) == 0);
  const fs::path manifest = tmp.path() / "out" / "manifest.json";
  const std::string proj_before =
      testutil::read_file(tmp.path() / "out" / "projections_boys_reading.csv");
  REQUIRE(run_cli("run --config " + manifest.string() + " --out " +
                  (tmp.path() / "replay").string()) == 0);
  const std::string proj_after =
      testutil::read_file(tmp.path() / "replay" / "projections_boys_reading.csv");
  CHECK(proj_before == proj_after);
}

TEST_CASE("cli: sensitivity grid has 15 cells per group x domain") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path());
  REQUIRE(run_cli("sensitivity --config " + cfg.string() + " --group boys --domain reading") == 0);
  const auto table = profcast::csv::read_file((tmp.path() / "out" / "sensitivity.csv").string());
  CHECK(table.rows.size() == 15);
  // uniform and binomial(0.5) cells agree exactly under enumeration
  const int c_gp = table.column("g_prior");
  const int c_mp = table.column("model_prior");
  const int c_kld = table.column("kld_gaussian");
  std::map<std::string, std::map<std::string, double>> grid;
  for (const auto& row : table.rows)
    grid[row[static_cast<std::size_t>(c_gp)]][row[static_cast<std::size_t>(c_mp)]] =
        std::stod(row[static_cast<std::size_t>(c_kld)]);
  for (const char* gp : {"uip", "ric", "bric", "hq", "hyper_g"}) {
    INFO(gp);
    CHECK(std::abs(grid[gp]["uniform"] - grid[gp]["binomial"]) < 1e-9);
  }
}

TEST_CASE("cli: a locked output directory refuses a second run") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path());
  fs::create_directories(tmp.path() / "out");
  fixtures::write(tmp.path() / "out" / ".profcast.lock", "locked\n");
  CHECK(run_cli("run --config " + cfg.string()) == 2);
}

TEST_CASE("output tracker removes partial outputs on rollback") {
  testutil::TempDir tmp;
  profcast::pipeline::OutputTracker tracker;
  const fs::path a = tmp.path() / "a.csv";
  const fs::path b = tmp.path() / "b.json";
  fixtures::write(a, "x\n");
  fixtures::write(b, "{}\n");
  tracker.add(a);
  tracker.add(b);
  tracker.rollback();
  CHECK_FALSE(fs::exists(a));
  CHECK_FALSE(fs::exists(b));

  fixtures::write(a, "x\n");
  profcast::pipeline::OutputTracker keeper;
  keeper.add(a);
  keeper.commit();
  keeper.rollback();  // nothing left to remove
  CHECK(fs::exists(a));
}

TEST_CASE("cli: paper-scale panel routes model averaging through BD-MCMC") {
  testutil::TempDir tmp;
  const auto cfg = fixtures::make_paper_scale_dataset(tmp.path(), testutil::table1_countries());
  REQUIRE(run_cli("run --config " + cfg.string() + " --group boys --domain reading") == 0);
  const fs::path out = tmp.path() / "out";

  const auto validation = read_json(out / "validation_report.json");
  CHECK(validation["n_countries"].get<int>() == 53);
  CHECK(validation["retained_predictors"].size() == 29);  // two twins dropped

  const auto bres = read_json(out / "bma_boys_reading.json");
  CHECK(bres["method"].get<std::string>() == "bd_mcmc");
  CHECK(bres["q"].get<int>() == 29);
  CHECK(bres["total_visited_mass"].get<double>() <= 1.0);
  CHECK(bres["pips"].size() == 29);
  // the slope driver should carry the top inclusion probability
  double best = 0.0;
  std::string best_name;
  for (const auto& [name, pip] : bres["pips"].items()) {
    if (pip.get<double>() > best) {
      best = pip.get<double>();
      best_name = name;
    }
  }
  CHECK(best_name == "indicator_0");
  CHECK(best > 0.5);

  const auto table = profcast::csv::read_file((out / "projections_boys_reading.csv").string());
  // 53 countries + the pooled row, 5 observed + 5 fitted + 2 forecast rows each
  CHECK(table.rows.size() == 54u * 12u);
}

TEST_CASE("cli: fit-growth exports flat draws") {
  testutil::TempDir tmp;
  fixtures::FixtureSpec spec;
  spec.mcmc_iterations = 300;
  spec.mcmc_burn_in = 150;
  const auto cfg = fixtures::make_synthetic_dataset(tmp.path(), spec);
  REQUIRE(run_cli("fit-growth --config " + cfg.string() + " --group boys --domain reading") == 0);
  const auto draws =
      profcast::csv::read_file((tmp.path() / "out" / "draws_boys_reading_m1.csv").string());
  CHECK(draws.header == std::vector<std::string>{"chain", "iter", "parameter", "value"});
  CHECK(draws.rows.size() > 1000);
}
