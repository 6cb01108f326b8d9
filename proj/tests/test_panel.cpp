#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "profcast/panel.hpp"
#include "profcast/unicode.hpp"
#include "testutil.hpp"

using namespace profcast;
using testutil::TempDir;
using testutil::write_file;

namespace {

std::string outcome_header() { return "country,year,group,domain,pct_min_prof\n"; }

// Full panel for the given countries: every cycle, both groups and domains.
std::string full_outcome_csv(const std::vector<std::string>& countries,
                             const std::vector<int>& years, double pct = 60.0) {
  std::ostringstream s;
  s << outcome_header();
  for (const auto& c : countries)
    for (int y : years)
      for (const char* g : {"boys", "girls"})
        for (const char* d : {"reading", "mathematics"})
          s << c << ',' << y << ',' << g << ',' << d << ',' << pct << '\n';
  return s.str();
}

std::string indicator_csv_for(const std::vector<std::string>& countries) {
  std::ostringstream s;
  s << "country,indicator,year,value\n";
  int k = 0;
  for (const auto& c : countries) {
    s << c << ",gdp,2009," << 1.0 + 0.01 * k << '\n';
    s << c << ",gdp,2021," << 1.2 + 0.02 * k << '\n';
    ++k;
  }
  return s.str();
}

std::string gdp_meta_json() {
  return R"({"indicators":[{"name":"gdp","end_year":2021,"start_year":2009}]})";
}

panel::PanelOptions options_with_meta(const std::filesystem::path& meta) {
  panel::PanelOptions o;
  o.indicator_meta_path = meta.string();
  return o;
}

}  // namespace

TEST_CASE("logit basics") {
  CHECK(logit(0.5) == 0.0);
  // ln(0.8245 / 0.1755), frozen from a high-precision evaluation
  CHECK_THAT(logit(0.8245), Catch::Matchers::WithinAbs(1.5471380990937331, 1e-12));
  CHECK_THROWS(logit(0.0));
  CHECK_THROWS(logit(1.0));
  CHECK_THROWS(logit(-0.2));
}

TEST_CASE("logit round trip on 1000 random proportions") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> unif(1e-6, 1.0 - 1e-6);
  double max_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = unif(gen);
    max_err = std::max(max_err, std::abs(inv_logit(logit(p)) - p));
  }
  CHECK(max_err < 1e-12);
}

TEST_CASE("cycles must be strictly increasing with contiguous indices") {
  auto cycles = panel::make_cycles({2009, 2012, 2015, 2018, 2022});
  for (std::size_t i = 0; i < cycles.size(); ++i)
    CHECK(cycles[i].index == static_cast<int>(i));
  CHECK_THROWS_AS(panel::make_cycles({2009, 2009, 2015}), config_error);
  CHECK_THROWS_AS(panel::make_cycles({2012, 2009}), config_error);
}

TEST_CASE("percent clamping at the boundaries") {
  CHECK(panel::proportion_from_percent(0.0, 10000.0) == 0.5 / 10000.0);
  CHECK(panel::proportion_from_percent(100.0, 10000.0) == 1.0 - 0.5 / 10000.0);
  CHECK(panel::proportion_from_percent(50.0, 10000.0) == 0.5);
  CHECK_THROWS_AS(panel::proportion_from_percent(100.5, 10000.0), data_error);
  CHECK_THROWS_AS(panel::proportion_from_percent(-0.1, 10000.0), data_error);
}

TEST_CASE("canonical country ids compose diacritics and trim") {
  // "Turkiye" with combining diaeresis over u vs precomposed form
  const std::string decomposed = "Türkiye";
  const std::string precomposed = "Türkiye";
  CHECK(canonical_id(decomposed) == precomposed);
  CHECK(canonical_id("  Albania \t") == "Albania");
  CHECK(canonical_id("Curaçao") == "Curaçao");
}

TEST_CASE("load_panel: constant 50 percent panel gives zero logits") {
  TempDir tmp;
  const std::vector<int> years{2009, 2012, 2015, 2018, 2022};
  write_file(tmp.file("out.csv"), full_outcome_csv({"Albania"}, years, 50.0));
  write_file(tmp.file("ind.csv"), indicator_csv_for({"Albania"}));
  write_file(tmp.file("meta.json"), gdp_meta_json());
  auto res = panel::load_panel(tmp.file("out.csv").string(), tmp.file("ind.csv").string(),
                               options_with_meta(tmp.file("meta.json")));
  REQUIRE(res.series.size() == 4);  // 1 country x 2 groups x 2 domains
  for (const auto& s : res.series)
    for (double lv : s.logit_values) CHECK(lv == 0.0);
}

TEST_CASE("load_panel: duplicated (country, cycle) row is an error") {
  TempDir tmp;
  std::string csv = full_outcome_csv({"Albania"}, {2009, 2012, 2015, 2018, 2022});
  csv += "Albania,2012,boys,reading,61\n";
  write_file(tmp.file("out.csv"), csv);
  write_file(tmp.file("ind.csv"), indicator_csv_for({"Albania"}));
  write_file(tmp.file("meta.json"), gdp_meta_json());
  CHECK_THROWS_AS(panel::load_panel(tmp.file("out.csv").string(), tmp.file("ind.csv").string(),
                                    options_with_meta(tmp.file("meta.json"))),
                  data_error);
}

TEST_CASE("load_panel: percentage outside [0,100] is an error") {
  TempDir tmp;
  std::string csv = outcome_header();
  csv += "Albania,2009,boys,reading,105\n";
  write_file(tmp.file("out.csv"), csv);
  write_file(tmp.file("ind.csv"), indicator_csv_for({"Albania"}));
  write_file(tmp.file("meta.json"), gdp_meta_json());
  CHECK_THROWS_AS(panel::load_panel(tmp.file("out.csv").string(), tmp.file("ind.csv").string(),
                                    options_with_meta(tmp.file("meta.json"))),
                  data_error);
}

TEST_CASE("load_panel: missing schema column is an error") {
  TempDir tmp;
  write_file(tmp.file("out.csv"), "country,year,group,pct_min_prof\nAlbania,2009,boys,55\n");
  write_file(tmp.file("ind.csv"), indicator_csv_for({"Albania"}));
  write_file(tmp.file("meta.json"), gdp_meta_json());
  CHECK_THROWS_AS(panel::load_panel(tmp.file("out.csv").string(), tmp.file("ind.csv").string(),
                                    options_with_meta(tmp.file("meta.json"))),
                  data_error);
}

TEST_CASE("load_panel: 53-country fixture yields 212 series in given order") {
  TempDir tmp;
  const auto& countries = testutil::table1_countries();
  REQUIRE(countries.size() == 53);
  const std::vector<int> years{2009, 2012, 2015, 2018, 2022};
  write_file(tmp.file("out.csv"), full_outcome_csv(countries, years, 65.0));
  write_file(tmp.file("ind.csv"), indicator_csv_for(countries));
  write_file(tmp.file("meta.json"), gdp_meta_json());
  auto res = panel::load_panel(tmp.file("out.csv").string(), tmp.file("ind.csv").string(),
                               options_with_meta(tmp.file("meta.json")));
  CHECK(res.series.size() == 53 * 2 * 2);
  CHECK(res.indicators.countries == countries);
  CHECK(res.excluded.empty());
}

TEST_CASE("load_panel: incomplete or indicator-absent countries are excluded and reported") {
  TempDir tmp;
  const std::vector<int> years{2009, 2012, 2015, 2018, 2022};
  std::string csv = full_outcome_csv({"Albania", "Peru"}, years, 55.0);
  // Qatar misses 2022
  for (int y : {2009, 2012, 2015, 2018})
    for (const char* g : {"boys", "girls"})
      for (const char* d : {"reading", "mathematics"})
        csv += "Qatar," + std::to_string(y) + "," + g + "," + d + ",44\n";
  write_file(tmp.file("out.csv"), csv);
  write_file(tmp.file("ind.csv"), indicator_csv_for({"Albania"}));  // Peru absent here
  write_file(tmp.file("meta.json"), gdp_meta_json());
  auto res = panel::load_panel(tmp.file("out.csv").string(), tmp.file("ind.csv").string(),
                               options_with_meta(tmp.file("meta.json")));
  CHECK(res.indicators.countries == std::vector<std::string>{"Albania"});
  REQUIRE(res.excluded.size() == 2);
  bool saw_peru = false, saw_qatar = false;
  for (const auto& e : res.excluded) {
    if (e.country == "Peru") saw_peru = true;
    if (e.country == "Qatar") saw_qatar = true;
  }
  CHECK(saw_peru);
  CHECK(saw_qatar);
}

namespace {

panel::IndicatorTable small_table() {
  panel::IndicatorTable t;
  t.countries = {"A", "B", "C"};
  t.meta.push_back({"gdp", 2021, std::nullopt, 2009, "context"});
  t.meta.push_back({"enrollment", 2022, 2021, 2009, "input"});
  t.meta.push_back({"flat", 2022, std::nullopt, 2009, "context"});
  t.values.resize(3);
  auto col = [](double a, double b, double c) {
    return std::vector<std::optional<double>>{a, b, c};
  };
  t.values[0][2009] = col(1.0, 2.0, 3.0);
  t.values[0][2021] = col(1.2, 2.5, 3.9);
  t.values[1][2009] = col(3.0, 1.0, 2.0);
  t.values[1][2021] = col(5.0, 2.0, 2.5);
  t.values[1][2022] = {std::nullopt, 4.0, 6.0};  // A needs the 2021 substitute
  t.values[2][2009] = col(7.0, 7.0, 7.0);
  t.values[2][2022] = col(9.0, 9.0, 9.0);  // constant difference -> zero variance
  return t;
}

}  // namespace

TEST_CASE("difference variables: direct, substituted, and zero-variance columns") {
  auto X = panel::make_difference_variables(small_table());
  REQUIRE(X.columns == std::vector<std::string>{"gdp", "enrollment"});
  // gdp: 2021 - 2009
  CHECK_THAT(X.values(0, 0), Catch::Matchers::WithinAbs(0.2, 1e-12));
  // enrollment for A: 2022 missing, 2021 substituted: 5.0 - 3.0
  CHECK_THAT(X.values(0, 1), Catch::Matchers::WithinAbs(2.0, 1e-12));
  // enrollment for B: 2022 observed: 4.0 - 1.0
  CHECK_THAT(X.values(1, 1), Catch::Matchers::WithinAbs(3.0, 1e-12));
  REQUIRE(X.dropped.size() == 1);
  CHECK(X.dropped[0].name == "flat");
  CHECK(X.dropped[0].reason == "zero variance");
}

TEST_CASE("difference variables: propagates missing or errors when disallowed") {
  auto t = small_table();
  t.values[1][2021][0] = std::nullopt;  // A now misses end and substitute
  auto X = panel::make_difference_variables(t, true);
  CHECK(std::isnan(X.values(0, 1)));
  CHECK_THROWS_AS(panel::make_difference_variables(t, false), data_error);
}

TEST_CASE("difference variables are translation invariant") {
  auto t = small_table();
  auto base = panel::make_difference_variables(t);
  // shift every year of gdp by +17
  for (auto& [year, cells] : t.values[0])
    for (auto& c : cells)
      if (c) c = *c + 17.0;
  auto shifted = panel::make_difference_variables(t);
  for (Eigen::Index i = 0; i < base.values.rows(); ++i)
    CHECK_THAT(shifted.values(i, 0), Catch::Matchers::WithinAbs(base.values(i, 0), 1e-12));
}

namespace {

panel::DesignMatrix matrix_from(const std::vector<std::string>& cols,
                                const std::vector<std::vector<double>>& data) {
  panel::DesignMatrix X;
  X.columns = cols;
  const std::size_t n = data.size();
  for (std::size_t i = 0; i < n; ++i) X.countries.push_back("c" + std::to_string(i));
  X.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      X.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i][j];
  return X;
}

}  // namespace

TEST_CASE("drop_collinear removes the later duplicate column") {
  auto X = matrix_from({"a", "b"}, {{1, 1}, {2, 2}, {3, 3}, {5, 5}});
  auto out = panel::drop_collinear(X, 0.95);
  CHECK(out.columns == std::vector<std::string>{"a"});
  REQUIRE(out.dropped.size() == 1);
  CHECK(out.dropped[0].name == "b");
}

TEST_CASE("drop_collinear keeps orthogonal columns and is idempotent") {
  auto X = matrix_from({"a", "b"}, {{1, 1}, {-1, 1}, {1, -1}, {-1, -1}});
  auto once = panel::drop_collinear(X, 0.95);
  CHECK(once.columns.size() == 2);
  auto twice = panel::drop_collinear(once, 0.95);
  CHECK(twice.columns == once.columns);
  CHECK(twice.values == once.values);
}

TEST_CASE("drop_collinear: 31-indicator fixture retains 29") {
  // Thirty-one indicators; the lower-secondary and primary entrance ages
  // duplicate their school-starting-age counterparts.
  std::vector<std::string> names;
  for (int i = 0; i < 31; ++i) names.push_back("ind" + std::to_string(i));
  names[9] = "official_entrance_age_lower_secondary";   // duplicates index 8
  names[8] = "lower_secondary_school_starting_age";
  names[24] = "primary_school_starting_age";            // duplicates index 11
  names[11] = "official_entrance_age_primary";

  std::mt19937_64 gen(42);
  std::normal_distribution<double> norm;
  const int n = 53;
  std::vector<std::vector<double>> rows(n, std::vector<double>(31));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 31; ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = norm(gen);
  for (int i = 0; i < n; ++i) {
    rows[static_cast<std::size_t>(i)][9] = rows[static_cast<std::size_t>(i)][8];
    rows[static_cast<std::size_t>(i)][24] = rows[static_cast<std::size_t>(i)][11];
  }
  auto X = matrix_from(names, rows);
  auto out = panel::drop_collinear(X, 0.95);
  CHECK(out.columns.size() == 29);
  REQUIRE(out.dropped.size() == 2);
  CHECK(out.dropped[0].name == "official_entrance_age_lower_secondary");
  CHECK(out.dropped[1].name == "primary_school_starting_age");
}

TEST_CASE("standardize z-scores all columns") {
  auto X = matrix_from({"a"}, {{1}, {2}, {3}, {4}});
  auto out = panel::standardize(X);
  CHECK(out.standardized);
  CHECK_THAT(out.values.col(0).mean(), Catch::Matchers::WithinAbs(0.0, 1e-12));
  const double sd = std::sqrt(out.values.col(0).squaredNorm() / 3.0);
  CHECK_THAT(sd, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(out.col_means[0], Catch::Matchers::WithinAbs(2.5, 1e-12));
}

TEST_CASE("outcome series round trip between values and logits") {
  TempDir tmp;
  const std::vector<int> years{2009, 2012, 2015, 2018, 2022};
  write_file(tmp.file("out.csv"), full_outcome_csv({"Peru"}, years, 68.24));
  write_file(tmp.file("ind.csv"), indicator_csv_for({"Peru"}));
  write_file(tmp.file("meta.json"), gdp_meta_json());
  auto res = panel::load_panel(tmp.file("out.csv").string(), tmp.file("ind.csv").string(),
                               options_with_meta(tmp.file("meta.json")));
  for (const auto& s : res.series)
    for (std::size_t t = 0; t < s.values.size(); ++t)
      CHECK_THAT(inv_logit(s.logit_values[t]), Catch::Matchers::WithinAbs(s.values[t], 1e-12));
}
