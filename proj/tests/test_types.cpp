#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "climex/types.hpp"

using namespace climex;

TEST_CASE("ensemble id parses and formats losslessly") {
  EnsembleId e = parse_ensemble_id("r1i1p1f2");
  CHECK(e.r == 1);
  CHECK(e.i == 1);
  CHECK(e.p == 1);
  CHECK(e.f == 2);
  CHECK(format_ensemble_id(e) == "r1i1p1f2");

  e = parse_ensemble_id("r11i1p1f1");
  CHECK(e.r == 11);
  CHECK(format_ensemble_id(e) == "r11i1p1f1");

  for (const char* id : {"r1i1p1f1", "r10i2p3f4", "r999i999p999f999"})
    CHECK(format_ensemble_id(parse_ensemble_id(id)) == id);
}

TEST_CASE("malformed ensemble ids are rejected") {
  CHECK_THROWS_AS(parse_ensemble_id("x1i1p1f1"), validation_error);
  CHECK_THROWS_AS(parse_ensemble_id("r1i1p1"), validation_error);
  CHECK_THROWS_AS(parse_ensemble_id("r1i1p1f"), validation_error);
  CHECK_THROWS_AS(parse_ensemble_id(""), validation_error);
  CHECK_THROWS_AS(parse_ensemble_id("r1i1p1f1x"), validation_error);
  CHECK_THROWS_AS(parse_ensemble_id("r0i1p1f1"), validation_error);
  CHECK_THROWS_AS(parse_ensemble_id("r-1i1p1f1"), validation_error);
}

TEST_CASE("enum string round trips") {
  for (Variable v : {Variable::rsds, Variable::sfcWind, Variable::sfcWindmax,
                     Variable::tas})
    CHECK(variable_from_string(to_string(v)) == v);
  for (Scenario s : {Scenario::ssp126, Scenario::ssp245, Scenario::ssp585})
    CHECK(scenario_from_string(to_string(s)) == s);
  for (Statistic s : {Statistic::max, Statistic::min, Statistic::mean})
    CHECK(statistic_from_string(to_string(s)) == s);
  for (Zone z : {Zone::antarctic, Zone::temperate_south, Zone::tropical,
                 Zone::temperate_north, Zone::arctic, Zone::global_all})
    CHECK(zone_from_string(to_string(z)) == z);

  CHECK(scenario_from_string("SSP126") == Scenario::ssp126);
  CHECK(scenario_from_string("SSP585") == Scenario::ssp585);
  CHECK(std::string(to_string(Zone::global_all)) == "global");
  CHECK_THROWS_AS(scenario_from_string("SSP999"), validation_error);
  CHECK_THROWS_AS(variable_from_string("tasmax"), validation_error);
  CHECK_THROWS_AS(zone_from_string("equator"), validation_error);
}

TEST_CASE("units follow the variable") {
  CHECK(std::string(units(Variable::rsds)) == "W m-2");
  CHECK(std::string(units(Variable::sfcWind)) == "m s-1");
  CHECK(std::string(units(Variable::sfcWindmax)) == "m s-1");
  CHECK(std::string(units(Variable::tas)) == "K");
}

TEST_CASE("scenario index is the fixed-effect label") {
  CHECK(scenario_index(Scenario::ssp126) == 1);
  CHECK(scenario_index(Scenario::ssp245) == 2);
  CHECK(scenario_index(Scenario::ssp585) == 3);
}

TEST_CASE("dataset keys encode and decode") {
  DatasetKey k;
  k.gcm = "UK";
  k.variable = Variable::tas;
  k.scenario = Scenario::ssp585;
  k.ensemble = parse_ensemble_id("r3i1p1f2");
  k.statistic = Statistic::min;
  k.zone = Zone::temperate_south;
  const std::string token = encode_key(k);
  CHECK(token == "UK_tas_ssp585_r3i1p1f2_min_temperate_south");
  CHECK(decode_key(token) == k);

  k.zone = Zone::temperate_north;
  CHECK(decode_key(encode_key(k)) == k);
  k.zone = Zone::global_all;
  k.statistic = Statistic::mean;
  CHECK(decode_key(encode_key(k)) == k);

  CHECK_THROWS_AS(decode_key("only_three_parts"), validation_error);
  CHECK_THROWS_AS(decode_key("AC_rsds_ssp126_r1i1p1f1_max_atlantis"),
                  validation_error);
}

TEST_CASE("annual series indexing") {
  AnnualSeries s;
  s.base_year = 2015;
  s.values = {1.0, 2.0, 3.0};
  CHECK(s.span() == 3);
  CHECK(s.year(0) == 2015);
  CHECK(s.year(2) == 2017);
}

TEST_CASE("validation reports clean series as clean") {
  AnnualSeries s;
  s.key.variable = Variable::sfcWind;
  s.base_year = 2015;
  s.values.assign(86, 10.0);
  for (int i = 0; i < 86; ++i) s.values[i] += 0.01 * i;
  const ValidationReport r = validate_series(s, 86);
  CHECK(r.issues.empty());
}

TEST_CASE("validation flags length mismatch") {
  AnnualSeries s;
  s.values.assign(85, 1.0);
  const ValidationReport r = validate_series(s, 86);
  REQUIRE(!r.issues.empty());
  CHECK(r.issues[0].kind == SeriesIssue::length_mismatch);
}

TEST_CASE("validation flags non-finite entries") {
  AnnualSeries s;
  s.values.assign(86, 1.0);
  s.values[17] = std::numeric_limits<double>::quiet_NaN();
  s.values[40] = std::numeric_limits<double>::infinity();
  const ValidationReport r = validate_series(s, 86);
  int nonfinite = 0;
  for (const auto& i : r.issues)
    if (i.kind == SeriesIssue::nonfinite_value) ++nonfinite;
  CHECK(nonfinite == 2);
}

TEST_CASE("validation flags gross outliers at k*IQR from the median") {
  // wind-like series around 30 with IQR about 2; 150 is far beyond 10*IQR
  AnnualSeries s;
  s.key.variable = Variable::sfcWind;
  for (int i = 0; i < 86; ++i) s.values.push_back(29.0 + 2.0 * (i % 2));
  s.values[50] = 150.0;
  const ValidationReport r = validate_series(s, 86);
  bool flagged = false;
  for (const auto& i : r.issues)
    if (i.kind == SeriesIssue::outlier && i.index == 50) flagged = true;
  CHECK(flagged);

  // same distance is fine when k is huge
  const ValidationReport loose = validate_series(s, 86, 1000.0);
  for (const auto& i : loose.issues) CHECK(i.kind != SeriesIssue::outlier);
}

TEST_CASE("validation flags nonpositive kelvin for tas only") {
  AnnualSeries s;
  s.key.variable = Variable::tas;
  s.values.assign(86, 280.0);
  s.values[3] = -1.0;
  ValidationReport r = validate_series(s, 86);
  bool flagged = false;
  for (const auto& i : r.issues)
    if (i.kind == SeriesIssue::nonpositive_kelvin && i.index == 3) flagged = true;
  CHECK(flagged);

  s.key.variable = Variable::rsds;  // zero radiation is legitimate
  s.values[3] = 0.0;
  r = validate_series(s, 86);
  for (const auto& i : r.issues) CHECK(i.kind != SeriesIssue::nonpositive_kelvin);
}

TEST_CASE("validation does not mutate the series") {
  AnnualSeries s;
  s.values.assign(86, 1.0);
  s.values[0] = std::numeric_limits<double>::quiet_NaN();
  const AnnualSeries copy = s;
  (void)validate_series(s, 86);
  CHECK(std::isnan(s.values[0]));
  for (int i = 1; i < 86; ++i) CHECK(s.values[i] == copy.values[i]);
}
