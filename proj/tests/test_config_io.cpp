#include <doctest.h>

#include <charconv>
#include <cmath>

#include "dfm/config.hpp"
#include "dfm/io.hpp"

using namespace dfm;

namespace {

const char* kGoodConfig = R"({
  "dynamics": "urw", "m": 2, "d": 1,
  "coupling": {"type": "independent", "mu0": [0.5, 0.5], "mu1": [0.2, 0.8]},
  "h": 0.2, "eta": 0.05, "seed": 7, "paths": 100, "score": "exact"
})";

std::string with_field(const std::string& base, const std::string& find,
                       const std::string& replace) {
  std::string text = base;
  const auto pos = text.find(find);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, find.size(), replace);
  return text;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const ExperimentConfig cfg = ExperimentConfig::from_json_text(kGoodConfig);
  CHECK(cfg.dynamics == DynamicsKind::kUniform);
  CHECK(cfg.m == 2);
  CHECK(cfg.seed == 7);
  CHECK(cfg.score == ScoreVariant::kExact);
  CHECK_NOTHROW(cfg.make_coupling());

  CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json"), InputError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json_text(with_field(kGoodConfig, "\"urw\"", "\"walk\"")),
      InputError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json_text(with_field(kGoodConfig, "\"eta\": 0.05", "\"eta\": 1e-5")),
      InputError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json_text(with_field(kGoodConfig, "\"h\": 0.2", "\"h\": 1.5")),
      InputError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json_text(with_field(kGoodConfig, "\"m\": 2", "\"m\": 1")),
      InputError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                      with_field(kGoodConfig, "\"score\": \"exact\"", "\"score\": \"magic\"")),
                  InputError);
}

TEST_CASE("config capacity and score variants") {
  // m^d above the dense capacity is rejected up front
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(with_field(
                      with_field(kGoodConfig, "\"m\": 2", "\"m\": 17"), "\"d\": 1", "\"d\": 3")),
                  InputError);

  const ExperimentConfig perturbed = ExperimentConfig::from_json_text(
      with_field(kGoodConfig, "\"score\": \"exact\"", "\"score\": \"perturbed:0.25\""));
  CHECK(perturbed.score == ScoreVariant::kPerturbed);
  CHECK(perturbed.gamma == 0.25);

  const ExperimentConfig tab = ExperimentConfig::from_json_text(
      with_field(kGoodConfig, "\"score\": \"exact\"", "\"score\": \"tabular:/tmp/t.json\""));
  CHECK(tab.score == ScoreVariant::kTabular);
  CHECK(tab.tabular_path == "/tmp/t.json");
}

TEST_CASE("config sweep lists") {
  const std::string text = with_field(
      kGoodConfig, "\"score\": \"exact\"",
      "\"score\": \"exact\", \"sweep\": {\"h\": [0.4, 0.2], \"gamma\": [0.0, 0.1]}");
  const ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
  REQUIRE(cfg.sweep.has_value());
  CHECK(cfg.sweep->h.size() == 2);
  CHECK(cfg.sweep->eta == std::vector<double>{0.05});  // defaults to the scalar
  CHECK(cfg.sweep->gamma.size() == 2);
}

TEST_CASE("coupling m/d consistency inside configs") {
  const std::string text = with_field(
      kGoodConfig, R"("coupling": {"type": "independent")",
      R"("coupling": {"m": 3, "type": "independent")");
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(text), InputError);
}

TEST_CASE("format_double is shortest round-trip") {
  for (const double v : {0.0, 1.0, -1.0 / 3.0, 0.1, 6.02e23, 5e-324, 0.46595933922441522504}) {
    const std::string s = format_double(v);
    double back = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(ec == std::errc{});
    CHECK(ptr == s.data() + s.size());
    CHECK(back == v);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("csv writer shape") {
  CsvWriter csv("a,b,c", 99);
  csv.add_row({"1", "2", "3"});
  CHECK_THROWS_AS(csv.add_row({"1", "2"}), InputError);
  const std::string& text = csv.text();
  CHECK(text == "# master_seed=99\na,b,c\n1,2,3\n");
}
