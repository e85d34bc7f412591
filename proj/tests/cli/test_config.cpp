#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "config.hpp"
#include "output.hpp"

using namespace phantom::cli;
using nlohmann::json;

TEST_CASE("defaults round trip through JSON") {
  const RunConfig a;
  const RunConfig b = RunConfig::from_json(json::parse(a.to_json().dump()));
  CHECK(b.to_json() == a.to_json());
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(RunConfig::from_json(json{{"zeta", 1.0}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"sections", {{"eta", 0.1}, {"nu", 1}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"eps", "small"}}), ConfigError);
}

TEST_CASE("nested invariants are checked at load") {
  CHECK_THROWS_AS(RunConfig::from_json(json{{"eps", -1.0}}), phantom::InvalidParameter);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"tolerances", {{"abs", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json(json{{"classifier", {{"small_factor", 0.6}, {"pulse_factor", 0.5}}}}),
      ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"sweep", {{"axes", {{{"param", "q"}, {"from", 0}, {"to", 1}}}}}}}),
                  ConfigError);
}

TEST_CASE("overrides and sweep axes") {
  RunConfig cfg = RunConfig::from_json(
      json{{"a2", 0.78}, {"sweep", {{"workers", 2}, {"axes", {{{"param", "a2"}, {"from", 0.7}, {"to", 0.8}, {"n", 3}}}}}}});
  CHECK(cfg.params.a2 == 0.78);
  const auto v = cfg.sweep.axes.at(0).values();
  REQUIRE(v.size() == 3);
  CHECK(v[1] == doctest::Approx(0.75));
  const std::string before = config_hash(cfg);
  apply_overrides(cfg, {"eps=0.02", "c=0.7"});
  CHECK(cfg.params.eps == 0.02);
  CHECK(cfg.params.c == 0.7);
  CHECK(config_hash(cfg) != before);
  CHECK_THROWS_AS(apply_overrides(cfg, {"eps"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(cfg, {"eps=abc"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(cfg, {"nope=1"}), ConfigError);
}

TEST_CASE("doubles are written with 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
