#include <doctest.h>

#include <map>
#include <string>

#include "eqgram/config.hpp"
#include "eqgram/json_schema.hpp"

using namespace eqgram;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("parse flat settings") {
    const auto s = Settings::parse(R"(
# comment
seed = 17
grammar = biased   # trailing comment
fit.max_generations = 250
keep_candidates = yes
)");
    CHECK(s.get("seed") == "17");
    CHECK(s.get("grammar") == "biased");
    CHECK_FALSE(s.get("runs").has_value());
    const auto cfg = to_run_config(s);
    CHECK(cfg.discovery.seed == 17);
    CHECK(cfg.grammar.builtin == BuiltinGrammar::biased_universal);
    CHECK(cfg.discovery.fit.max_generations == 250);
    CHECK(cfg.keep_candidates);
    CHECK(cfg.runs == 3);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(Settings::parse("colour = red\n"), ConfigError);
    CHECK_THROWS_AS(Settings::parse("seed 17\n"), ConfigError);
    CHECK_THROWS_AS(to_run_config(Settings::parse("seed = many\n")), ConfigError);
    CHECK_THROWS_AS(to_run_config(Settings::parse("keep_candidates = maybe\n")), ConfigError);
    try {
      Settings::parse("seed = 1\n\nbogus = 2\n", "my.conf");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("my.conf:3") != std::string::npos);
    }
  }

  TEST_CASE("environment overrides file values") {
    auto s = Settings::parse("seed = 1\nruns = 5\n");
    const std::map<std::string, std::string> env = {{"EQGRAM_SEED", "9"}, {"EQGRAM_FIT_TARGET_ERROR", "1e-8"}};
    s.apply_environment([&](const char* name) -> const char* {
      auto it = env.find(name);
      return it == env.end() ? nullptr : it->second.c_str();
    });
    const auto cfg = to_run_config(s);
    CHECK(cfg.discovery.seed == 9);
    CHECK(cfg.runs == 5);
    CHECK(cfg.discovery.fit.target_error == 1e-8);
    CHECK(environment_name("fit.max_generations") == "EQGRAM_FIT_MAX_GENERATIONS");
  }

  TEST_CASE("bundled default config parses") {
    const auto s = Settings::load(EQGRAM_SOURCE_DIR "/configs/default.conf");
    const auto cfg = to_run_config(s);
    CHECK_NOTHROW(cfg.check());
    CHECK(cfg.discovery.fit.population_factor == 10);
  }
}

TEST_SUITE("json_schema") {
  TEST_CASE("keywords") {
    const json schema = json::parse(R"({
      "type": "object",
      "required": ["n", "kind"],
      "additionalProperties": false,
      "properties": {
        "n": {"type": "integer", "minimum": 0, "maximum": 3},
        "kind": {"enum": ["a", "b"]},
        "v": {"anyOf": [{"type": "null"}, {"$ref": "#/$defs/rate"}]},
        "xs": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "tag": {"const": "v1"}
      },
      "$defs": {"rate": {"type": "number", "minimum": 0, "maximum": 1}}
    })");
    CHECK(validate_json(json::parse(R"({"n": 2, "kind": "a", "v": null, "xs": [1.5], "tag": "v1"})"), schema).empty());
    CHECK(validate_json(json::parse(R"({"n": 2, "kind": "a", "v": 0.5})"), schema).empty());
    const auto bad = validate_json(json::parse(R"({"n": 4, "kind": "c", "v": 2, "xs": [], "extra": 1})"), schema);
    CHECK(bad.size() == 5);
    const auto missing = validate_json(json::parse(R"({"n": 1.5})"), schema);
    REQUIRE(missing.size() == 2);
    CHECK(missing[0].path == "");
    const auto nested = validate_json(json::parse(R"({"n": 1, "kind": "b", "xs": ["s"]})"), schema);
    REQUIRE(nested.size() == 1);
    CHECK(nested[0].path == "/xs/0");
  }
}
