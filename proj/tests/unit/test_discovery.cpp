#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "eqgram/discovery.hpp"
#include "eqgram/expression.hpp"
#include "eqgram/grammar.hpp"

using namespace eqgram;

namespace {

const std::vector<std::string> xy = {"x", "y"};

Dataset sum_data() {
  RandomStream rng(3, 0);
  std::vector<double> x, y, f;
  for (int i = 0; i < 20; ++i) {
    x.push_back(rng.uniform(1, 5));
    y.push_back(rng.uniform(1, 5));
    f.push_back(x.back() + y.back());
  }
  return Dataset({"x", "y", "f"}, {x, y, f}, "f");
}

}  // namespace

TEST_SUITE("discovery") {
  TEST_CASE("reconstructs x + y") {
    const Pcfg g = universal_grammar(xy);
    DiscoveryConfig cfg;
    cfg.n_samples = 2000;
    cfg.seed = 1;
    const auto r = mc_gbed(g, sum_data(), cfg);
    CHECK(r.success);
    REQUIRE(r.best());
    CHECK(r.best()->key == canonicalize(parse_expression("x+y")).key);
    CHECK(r.best()->error < 1e-9);
    CHECK(r.n_raw_samples == 2000);
    CHECK(r.n_unique == r.candidates.size());
    CHECK(r.coverage_achieved > 0.0);
    CHECK(r.coverage_achieved <= 1.0);
    for (std::size_t i = 1; i < r.candidates.size(); ++i) {
      const auto& a = r.candidates[i - 1];
      const auto& b = r.candidates[i];
      CHECK((a.error < b.error || (a.error == b.error && a.generation_probability >= b.generation_probability)));
    }
  }

  TEST_CASE("empty run") {
    DiscoveryConfig cfg;
    cfg.n_samples = 0;
    const auto r = mc_gbed(universal_grammar(xy), sum_data(), cfg);
    CHECK(r.candidates.empty());
    CHECK_FALSE(r.success);
    CHECK(r.best() == nullptr);
  }

  TEST_CASE("grammar and dataset variables") {
    const std::vector<std::string> x_only = {"x"};
    DiscoveryConfig cfg;
    cfg.n_samples = 50;
    CHECK_NOTHROW(mc_gbed(universal_grammar(x_only), sum_data(), cfg));
    const std::vector<std::string> with_target = {"x", "f"};
    CHECK_THROWS_AS(mc_gbed(universal_grammar(with_target), sum_data(), cfg), DiscoveryError);
    const std::vector<std::string> unknown = {"x", "z"};
    CHECK_THROWS_AS(mc_gbed(universal_grammar(unknown), sum_data(), cfg), DiscoveryError);
  }

  TEST_CASE("candidate pool bookkeeping") {
    const Pcfg g = universal_grammar(xy);
    const auto pool = sample_candidates(g, 1000, 9);
    CHECK(pool.n_raw_samples == 1000);
    std::size_t total = 0;
    for (const auto& c : pool.candidates) {
      CHECK(c.sample_multiplicity >= 1);
      CHECK(c.generation_probability > 0.0);
      total += c.sample_multiplicity;
    }
    CHECK(total == 1000);
    CHECK(pool.n_distinct_trees >= pool.candidates.size());
    CHECK(pool.n_distinct_trees <= 1000);
    const auto again = sample_candidates(g, 1000, 9, kDefaultMaxExpansions, 3);
    REQUIRE(again.candidates.size() == pool.candidates.size());
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
      CHECK(again.candidates[i].key == pool.candidates[i].key);
      CHECK(again.candidates[i].generation_probability == pool.candidates[i].generation_probability);
    }
    CHECK(again.coverage_achieved == pool.coverage_achieved);
  }

  TEST_CASE("too many parameters are kept but inadmissible") {
    const Pcfg g = universal_grammar(xy);
    DiscoveryConfig cfg;
    cfg.n_samples = 400;
    cfg.max_parameters = 0;
    const auto r = mc_gbed(g, sum_data(), cfg);
    bool saw = false;
    for (const auto& c : r.candidates)
      if (c.n_parameters > 0) {
        saw = true;
        CHECK_FALSE(c.admissible);
        CHECK(std::isinf(c.error));
      }
    CHECK(saw);
  }

  TEST_CASE("deterministic results") {
    const Pcfg g = universal_grammar(xy, BiasRatios::biased());
    DiscoveryConfig cfg;
    cfg.n_samples = 300;
    cfg.seed = 4;
    const auto a = result_to_json(mc_gbed(g, sum_data(), cfg), cfg).dump();
    cfg.jobs = 3;
    const auto b = result_to_json(mc_gbed(g, sum_data(), cfg), cfg).dump();
    CHECK(a == b);
  }

  TEST_CASE("resampling curve") {
    std::vector<std::vector<ScoredCandidate>> tasks = {
        {{0.1, false}, {0.2, true}, {0.3, false}},
        {{0.4, false}, {0.1, false}},
    };
    const auto curve = resample_success_curve(tasks, 50, 1);
    REQUIRE(curve.size() == 3);
    CHECK(curve.back() == doctest::Approx(0.5));
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);

    const std::vector<std::vector<ScoredCandidate>> dominant = {{{1.0, true}, {1e-12, false}, {1e-12, false}}};
    CHECK(resample_success_curve(dominant, 100, 2).front() == doctest::Approx(1.0));

    const std::vector<std::vector<ScoredCandidate>> underflow = {{{0.0, true}, {0.3, false}}};
    const auto tail = resample_success_curve(underflow, 20, 4);
    CHECK(tail.front() == 0.0);
    CHECK(tail.back() == 1.0);
    const std::vector<std::vector<ScoredCandidate>> negative = {{{-0.1, true}}};
    CHECK_THROWS_AS(resample_success_curve(negative, 5, 4), std::invalid_argument);

    const std::vector<std::vector<ScoredCandidate>> coin = {{{0.5, true}, {0.5, false}}};
    const int repeats = 4000;
    const double first = resample_success_curve(coin, repeats, 3).front();
    CHECK(std::abs(first - 0.5) < 3 * std::sqrt(0.25 / repeats));
  }

  TEST_CASE("run report rows") {
    const Pcfg g = universal_grammar(xy);
    DiscoveryConfig cfg;
    cfg.n_samples = 2000;
    cfg.seed = 1;
    const auto solved = run_report(mc_gbed(g, sum_data(), cfg), {"sum", 0, "uniform", 0.001728, 6});
    CHECK(solved.at("success") == 1);

    // Every sentence of this grammar carries a constant.
    const Pcfg scaled = parse_grammar("start: E\nE -> 'c' '*' V [1.0]\nV -> 'x' [0.5] | 'y' [0.5]\n");
    cfg.n_samples = 50;
    cfg.max_parameters = 0;
    const auto r = mc_gbed(scaled, sum_data(), cfg);
    CHECK_FALSE(r.candidates.empty());
    const auto row = run_report(r, {"sum", 1, "uniform", std::nullopt, std::nullopt});
    CHECK(row.at("success") == 0);
    CHECK(row.at("best_error").is_null());
  }

  TEST_CASE("candidates survive a JSON round trip") {
    const Pcfg g = universal_grammar(xy);
    DiscoveryConfig cfg;
    cfg.n_samples = 500;
    const auto r = mc_gbed(g, sum_data(), cfg);
    const auto back = candidates_from_json(result_to_json(r, cfg));
    REQUIRE(back.size() == r.candidates.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].probability == r.candidates[i].generation_probability);
      CHECK(back[i].success == (r.candidates[i].error < cfg.success_threshold));
    }
  }
}
