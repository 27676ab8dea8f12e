#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "eqgram/expression.hpp"
#include "eqgram/fitting.hpp"

using namespace eqgram;

namespace {

CanonicalForm form(const std::string& text) { return canonicalize(parse_expression(text)); }

Dataset line_data(double slope, double offset) {
  std::vector<double> x, v;
  for (int i = 1; i <= 10; ++i) {
    x.push_back(i);
    v.push_back(slope * i + offset);
  }
  return Dataset({"x", "v"}, {x, v}, "v");
}

}  // namespace

TEST_SUITE("fitting") {
  TEST_CASE("dataset invariants") {
    const Dataset d = line_data(2, 0);
    CHECK(d.rows() == 10);
    CHECK(d.inputs() == std::vector<std::string>{"x"});
    CHECK(d.target_values()[2] == 6.0);
    CHECK(d.column("x")[0] == 1.0);
    CHECK_THROWS_AS(Dataset({"x", "v"}, {{1, 2}, {3, 3}}, "v"), DatasetError);
    CHECK_THROWS_AS(Dataset({"x", "v"}, {{1}, {3}}, "v"), DatasetError);
    CHECK_THROWS_AS(Dataset({"x", "v"}, {{1, NAN}, {3, 4}}, "v"), DatasetError);
    CHECK_THROWS_AS(Dataset({"x", "v"}, {{1, 2}, {3, 4}}, "w"), DatasetError);
    CHECK_THROWS_AS(Dataset({"x", "x"}, {{1, 2}, {3, 4}}, "x"), DatasetError);
    CHECK_THROWS_AS(d.column("z"), DatasetError);
    const Dataset rows = Dataset::from_rows({"x", "v"}, {{1, 2}, {2, 5}}, "v");
    CHECK(rows.target_values()[1] == 5.0);
  }

  TEST_CASE("rermse") {
    const Dataset d = line_data(2, 0);
    CHECK(rermse(parse_expression("2*x"), {}, d) == 0.0);
    const Dataset two = Dataset({"x", "v"}, {{1, 2}, {0, 2}}, "v");
    CHECK(rermse(parse_expression("1"), {}, two) == doctest::Approx(1.0));
    CHECK_FALSE(std::isfinite(rermse(parse_expression("sqrt(x-5)"), {}, d)));
    CHECK_THROWS(rermse(parse_expression("x*z"), {}, d));
  }

  TEST_CASE("objective maps non-finite errors to infinity") {
    const Dataset d = line_data(2, 0);
    const auto e = parse_expression("log(x-C0)");
    Objective obj(e, d);
    const std::vector<double> bad = {5.0};
    CHECK(obj(bad) == std::numeric_limits<double>::infinity());
    const std::vector<double> ok = {0.0};
    CHECK(std::isfinite(obj(ok)));
  }

  TEST_CASE("single constant recovers the mean") {
    const Dataset d = Dataset({"x", "v"}, {{1, 2, 3}, {3, 3, 3.0000001}}, "v");
    const auto r = fit_parameters(form("C0"), d, FitConfig{});
    REQUIRE(r.params.size() == 1);
    CHECK(r.params[0] == doctest::Approx((6.0000001 + 3.0) / 3.0).epsilon(1e-12));
    CHECK(r.error == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("scale fit") {
    const auto r = fit_parameters(form("C0*x"), line_data(2, 0), FitConfig{});
    REQUIRE(r.params.size() == 1);
    CHECK(std::abs(r.params[0] - 2.0) < 1e-6);
    CHECK(r.error < 1e-9);
    CHECK(r.converged);
  }

  TEST_CASE("line fit") {
    const auto c = form("C0*x + C1");
    const auto r = fit_parameters(c, line_data(2, 5), FitConfig{});
    REQUIRE(r.params.size() == 2);
    const auto value = [&](double x) { return evaluate(c.expr, {{"x", x}}, r.params); };
    CHECK(std::abs(value(0.0) - 5.0) < 1e-5);
    CHECK(std::abs(value(1.0) - value(0.0) - 2.0) < 1e-5);
  }

  TEST_CASE("fits match least squares on noisy data") {
    RandomStream rng(2024, 0);
    std::vector<double> x, y, v;
    for (int i = 0; i < 30; ++i) {
      x.push_back(rng.uniform(1, 5));
      y.push_back(rng.uniform(1, 5));
      v.push_back(1.5 * x.back() - 0.5 * y.back() + 2.0 + rng.uniform(-0.3, 0.3));
    }
    const Dataset d({"x", "y", "v"}, {x, y, v}, "v");
    const std::vector<double> ones(x.size(), 1.0);
    const auto ls = oracle::least_squares({x, y, ones}, v);
    const auto r = fit_parameters(form("C0*x + C1*y + C2"), d, FitConfig{});
    CHECK(r.error == doctest::Approx(ls.rermse).epsilon(1e-6));
  }

  TEST_CASE("parameter-free expressions are scored directly") {
    const auto r = fit_parameters(form("x"), line_data(2, 0), FitConfig{});
    CHECK(r.params.empty());
    CHECK(r.evaluations == 1);
    CHECK(r.error == doctest::Approx(rermse(parse_expression("x"), {}, line_data(2, 0))));
  }

  TEST_CASE("deterministic for a seed") {
    FitConfig cfg;
    cfg.seed = 77;
    const Dataset d = line_data(3, -1);
    const auto a = fit_parameters(form("C0*sin(x) + C1"), d, cfg);
    const auto b = fit_parameters(form("C0*sin(x) + C1"), d, cfg);
    CHECK(a.params == b.params);
    CHECK(a.error == b.error);
    CHECK(a.evaluations == b.evaluations);
  }

  TEST_CASE("best error never exceeds the best initial member") {
    FitConfig cfg;
    cfg.max_generations = 1;
    cfg.seed = 5;
    const Dataset d = line_data(3, -1);
    const auto c = form("C0*sin(x) + C1*x");
    const auto one = fit_parameters(c, d, cfg);
    cfg.max_generations = 50;
    const auto more = fit_parameters(c, d, cfg);
    CHECK(more.error <= one.error);
  }

  TEST_CASE("config checks") {
    FitConfig cfg;
    CHECK_NOTHROW(cfg.check());
    cfg.mutation_factor = 2.0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg = FitConfig{};
    cfg.crossover_rate = 1.0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg = FitConfig{};
    cfg.bounds = {{1.0, 0.0}};
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg = FitConfig{};
    cfg.bounds = {{0.0, 1.0}};
    CHECK(cfg.bounds_for(0).high == 1.0);
    CHECK(cfg.bounds_for(3).high == 10.0);
  }

  TEST_CASE("per-parameter bounds are respected") {
    FitConfig cfg;
    cfg.bounds = {{-1.0, 1.0}};
    const auto r = fit_parameters(form("C0*x"), line_data(2, 0), cfg);
    CHECK(r.params[0] >= -1.0);
    CHECK(r.params[0] <= 1.0);
    CHECK(r.params[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
}
