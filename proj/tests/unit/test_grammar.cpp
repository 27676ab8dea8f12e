#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "eqgram/analytics.hpp"
#include "eqgram/grammar.hpp"

using namespace eqgram;

namespace {

double rule_prob(const Pcfg& g, const std::string& lhs, std::vector<std::string> rhs) {
  for (const auto& r : g.rules()) {
    if (g.symbol(r.lhs).name != lhs || r.rhs.size() != rhs.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < rhs.size(); ++i) same = same && g.symbol(r.rhs[i]).name == rhs[i];
    if (same) return r.probability;
  }
  return -1.0;
}

bool has_violation(const ValidationReport& rep, ViolationKind kind, const std::string& symbol) {
  return std::any_of(rep.violations.begin(), rep.violations.end(),
                     [&](const Violation& v) { return v.kind == kind && v.symbol == symbol; });
}

const std::vector<std::string> xy = {"x", "y"};

}  // namespace

TEST_SUITE("grammar") {
  TEST_CASE("minimal grammar") {
    const Pcfg g = parse_grammar("start: E\nE -> 'x' [1.0]\n");
    CHECK(g.rules().size() == 1);
    CHECK(g.terminals().size() == 1);
    CHECK(g.symbol(g.start()).name == "E");
    CHECK(validate(g).valid());
  }

  TEST_CASE("linear grammar text") {
    const Pcfg g = parse_grammar(R"(
# linear grammar, p = q = 0.5
start: E
E -> E '+' V [0.5] | V [0.5]
V -> 'x' [0.5] | 'y' [0.5]
)");
    CHECK(rule_prob(g, "E", {"E", "+", "V"}) == 0.5);
    CHECK(rule_prob(g, "E", {"V"}) == 0.5);
    CHECK(g.equivalent(linear_grammar(2, 0.5)));
  }

  TEST_CASE("probability sum violation names the nonterminal") {
    try {
      parse_grammar("start: E\nE -> E '+' 'x' [0.4] | 'x' [0.5]\n");
      FAIL("expected a GrammarError");
    } catch (const GrammarError& e) {
      const std::string what = e.what();
      CHECK(what.find("'E'") != std::string::npos);
      CHECK(what.find("0.9") != std::string::npos);
    }
  }

  TEST_CASE("normalize directive rescales") {
    const Pcfg g = parse_grammar("start: E\nnormalize: true\nE -> E '+' 'x' [2] | 'x' [6]\n");
    CHECK(rule_prob(g, "E", {"E", "+", "x"}) == doctest::Approx(0.25));
    CHECK(rule_prob(g, "E", {"x"}) == doctest::Approx(0.75));
  }

  TEST_CASE("syntax errors carry a position") {
    try {
      parse_grammar("start: E\nE -> 'x' [1.0\n");
      FAIL("expected a GrammarError");
    } catch (const GrammarError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() > 0);
    }
    CHECK_THROWS_AS(parse_grammar("start: E\nE -> X [1.0]\n"), GrammarError);
    CHECK_THROWS_AS(parse_grammar("start: E\nE -> 'x'\n"), GrammarError);
  }

  TEST_CASE("unreachable and unproductive nonterminals are rejected on load") {
    CHECK_THROWS_AS(parse_grammar("start: E\nE -> 'x' [1.0]\nG -> 'y' [1.0]\n"), GrammarError);
    CHECK_THROWS_AS(parse_grammar("start: E\nE -> E E [1.0]\n"), GrammarError);
  }

  TEST_CASE("render round trip") {
    const Pcfg g = universal_grammar(xy, BiasRatios::biased());
    const Pcfg back = parse_grammar(render_grammar(g));
    CHECK(back.equivalent(g));
  }

  TEST_CASE("validate: linear grammar coverage at the horizon") {
    const auto rep = validate(linear_grammar(2, 0.5));
    CHECK(rep.valid());
    CHECK(rep.coverage_horizon == 40);
    CHECK(rep.coverage_at_horizon == doctest::Approx(1.0 - std::pow(0.5, 39)).epsilon(1e-15));
  }

  TEST_CASE("validate: unproductive rule set") {
    PcfgBuilder b;
    const auto e = b.nonterminal("E");
    b.rule(e, {e, e}, 1.0).start(e);
    const auto rep = validate(b.build());
    CHECK_FALSE(rep.valid());
    CHECK(has_violation(rep, ViolationKind::unproductive_nonterminal, "E"));
  }

  TEST_CASE("validate: sum, dead and unreachable") {
    PcfgBuilder b;
    const auto e = b.nonterminal("E");
    const auto a = b.nonterminal("A");
    const auto z = b.nonterminal("Z");
    const auto x = b.terminal("x");
    b.rule(e, {x}, 0.7).rule(a, {x}, 1.0).start(e);
    (void)z;
    const auto rep = validate(b.build());
    CHECK(has_violation(rep, ViolationKind::probability_sum, "E"));
    CHECK(has_violation(rep, ViolationKind::unreachable_nonterminal, "A"));
    CHECK(has_violation(rep, ViolationKind::dead_nonterminal, "Z"));
  }

  TEST_CASE("validate: universal grammars are valid") {
    CHECK(validate(universal_grammar(xy)).valid());
    CHECK(validate(universal_grammar(xy, BiasRatios::biased())).valid());
  }

  TEST_CASE("linear grammar shapes") {
    CHECK(linear_grammar(2, 0.5).rules().size() == 4);
    const Pcfg one = linear_grammar(1, 0.3);
    CHECK(rule_prob(one, "V", {"x"}) == 1.0);
    const Pcfg three = linear_grammar(3, 0.5);
    for (const char* v : {"x", "y", "z"}) CHECK(rule_prob(three, "V", {v}) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(linear_grammar(2, 1.0), GrammarError);
    CHECK_THROWS_AS(linear_grammar(0, 0.5), GrammarError);
  }

  TEST_CASE("uniform universal grammar probabilities") {
    const Pcfg g = universal_grammar(xy);
    CHECK(rule_prob(g, "E", {"E", "+", "F"}) == doctest::Approx(0.2));
    CHECK(rule_prob(g, "E", {"E", "-", "F"}) == doctest::Approx(0.2));
    CHECK(rule_prob(g, "E", {"F"}) == doctest::Approx(0.6));
    CHECK(rule_prob(g, "F", {"F", "*", "T"}) == doctest::Approx(0.2));
    CHECK(rule_prob(g, "F", {"F", "/", "T"}) == doctest::Approx(0.2));
    CHECK(rule_prob(g, "F", {"T"}) == doctest::Approx(0.6));
    CHECK(rule_prob(g, "T", {"R"}) == doctest::Approx(0.2));
    CHECK(rule_prob(g, "T", {"V"}) == doctest::Approx(0.4));
    CHECK(rule_prob(g, "T", {"c"}) == doctest::Approx(0.4));
    CHECK(rule_prob(g, "R", {"(", "E", ")"}) == doctest::Approx(0.6));
    for (const char* fn : {"sin", "cos", "sqrt", "exp"})
      CHECK(rule_prob(g, "R", {fn, "(", "E", ")"}) == doctest::Approx(0.1));
    CHECK(rule_prob(g, "V", {"x"}) == doctest::Approx(0.5));
    CHECK(rule_prob(g, "V", {"y"}) == doctest::Approx(0.5));
  }

  TEST_CASE("biased universal grammar respects the ratios") {
    const Pcfg g = universal_grammar(xy, BiasRatios::biased());
    const double plus = rule_prob(g, "E", {"E", "+", "F"});
    const double minus = rule_prob(g, "E", {"E", "-", "F"});
    CHECK(plus / minus == doctest::Approx(0.4));
    CHECK(plus + minus == doctest::Approx(0.4));
    const double times = rule_prob(g, "F", {"F", "*", "T"});
    const double div = rule_prob(g, "F", {"F", "/", "T"});
    CHECK(times / div == doctest::Approx(1.5));
    CHECK(rule_prob(g, "T", {"c"}) / rule_prob(g, "T", {"V"}) == doctest::Approx(0.25));
    CHECK(rule_prob(g, "T", {"R"}) == doctest::Approx(0.2));
    const double funcs = 4.0 * rule_prob(g, "R", {"sin", "(", "E", ")"});
    CHECK(funcs / rule_prob(g, "R", {"(", "E", ")"}) == doctest::Approx(0.67 * 0.4 / 0.6));
  }

  TEST_CASE("universal grammar over one variable") {
    const std::vector<std::string> x = {"x"};
    CHECK(rule_prob(universal_grammar(x), "V", {"x"}) == 1.0);
  }

  TEST_CASE("universal grammar rejects bad inputs") {
    const std::vector<std::string> clash = {"x", "E"};
    CHECK_THROWS_AS(universal_grammar(clash), GrammarError);
    const std::vector<std::string> dup = {"x", "x"};
    CHECK_THROWS_AS(universal_grammar(dup), GrammarError);
    StructuralProbs s;
    s.p_recurse_E = 1.0;
    CHECK_THROWS_AS(universal_grammar(xy, {}, s), GrammarError);
    CHECK_THROWS_AS(universal_grammar(xy, BiasRatios{0.0, 1.0, 1.0, 1.0}), GrammarError);
  }
}
