#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "eqgram/chart_parser.hpp"
#include "eqgram/grammar.hpp"
#include "eqgram/random.hpp"
#include "eqgram/sampler.hpp"

using namespace eqgram;

namespace {

struct FixedDraws {
  std::vector<double> values;
  std::size_t next = 0;
  double uniform() { return values.at(next++ % values.size()); }
};

ParseTree parse_one(const Pcfg& g, const std::string& text) {
  const auto tokens = tokenize(text, g);
  auto r = parse(g, tokens);
  REQUIRE(r.trees.size() == 1);
  return r.trees.front().tree;
}

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& t : v) s += t;
  return s;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("single derivation") {
    const Pcfg g = parse_grammar("start: E\nE -> 'x' [1.0]\n");
    RandomStream rng(7, 0);
    auto s = generate_sample(g, g.start(), rng);
    REQUIRE(s);
    CHECK(s->sentence == std::vector<std::string>{"x"});
    CHECK(std::exp(s->log_probability) == 1.0);
    CHECK(s->expansions_used == 1);
  }

  TEST_CASE("first draw selects the first rule") {
    const Pcfg g = parse_grammar("start: E\nE -> V [1.0]\nV -> 'x' [0.5] | 'y' [0.5]\n");
    FixedDraws draws{{0.2, 0.2}};
    auto s = generate_sample(g, g.start(), draws);
    REQUIRE(s);
    CHECK(s->sentence == std::vector<std::string>{"x"});
    CHECK(std::exp(s->log_probability) == doctest::Approx(0.5));
    FixedDraws late{{0.7}};
    CHECK(generate_sample(g, g.start(), late)->sentence == std::vector<std::string>{"y"});
  }

  TEST_CASE("budget exhaustion returns nothing") {
    const Pcfg g = linear_grammar(1, 0.5);
    FixedDraws always_recurse{{0.0}};
    CHECK_FALSE(generate_sample(g, g.start(), always_recurse, 10).has_value());
  }

  TEST_CASE("tree probability of the linear grammar sentences") {
    const Pcfg g = linear_grammar(2, 0.5);
    const ParseTree t1 = parse_one(g, "x+y");
    const ParseTree t2 = parse_one(g, "x+y+y");
    CHECK(tree_probability(t1, g).probability == 0.0625);
    CHECK(tree_probability(t2, g).probability == 0.015625);
    CHECK(tree_height(t1) == 3);
    CHECK(tree_height(t2) == 4);
    CHECK(yield(t1, g) == std::vector<std::string>{"x", "+", "y"});
    CHECK(yield(t2, g) == std::vector<std::string>{"x", "+", "y", "+", "y"});
  }

  TEST_CASE("single rule derivation and bare leaves") {
    const Pcfg g = parse_grammar("start: E\nE -> 'x' [1.0]\n");
    const auto x = *g.find("x");
    const ParseTree t{g.start(), 0, {ParseTree::leaf(x)}};
    CHECK(tree_probability(t, g).probability == 1.0);
    CHECK(tree_height(ParseTree::leaf(x)) == 0);
    CHECK(yield(ParseTree::leaf(x), g) == std::vector<std::string>{"x"});
    CHECK(expansion_count(t) == 1);
  }

  TEST_CASE("mismatched tree is rejected") {
    const Pcfg g = linear_grammar(2, 0.5);
    const auto x = *g.find("x");
    const ParseTree bad{g.start(), 0, {ParseTree::leaf(x)}};
    CHECK_THROWS_AS(tree_probability(bad, g), std::invalid_argument);
  }

  TEST_CASE("sample_many on a single-derivation grammar") {
    const Pcfg g = parse_grammar("start: E\nE -> 'x' [1.0]\n");
    const auto batch = sample_many(g, 3, 11);
    REQUIRE(batch.samples.size() == 3);
    CHECK(batch.discarded == 0);
    for (const auto& s : batch.samples) CHECK(s.sentence == std::vector<std::string>{"x"});
  }

  TEST_CASE("sample_many is deterministic and independent of jobs") {
    const std::vector<std::string> xy = {"x", "y"};
    const Pcfg g = universal_grammar(xy);
    const auto a = sample_many(g, 500, 42);
    const auto b = sample_many(g, 500, 42);
    const auto c = sample_many(g, 500, 42, kDefaultMaxExpansions, 4);
    REQUIRE(a.samples.size() == 500);
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      CHECK(a.samples[i].tree == b.samples[i].tree);
      CHECK(a.samples[i].tree == c.samples[i].tree);
      CHECK(a.samples[i].log_probability == c.samples[i].log_probability);
    }
    CHECK(a.discarded == c.discarded);
    const auto other = sample_many(g, 500, 43);
    int differ = 0;
    for (std::size_t i = 0; i < 500; ++i) differ += !(a.samples[i].tree == other.samples[i].tree);
    CHECK(differ > 0);
  }

  TEST_CASE("tight budget discards") {
    // P(a derivation of G_L(0.99) fits in 5 expansions) = 1 - 0.99^4, about 0.04.
    const Pcfg g = linear_grammar(2, 0.99);
    const auto batch = sample_many(g, 100, 5, 5);
    CHECK(batch.samples.size() == 100);
    CHECK(batch.discarded > 0);
    for (const auto& s : batch.samples) CHECK(s.expansions_used <= 5);
  }

  TEST_CASE("reported log probability matches the tree") {
    const std::vector<std::string> xy = {"x", "y"};
    const Pcfg g = universal_grammar(xy, BiasRatios::biased());
    for (const auto& s : sample_many(g, 200, 3).samples) {
      CHECK(s.log_probability == doctest::Approx(tree_probability(s.tree, g).log_probability).epsilon(1e-12));
      CHECK(s.sentence == yield(s.tree, g));
      CHECK(s.expansions_used == expansion_count(s.tree));
    }
  }

  TEST_CASE("signatures identify trees") {
    const Pcfg g = linear_grammar(2, 0.5);
    const ParseTree a = parse_one(g, "x+y");
    const ParseTree b = parse_one(g, "y+x");
    CHECK(tree_signature(a) == tree_signature(parse_one(g, "x+y")));
    CHECK(tree_signature(a) != tree_signature(b));
    CHECK(joined(yield(b, g)) == "y+x");
  }

  TEST_CASE("random stream is a counter stream") {
    RandomStream a(1, 2, 3);
    RandomStream b(derive_key(1, 2, 3));
    for (int i = 0; i < 10; ++i) CHECK(a() == b());
    RandomStream u(9);
    for (int i = 0; i < 1000; ++i) {
      const double x = u.uniform();
      CHECK(x >= 0.0);
      CHECK(x < 1.0);
      CHECK(u.below(7) < 7);
    }
  }
}
