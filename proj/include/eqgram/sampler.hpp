#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eqgram/grammar.hpp"
#include "eqgram/random.hpp"

namespace eqgram {

/// A derivation record. Terminal nodes have no rule and no children; the
/// children of an internal node match the rhs of its rule left to right.
struct ParseTree {
  SymbolId label = 0;
  std::optional<RuleId> rule;
  std::vector<ParseTree> children;

  static ParseTree leaf(SymbolId terminal) { return ParseTree{terminal, std::nullopt, {}}; }
  bool is_leaf() const noexcept { return !rule.has_value(); }

  friend bool operator==(const ParseTree&, const ParseTree&) = default;
};

struct TreeProbability {
  double probability;
  double log_probability;
};

/// Product of rule probabilities over internal nodes, accumulated in log domain.
/// Throws std::invalid_argument when the tree does not match the grammar.
TreeProbability tree_probability(const ParseTree& t, const Pcfg& g);

/// Edge count of the longest root-to-leaf path; 0 for a bare leaf.
int tree_height(const ParseTree& t);

std::vector<SymbolId> yield_symbols(const ParseTree& t);
std::vector<std::string> yield(const ParseTree& t, const Pcfg& g);

/// Number of internal (expanded) nodes.
std::size_t expansion_count(const ParseTree& t);

/// Compact identity of a tree within one grammar: the preorder rule sequence.
/// Two trees of the same grammar are equal iff their signatures are equal.
std::string tree_signature(const ParseTree& t);

struct SampleOutcome {
  ParseTree tree;
  std::vector<std::string> sentence;
  double log_probability = 0.0;
  std::size_t expansions_used = 0;
};

inline constexpr std::size_t kDefaultMaxExpansions = 1000;

template <class Source>
concept UniformSource = requires(Source& s) {
  { s.uniform() } -> std::convertible_to<double>;
};

namespace detail {
std::optional<SampleOutcome> generate_sample(const Pcfg& g, SymbolId root,
                                             const std::function<double()>& draw,
                                             std::size_t max_expansions);
}

/// Draws a random derivation top-down, left to right, choosing each rule by
/// inverse-CDF over the lhs distribution in declaration order. Returns nullopt
/// when more than max_expansions nonterminals would have to be expanded.
template <UniformSource Source>
std::optional<SampleOutcome> generate_sample(const Pcfg& g, SymbolId root, Source& rng,
                                             std::size_t max_expansions = kDefaultMaxExpansions) {
  return detail::generate_sample(
      g, root, [&rng]() { return static_cast<double>(rng.uniform()); }, max_expansions);
}

struct SampleBatch {
  std::vector<SampleOutcome> samples;
  std::size_t discarded = 0;
};

/// Draws n samples from the start symbol. Sample i uses the stream keyed by
/// (master_seed, i, retry); over-budget attempts are retried with retry+1 and
/// counted as discards. The output does not depend on `jobs`.
SampleBatch sample_many(const Pcfg& g, std::size_t n, std::uint64_t master_seed,
                        std::size_t max_expansions = kDefaultMaxExpansions, unsigned jobs = 1);

}  // namespace eqgram
