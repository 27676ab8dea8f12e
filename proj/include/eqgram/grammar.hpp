#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eqgram {

using SymbolId = std::uint32_t;
using RuleId = std::size_t;

enum class SymbolKind { terminal, nonterminal };

struct GrammarSymbol {
  std::string name;
  SymbolKind kind = SymbolKind::terminal;
};

struct ProductionRule {
  SymbolId lhs = 0;
  std::vector<SymbolId> rhs;
  double probability = 1.0;
};

/// Raised for malformed grammar text or structurally invalid grammars.
/// `line` and `column` are 1-based; zero when the error has no source position.
class GrammarError : public std::runtime_error {
 public:
  GrammarError(const std::string& what, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A probabilistic context-free grammar. Immutable once constructed.
///
/// The constructor enforces only structural well-formedness (declared symbols,
/// nonterminal left-hand sides, non-empty right-hand sides, probabilities in
/// (0, 1]). Semantic checks (sum-to-one, reachability, productivity) are the
/// job of validate(), so that broken grammars can still be inspected.
class Pcfg {
 public:
  Pcfg(std::vector<GrammarSymbol> symbols, std::vector<ProductionRule> rules, SymbolId start);

  const std::vector<GrammarSymbol>& symbols() const noexcept { return symbols_; }
  const std::vector<ProductionRule>& rules() const noexcept { return rules_; }
  const GrammarSymbol& symbol(SymbolId id) const { return symbols_.at(id); }
  const ProductionRule& rule(RuleId id) const { return rules_.at(id); }
  std::span<const RuleId> rules_for(SymbolId lhs) const { return by_lhs_.at(lhs); }
  SymbolId start() const noexcept { return start_; }

  bool is_terminal(SymbolId id) const { return symbols_.at(id).kind == SymbolKind::terminal; }
  std::optional<SymbolId> find(std::string_view name) const;
  std::optional<SymbolId> find(std::string_view name, SymbolKind kind) const;

  std::vector<SymbolId> terminals() const;
  std::vector<SymbolId> nonterminals() const;

  /// Exact structural equality with probabilities compared within `tolerance`.
  bool equivalent(const Pcfg& other, double tolerance = 0.0) const;

 private:
  std::vector<GrammarSymbol> symbols_;
  std::vector<ProductionRule> rules_;
  std::vector<std::vector<RuleId>> by_lhs_;
  SymbolId start_;
};

/// Incremental construction of a Pcfg by symbol name.
class PcfgBuilder {
 public:
  SymbolId terminal(std::string_view name);
  SymbolId nonterminal(std::string_view name);
  /// rhs entries are symbol ids returned by terminal()/nonterminal().
  PcfgBuilder& rule(SymbolId lhs, std::vector<SymbolId> rhs, double probability);
  PcfgBuilder& start(SymbolId s);
  Pcfg build() const;

 private:
  SymbolId intern(std::string_view name, SymbolKind kind);
  std::vector<GrammarSymbol> symbols_;
  std::vector<ProductionRule> rules_;
  std::optional<SymbolId> start_;
};

inline constexpr double kProbabilitySumTolerance = 1e-9;
inline constexpr int kDefaultCoverageHorizon = 40;

enum class ViolationKind {
  probability_sum,
  dead_nonterminal,
  unreachable_nonterminal,
  unproductive_nonterminal,
  coverage_decreasing,
};

struct Violation {
  ViolationKind kind;
  std::string symbol;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  int coverage_horizon = kDefaultCoverageHorizon;
  /// Cov(S, horizon); values well below 1 flag improper (leaky) grammars.
  double coverage_at_horizon = 0.0;

  bool valid() const noexcept { return violations.empty(); }
};

ValidationReport validate(const Pcfg& g, int coverage_horizon = kDefaultCoverageHorizon);

/// Parses the grammar text format:
///
///     # comment
///     start: E
///     normalize: true
///     E -> E '+' V [0.5] | V [0.5]
///     V -> 'x' [1.0]
///
/// Throws GrammarError with a source position on syntax errors and a
/// descriptive message on validation failures.
Pcfg parse_grammar(std::string_view text);
Pcfg load_grammar_file(const std::string& path);

/// Renders in the same format parse_grammar reads; probabilities use
/// round-trip precision.
std::string render_grammar(const Pcfg& g);

/// E -> E '+' V [p] | V [1-p];  V -> x | y | ... uniformly.
Pcfg linear_grammar(int n_vars, double p);
Pcfg linear_grammar(std::span<const std::string> variables, double p);

struct BiasRatios {
  double r_sum = 1.0;    ///< P(E -> E + F) / P(E -> E - F)
  double r_mul = 1.0;    ///< P(F -> F * T) / P(F -> F / T)
  double r_const = 1.0;  ///< P(T -> c) / P(T -> V), relative to the structural split
  double r_funct = 1.0;  ///< P(all four functions) / P(R -> (E)), relative to the structural split

  static BiasRatios uniform() { return {}; }
  static BiasRatios biased() { return {0.4, 1.5, 0.25, 0.67}; }
};

/// Baseline masses of the universal grammar. The defaults are the rule
/// probabilities of the uniform universal grammar.
struct StructuralProbs {
  double p_recurse_E = 0.4;  ///< total mass of E -> E + F | E - F
  double p_recurse_F = 0.4;  ///< total mass of F -> F * T | F / T
  double p_R = 0.2;          ///< T -> R
  double p_V = 0.4;          ///< T -> V before r_const is applied
  double p_c = 0.4;          ///< T -> c before r_const is applied
  double p_paren = 0.6;      ///< R -> ( E ) before r_funct is applied
};

inline constexpr std::string_view kConstantSymbol = "c";

/// The five-nonterminal arithmetic grammar over {E, F, T, R, V}. Each ratio
/// multiplies the baseline split of its rule group, so all-ones ratios with
/// default structural probabilities give exactly the uniform universal grammar.
Pcfg universal_grammar(std::span<const std::string> variables, const BiasRatios& ratios = {},
                       const StructuralProbs& structural = {});

}  // namespace eqgram
