#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eqgram/grammar.hpp"
#include "eqgram/sampler.hpp"

namespace eqgram {

class TokenizeError : public std::runtime_error {
 public:
  TokenizeError(const std::string& text, std::size_t position);
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Raised by target_probability when the text is not in the language.
class NotInLanguageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Longest-match split over the grammar's terminal names; whitespace between
/// tokens is skipped.
std::vector<SymbolId> tokenize(std::string_view text, const Pcfg& g);

struct ScoredTree {
  ParseTree tree;
  double probability = 0.0;
  double log_probability = 0.0;
};

struct ParseResult {
  /// Most probable parses first.
  std::vector<ScoredTree> trees;
  /// Total probability of all parses of the sequence.
  double inside_probability = 0.0;
  double log_inside_probability = 0.0;
};

inline constexpr std::size_t kDefaultTopK = 4;

/// Inside probabilities and k-best derivations over all spans. Returns an
/// empty result when the tokens are not derivable from the start symbol.
ParseResult parse(const Pcfg& g, std::span<const SymbolId> tokens, std::size_t top_k = kDefaultTopK);

struct TargetProbability {
  double probability = 0.0;
  double log_probability = 0.0;
  int height = 0;
  std::size_t parses_found = 0;
  double inside_probability = 0.0;
  ParseTree tree;
};

/// Probability and height of the most probable parse of `text`.
TargetProbability target_probability(const Pcfg& g, std::string_view text,
                                     std::size_t top_k = kDefaultTopK);

}  // namespace eqgram
