#pragma once

#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "eqgram/grammar.hpp"

namespace eqgram {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

/// Exact parse-tree counts per (symbol, height): n(A, h) trees of height
/// exactly h and N(A, h) trees of height at most h. Probabilities are ignored.
class CountTable {
 public:
  CountTable(const Pcfg& g, int max_height);

  int max_height() const noexcept { return max_height_; }
  const BigInt& exactly(SymbolId a, int h) const;
  /// N(A, h); zero for negative h.
  const BigInt& up_to(SymbolId a, int h) const;

 private:
  int max_height_;
  std::vector<std::vector<BigInt>> n_;
  std::vector<std::vector<BigInt>> cumulative_;
};

struct TreeCounts {
  BigInt exactly;
  BigInt up_to;
};

TreeCounts count_trees(const Pcfg& g, SymbolId a, int h);

/// Cov(A, h) for every symbol and every height 0..max_height, indexed [symbol][h].
std::vector<std::vector<double>> coverage_table(const Pcfg& g, int max_height);
double coverage(const Pcfg& g, SymbolId a, int h);

/// Closed forms for the linear grammar with n_vars variables and recursion probability p.
struct LinearClosedForms {
  BigInt n;
  BigInt N;
  double coverage;
  double height_pmf;
};

LinearClosedForms linear_closed_forms(int n_vars, double p, int h);

/// Expected number of i.i.d. samples until the first hit of an event of probability p.
double expected_samples_pcfg(double p);

/// Expected number of trees enumerated by a systematic height-ordered generator
/// before reaching a target of parse height h: N(h-1) + n(h)/2 at the start symbol.
struct ExactExpectation {
  BigRational value;
  double log10 = 0.0;

  /// Exact decimal rendering (the value always has denominator 1 or 2).
  std::string decimal() const;
};

ExactExpectation expected_samples_cfg(const Pcfg& g, int h);
ExactExpectation expected_samples_cfg(const CountTable& counts, SymbolId start, int h);

/// log10 of a non-negative big integer; -inf for zero.
double log10_of(const BigInt& value);
std::string to_decimal(const BigInt& value);

/// Fraction of expected sample counts not exceeding n.
double reconstruction_ratio(std::span<const double> expected, double n);

/// Mean over targets of 1 - (1 - p_i)^N.
double expected_success_rate(std::span<const double> probabilities, double n_samples);

/// expected_success_rate with each probability divided by the uniqueness ratio
/// (clamped to 1), accounting for equivalent expressions sharing one target.
double ambiguity_corrected_rate(std::span<const double> probabilities, double n_samples,
                                double uniqueness_ratio);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace eqgram
