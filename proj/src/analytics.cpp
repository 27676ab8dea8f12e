#include "eqgram/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace eqgram {

namespace {

const BigInt& zero() {
  static const BigInt z = 0;
  return z;
}

}  // namespace

CountTable::CountTable(const Pcfg& g, int max_height) : max_height_(max_height) {
  if (max_height < 0) throw std::invalid_argument("height must be non-negative");
  const std::size_t n_symbols = g.symbols().size();
  n_.assign(n_symbols, std::vector<BigInt>(max_height + 1));
  cumulative_.assign(n_symbols, std::vector<BigInt>(max_height + 1));

  for (int h = 0; h <= max_height; ++h) {
    for (SymbolId a = 0; a < n_symbols; ++a) {
      BigInt value = 0;
      if (g.is_terminal(a)) {
        value = h == 0 ? 1 : 0;
      } else if (h > 0) {
        // Trees whose tallest child has height exactly h - 1.
        for (RuleId r : g.rules_for(a)) {
          BigInt below = 1;
          BigInt strictly_below = 1;
          for (SymbolId s : g.rule(r).rhs) {
            below *= up_to(s, h - 1);
            strictly_below *= up_to(s, h - 2);
          }
          value += below - strictly_below;
        }
      }
      n_[a][h] = value;
      cumulative_[a][h] = h > 0 ? cumulative_[a][h - 1] + value : value;
    }
  }
}

const BigInt& CountTable::exactly(SymbolId a, int h) const {
  if (h < 0) return zero();
  return n_.at(a).at(h);
}

const BigInt& CountTable::up_to(SymbolId a, int h) const {
  if (h < 0) return zero();
  return cumulative_.at(a).at(h);
}

TreeCounts count_trees(const Pcfg& g, SymbolId a, int h) {
  if (h < 0) throw std::invalid_argument("height must be non-negative");
  CountTable table(g, h);
  return {table.exactly(a, h), table.up_to(a, h)};
}

std::vector<std::vector<double>> coverage_table(const Pcfg& g, int max_height) {
  if (max_height < 0) throw std::invalid_argument("height must be non-negative");
  const std::size_t n_symbols = g.symbols().size();
  std::vector<std::vector<double>> cov(n_symbols, std::vector<double>(max_height + 1, 0.0));
  for (int h = 0; h <= max_height; ++h) {
    for (SymbolId a = 0; a < n_symbols; ++a) {
      if (g.is_terminal(a)) {
        cov[a][h] = 1.0;
      } else if (h > 0) {
        double total = 0.0;
        for (RuleId r : g.rules_for(a)) {
          double term = g.rule(r).probability;
          for (SymbolId s : g.rule(r).rhs) term *= cov[s][h - 1];
          total += term;
        }
        cov[a][h] = total;
      }
    }
  }
  return cov;
}

double coverage(const Pcfg& g, SymbolId a, int h) { return coverage_table(g, h).at(a).at(h); }

LinearClosedForms linear_closed_forms(int n_vars, double p, int h) {
  if (h < 2) throw std::invalid_argument("closed forms hold for h >= 2");
  if (n_vars < 1) throw std::invalid_argument("n_vars must be positive");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
  LinearClosedForms out;
  out.n = boost::multiprecision::pow(BigInt(n_vars), static_cast<unsigned>(h - 1));
  if (n_vars == 1) {
    out.N = h - 1;
  } else {
    out.N = (boost::multiprecision::pow(BigInt(n_vars), static_cast<unsigned>(h)) - 1) /
                (n_vars - 1) -
            1;
  }
  out.coverage = 1.0 - std::pow(p, h - 1);
  out.height_pmf = std::pow(p, h - 2) * (1.0 - p);
  return out;
}

double expected_samples_pcfg(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("probability must lie in (0, 1]");
  return 1.0 / p;
}

double log10_of(const BigInt& value) {
  if (value <= 0) return -std::numeric_limits<double>::infinity();
  const auto bits = boost::multiprecision::msb(value);
  if (bits < 1000) return std::log10(value.convert_to<double>());
  const auto shift = bits - 60;
  BigInt top = value >> shift;
  return std::log10(top.convert_to<double>()) + static_cast<double>(shift) * std::log10(2.0);
}

std::string to_decimal(const BigInt& value) { return value.str(); }

std::string ExactExpectation::decimal() const {
  const BigInt num = boost::multiprecision::numerator(value);
  const BigInt den = boost::multiprecision::denominator(value);
  if (den == 1) return num.str();
  if (den == 2) {
    BigInt whole = num / 2;
    return whole.str() + ".5";
  }
  return num.str() + "/" + den.str();
}

ExactExpectation expected_samples_cfg(const CountTable& counts, SymbolId start, int h) {
  if (h < 1) throw std::invalid_argument("target height must be at least 1");
  ExactExpectation out;
  out.value = BigRational(counts.up_to(start, h - 1)) + BigRational(counts.exactly(start, h), 2);
  const BigInt twice = 2 * counts.up_to(start, h - 1) + counts.exactly(start, h);
  out.log10 = log10_of(twice) - std::log10(2.0);
  return out;
}

ExactExpectation expected_samples_cfg(const Pcfg& g, int h) {
  if (h < 1) throw std::invalid_argument("target height must be at least 1");
  CountTable counts(g, h);
  return expected_samples_cfg(counts, g.start(), h);
}

double reconstruction_ratio(std::span<const double> expected, double n) {
  if (expected.empty()) throw std::invalid_argument("expected-sample list is empty");
  const auto hits = std::count_if(expected.begin(), expected.end(), [n](double e) { return n >= e; });
  return static_cast<double>(hits) / static_cast<double>(expected.size());
}

double expected_success_rate(std::span<const double> probabilities, double n_samples) {
  if (probabilities.empty()) throw std::invalid_argument("probability list is empty");
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
    if (n_samples <= 0.0 || p <= 0.0) continue;
    if (p >= 1.0) {
      total += 1.0;
      continue;
    }
    total += -std::expm1(n_samples * std::log1p(-p));
  }
  return total / static_cast<double>(probabilities.size());
}

double ambiguity_corrected_rate(std::span<const double> probabilities, double n_samples,
                                double uniqueness_ratio) {
  if (!(uniqueness_ratio > 0.0 && uniqueness_ratio <= 1.0))
    throw std::invalid_argument("uniqueness ratio must lie in (0, 1]");
  std::vector<double> corrected;
  corrected.reserve(probabilities.size());
  for (double p : probabilities) corrected.push_back(std::min(1.0, p / uniqueness_ratio));
  return expected_success_rate(corrected, n_samples);
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("spearman: need at least two observations");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace eqgram
