#include "eqgram/chart_parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace eqgram {

TokenizeError::TokenizeError(const std::string& text, std::size_t position)
    : std::runtime_error("cannot tokenize '" + text + "' at position " + std::to_string(position)),
      position_(position) {}

std::vector<SymbolId> tokenize(std::string_view text, const Pcfg& g) {
  const auto terminals = g.terminals();
  std::vector<SymbolId> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[pos]))) {
      ++pos;
      continue;
    }
    std::size_t best_length = 0;
    SymbolId best = 0;
    for (SymbolId t : terminals) {
      const std::string& name = g.symbol(t).name;
      if (name.size() > best_length && text.substr(pos, name.size()) == name) {
        best_length = name.size();
        best = t;
      }
    }
    if (best_length == 0) throw TokenizeError(std::string(text), pos);
    out.push_back(best);
    pos += best_length;
  }
  return out;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxUnaryRounds = 1000;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// One derivation of a chart entry. For symbols: `rule` and `left` index the
/// completed item list. For items at dot 1: `left` indexes the first child's
/// symbol list. For later dots: `left` indexes the item one dot back ending
/// at `split`, `right` indexes the symbol list of the span (split, end).
struct Derivation {
  double log_probability;
  RuleId rule = 0;
  int split = -1;
  int left = -1;
  int right = -1;
};

struct Entry {
  double inside = kNegInf;
  std::vector<Derivation> best;
};

bool by_probability(const Derivation& a, const Derivation& b) { return a.log_probability > b.log_probability; }

void keep_best(std::vector<Derivation>& v, std::size_t k) {
  std::stable_sort(v.begin(), v.end(), by_probability);
  if (v.size() > k) v.resize(k);
}

bool same_derivations(const std::vector<Derivation>& a, const std::vector<Derivation>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].log_probability != b[i].log_probability || a[i].rule != b[i].rule || a[i].left != b[i].left)
      return false;
  }
  return true;
}

class Chart {
 public:
  Chart(const Pcfg& g, std::span<const SymbolId> tokens, std::size_t k)
      : g_(g), tokens_(tokens), n_(tokens.size()), k_(k) {
    item_offset_.reserve(g.rules().size());
    std::size_t total = 0;
    for (const auto& r : g.rules()) {
      item_offset_.push_back(total);
      total += r.rhs.size();
    }
    n_items_ = total;
    symbols_.resize((n_ + 1) * (n_ + 1));
    items_.resize((n_ + 1) * (n_ + 1));
    for (const auto& r : g.rules()) {
      if (r.rhs.size() == 1) {
        unary_.push_back(static_cast<RuleId>(&r - g.rules().data()));
      }
    }
  }

  void fill() {
    for (std::size_t length = 1; length <= n_; ++length)
      for (std::size_t i = 0; i + length <= n_; ++i) fill_span(i, i + length);
  }

  const Entry& symbol(std::size_t i, std::size_t j, SymbolId s) const { return symbols_[span(i, j)][s]; }

  ParseTree build_symbol(std::size_t i, std::size_t j, SymbolId s, int index) const {
    if (g_.is_terminal(s)) return ParseTree::leaf(s);
    const Derivation& d = symbols_[span(i, j)][s].best.at(index);
    ParseTree t;
    t.label = s;
    t.rule = d.rule;
    collect_children(i, j, d.rule, g_.rule(d.rule).rhs.size(), d.left, t.children);
    return t;
  }

 private:
  std::size_t span(std::size_t i, std::size_t j) const { return i * (n_ + 1) + j; }
  std::size_t item(RuleId r, std::size_t dot) const { return item_offset_[r] + dot - 1; }

  void collect_children(std::size_t i, std::size_t j, RuleId r, std::size_t dot, int index,
                        std::vector<ParseTree>& out) const {
    const Derivation& d = items_[span(i, j)][item(r, dot)].best.at(index);
    const auto& rhs = g_.rule(r).rhs;
    if (dot == 1) {
      out.push_back(build_symbol(i, j, rhs[0], d.left));
      return;
    }
    collect_children(i, d.split, r, dot - 1, d.left, out);
    out.push_back(build_symbol(d.split, j, rhs[dot - 1], d.right));
  }

  void fill_span(std::size_t i, std::size_t j) {
    auto& syms = symbols_[span(i, j)];
    auto& items = items_[span(i, j)];
    syms.assign(g_.symbols().size(), Entry{});
    items.assign(n_items_, Entry{});

    if (j == i + 1) {
      auto& e = syms[tokens_[i]];
      e.inside = 0.0;
      e.best.push_back({0.0});
    }

    // Extend items ending at split k by a symbol covering (k, j).
    for (std::size_t k = i + 1; k < j; ++k) {
      const auto& left_items = items_[span(i, k)];
      const auto& right_syms = symbols_[span(k, j)];
      for (RuleId r = 0; r < g_.rules().size(); ++r) {
        const auto& rhs = g_.rule(r).rhs;
        for (std::size_t dot = 1; dot < rhs.size(); ++dot) {
          const Entry& left = left_items[item(r, dot)];
          if (left.inside == kNegInf) continue;
          const Entry& right = right_syms[rhs[dot]];
          if (right.inside == kNegInf) continue;
          Entry& target = items[item(r, dot + 1)];
          target.inside = log_add(target.inside, left.inside + right.inside);
          for (std::size_t a = 0; a < left.best.size(); ++a)
            for (std::size_t b = 0; b < right.best.size(); ++b)
              target.best.push_back({left.best[a].log_probability + right.best[b].log_probability, r,
                                     static_cast<int>(k), static_cast<int>(a), static_cast<int>(b)});
          keep_best(target.best, k_);
        }
      }
    }

    // Completed items of length >= 2 seed their left-hand sides.
    std::vector<Entry> base(syms);
    for (RuleId r = 0; r < g_.rules().size(); ++r) {
      const auto& rule = g_.rule(r);
      if (rule.rhs.size() < 2) continue;
      const Entry& done = items[item(r, rule.rhs.size())];
      if (done.inside == kNegInf) continue;
      Entry& lhs = base[rule.lhs];
      const double lp = std::log(rule.probability);
      lhs.inside = log_add(lhs.inside, done.inside + lp);
      for (std::size_t a = 0; a < done.best.size(); ++a)
        lhs.best.push_back({done.best[a].log_probability + lp, r, -1, static_cast<int>(a)});
      keep_best(lhs.best, k_);
    }

    // Unary closure, relaxed until stable.
    syms = base;
    for (int round = 0; round < kMaxUnaryRounds; ++round) {
      for (RuleId r : unary_) {
        const Entry& child = syms[g_.rule(r).rhs[0]];
        Entry& it = items[item(r, 1)];
        it.inside = child.inside;
        it.best.clear();
        for (std::size_t a = 0; a < child.best.size(); ++a)
          it.best.push_back({child.best[a].log_probability, r, -1, static_cast<int>(a)});
      }
      std::vector<Entry> next(base);
      for (RuleId r : unary_) {
        const auto& rule = g_.rule(r);
        const Entry& it = items[item(r, 1)];
        if (it.inside == kNegInf) continue;
        Entry& lhs = next[rule.lhs];
        const double lp = std::log(rule.probability);
        lhs.inside = log_add(lhs.inside, it.inside + lp);
        for (std::size_t a = 0; a < it.best.size(); ++a)
          lhs.best.push_back({it.best[a].log_probability + lp, r, -1, static_cast<int>(a)});
      }
      bool stable = true;
      for (std::size_t s = 0; s < next.size(); ++s) {
        keep_best(next[s].best, k_);
        const double before = syms[s].inside, after = next[s].inside;
        const bool inside_same =
            before == after || (before != kNegInf && after != kNegInf && std::abs(before - after) < 1e-15);
        if (!inside_same || !same_derivations(syms[s].best, next[s].best)) stable = false;
      }
      syms = std::move(next);
      if (stable) break;
    }

    // Start items for rules of length >= 2.
    for (RuleId r = 0; r < g_.rules().size(); ++r) {
      const auto& rule = g_.rule(r);
      if (rule.rhs.size() < 2) continue;
      const Entry& child = syms[rule.rhs[0]];
      if (child.inside == kNegInf) continue;
      Entry& it = items[item(r, 1)];
      it.inside = child.inside;
      for (std::size_t a = 0; a < child.best.size(); ++a)
        it.best.push_back({child.best[a].log_probability, r, -1, static_cast<int>(a)});
    }
  }

  const Pcfg& g_;
  std::span<const SymbolId> tokens_;
  std::size_t n_;
  std::size_t k_;
  std::size_t n_items_ = 0;
  std::vector<std::size_t> item_offset_;
  std::vector<RuleId> unary_;
  std::vector<std::vector<Entry>> symbols_;
  std::vector<std::vector<Entry>> items_;
};

}  // namespace

ParseResult parse(const Pcfg& g, std::span<const SymbolId> tokens, std::size_t top_k) {
  ParseResult result;
  result.log_inside_probability = kNegInf;
  if (tokens.empty() || top_k == 0) return result;
  for (SymbolId t : tokens)
    if (t >= g.symbols().size() || !g.is_terminal(t)) return result;

  Chart chart(g, tokens, top_k);
  chart.fill();
  const Entry& root = chart.symbol(0, tokens.size(), g.start());
  if (root.inside == kNegInf) return result;
  result.log_inside_probability = root.inside;
  result.inside_probability = std::exp(root.inside);
  for (std::size_t a = 0; a < root.best.size(); ++a) {
    ScoredTree st;
    st.tree = chart.build_symbol(0, tokens.size(), g.start(), static_cast<int>(a));
    const TreeProbability tp = tree_probability(st.tree, g);
    st.log_probability = tp.log_probability;
    st.probability = tp.probability;
    result.trees.push_back(std::move(st));
  }
  return result;
}

TargetProbability target_probability(const Pcfg& g, std::string_view text, std::size_t top_k) {
  const auto tokens = tokenize(text, g);
  const ParseResult r = parse(g, tokens, std::max<std::size_t>(top_k, 1));
  if (r.trees.empty()) throw NotInLanguageError("'" + std::string(text) + "' is not in the language of the grammar");
  TargetProbability out;
  out.probability = r.trees.front().probability;
  out.log_probability = r.trees.front().log_probability;
  out.tree = r.trees.front().tree;
  out.height = tree_height(out.tree);
  out.parses_found = r.trees.size();
  out.inside_probability = r.inside_probability;
  return out;
}

}  // namespace eqgram
