#include "eqgram/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace eqgram {

namespace {

// Accumulates the log probability and, alongside it, the plain product.
double accumulate_log_probability(const ParseTree& t, const Pcfg& g, double& product) {
  if (t.is_leaf()) {
    if (!g.is_terminal(t.label) || !t.children.empty())
      throw std::invalid_argument("tree leaf is not a terminal of the grammar");
    return 0.0;
  }
  const auto& rule = g.rule(*t.rule);
  if (rule.lhs != t.label || rule.rhs.size() != t.children.size())
    throw std::invalid_argument("tree node does not match its rule");
  double total = std::log(rule.probability);
  product *= rule.probability;
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    if (t.children[i].label != rule.rhs[i])
      throw std::invalid_argument("tree children do not match the rule right-hand side");
    total += accumulate_log_probability(t.children[i], g, product);
  }
  return total;
}

void collect_yield(const ParseTree& t, std::vector<SymbolId>& out) {
  if (t.is_leaf()) {
    out.push_back(t.label);
    return;
  }
  for (const auto& c : t.children) collect_yield(c, out);
}

void collect_signature(const ParseTree& t, std::string& out) {
  if (t.is_leaf()) return;
  // Variable-length encoding of the rule index.
  std::size_t r = *t.rule;
  do {
    unsigned char byte = r & 0x7f;
    r >>= 7;
    if (r) byte |= 0x80;
    out.push_back(static_cast<char>(byte));
  } while (r);
  for (const auto& c : t.children) collect_signature(c, out);
}

class Expander {
 public:
  Expander(const Pcfg& g, const std::function<double()>& draw, std::size_t budget)
      : g_(g), draw_(draw), budget_(budget) {}

  bool expand(SymbolId symbol, ParseTree& node) {
    node.label = symbol;
    if (g_.is_terminal(symbol)) {
      sentence.push_back(symbol);
      return true;
    }
    if (++expansions > budget_) return false;
    const auto rules = g_.rules_for(symbol);
    const double u = draw_();
    double cumulative = 0.0;
    RuleId chosen = rules.back();
    for (RuleId r : rules) {
      cumulative += g_.rule(r).probability;
      if (u < cumulative) {
        chosen = r;
        break;
      }
    }
    const auto& rule = g_.rule(chosen);
    node.rule = chosen;
    log_probability += std::log(rule.probability);
    node.children.resize(rule.rhs.size());
    for (std::size_t i = 0; i < rule.rhs.size(); ++i)
      if (!expand(rule.rhs[i], node.children[i])) return false;
    return true;
  }

  std::vector<SymbolId> sentence;
  double log_probability = 0.0;
  std::size_t expansions = 0;

 private:
  const Pcfg& g_;
  const std::function<double()>& draw_;
  std::size_t budget_;
};

}  // namespace

TreeProbability tree_probability(const ParseTree& t, const Pcfg& g) {
  double product = 1.0;
  const double lp = accumulate_log_probability(t, g, product);
  // The direct product is exact for dyadic rule probabilities; fall back to
  // the log domain once it leaves the normal range.
  if (std::isnormal(product)) return {product, lp};
  return {std::exp(lp), lp};
}

int tree_height(const ParseTree& t) {
  int h = 0;
  for (const auto& c : t.children) h = std::max(h, 1 + tree_height(c));
  return h;
}

std::vector<SymbolId> yield_symbols(const ParseTree& t) {
  std::vector<SymbolId> out;
  collect_yield(t, out);
  return out;
}

std::vector<std::string> yield(const ParseTree& t, const Pcfg& g) {
  std::vector<std::string> out;
  for (SymbolId s : yield_symbols(t)) out.push_back(g.symbol(s).name);
  return out;
}

std::size_t expansion_count(const ParseTree& t) {
  if (t.is_leaf()) return 0;
  std::size_t n = 1;
  for (const auto& c : t.children) n += expansion_count(c);
  return n;
}

std::string tree_signature(const ParseTree& t) {
  std::string out;
  collect_signature(t, out);
  return out;
}

namespace detail {

std::optional<SampleOutcome> generate_sample(const Pcfg& g, SymbolId root,
                                             const std::function<double()>& draw,
                                             std::size_t max_expansions) {
  if (root >= g.symbols().size() || g.is_terminal(root))
    throw std::invalid_argument("sampling root must be a nonterminal of the grammar");
  if (max_expansions < 1) throw std::invalid_argument("max_expansions must be at least 1");
  Expander expander(g, draw, max_expansions);
  SampleOutcome out;
  if (!expander.expand(root, out.tree)) return std::nullopt;
  out.sentence.reserve(expander.sentence.size());
  for (SymbolId s : expander.sentence) out.sentence.push_back(g.symbol(s).name);
  out.log_probability = expander.log_probability;
  out.expansions_used = expander.expansions;
  return out;
}

}  // namespace detail

SampleBatch sample_many(const Pcfg& g, std::size_t n, std::uint64_t master_seed,
                        std::size_t max_expansions, unsigned jobs) {
  constexpr std::uint64_t kMaxRetries = 1'000'000;
  SampleBatch batch;
  batch.samples.resize(n);
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<std::size_t> discards(jobs, 0);

  auto work = [&](unsigned worker) {
    const std::size_t begin = n * worker / jobs;
    const std::size_t end = n * (worker + 1) / jobs;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::uint64_t retry = 0;; ++retry) {
        if (retry >= kMaxRetries)
          throw std::runtime_error("expansion budget too small: no derivation fits after " +
                                   std::to_string(kMaxRetries) + " attempts");
        RandomStream stream(master_seed, i, retry);
        auto outcome = generate_sample(g, g.start(), stream, max_expansions);
        if (outcome) {
          batch.samples[i] = std::move(*outcome);
          break;
        }
        ++discards[worker];
      }
    }
  };

  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (unsigned w = 0; w < jobs; ++w) threads.emplace_back(work, w);
  }
  for (auto d : discards) batch.discarded += d;
  return batch;
}

}  // namespace eqgram
