#include "eqgram/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "eqgram/analytics.hpp"

namespace eqgram {

GrammarError::GrammarError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(line ? what + " (line " + std::to_string(line) + ", column " +
                                    std::to_string(column) + ")"
                              : what),
      line_(line),
      column_(column) {}

Pcfg::Pcfg(std::vector<GrammarSymbol> symbols, std::vector<ProductionRule> rules, SymbolId start)
    : symbols_(std::move(symbols)), rules_(std::move(rules)), start_(start) {
  if (start_ >= symbols_.size() || symbols_[start_].kind != SymbolKind::nonterminal)
    throw GrammarError("start symbol must be a declared nonterminal");
  std::set<std::string> terminal_names, nonterminal_names;
  for (const auto& s : symbols_) {
    if (s.name.empty()) throw GrammarError("symbol names must be non-empty");
    auto& own = s.kind == SymbolKind::terminal ? terminal_names : nonterminal_names;
    const auto& other = s.kind == SymbolKind::terminal ? nonterminal_names : terminal_names;
    if (!own.insert(s.name).second) throw GrammarError("duplicate symbol '" + s.name + "'");
    if (other.contains(s.name))
      throw GrammarError("'" + s.name + "' is declared both as terminal and nonterminal");
  }
  by_lhs_.resize(symbols_.size());
  for (RuleId r = 0; r < rules_.size(); ++r) {
    const auto& rule = rules_[r];
    if (rule.lhs >= symbols_.size() || symbols_[rule.lhs].kind != SymbolKind::nonterminal)
      throw GrammarError("rule left-hand side must be a nonterminal");
    if (rule.rhs.empty())
      throw GrammarError("empty production for '" + symbols_[rule.lhs].name + "'");
    for (SymbolId s : rule.rhs)
      if (s >= symbols_.size()) throw GrammarError("rule refers to an undeclared symbol");
    if (!(rule.probability > 0.0 && rule.probability <= 1.0))
      throw GrammarError("rule probability for '" + symbols_[rule.lhs].name +
                         "' must lie in (0, 1]");
    by_lhs_[rule.lhs].push_back(r);
  }
}

std::optional<SymbolId> Pcfg::find(std::string_view name) const {
  for (SymbolId i = 0; i < symbols_.size(); ++i)
    if (symbols_[i].name == name) return i;
  return std::nullopt;
}

std::optional<SymbolId> Pcfg::find(std::string_view name, SymbolKind kind) const {
  for (SymbolId i = 0; i < symbols_.size(); ++i)
    if (symbols_[i].kind == kind && symbols_[i].name == name) return i;
  return std::nullopt;
}

std::vector<SymbolId> Pcfg::terminals() const {
  std::vector<SymbolId> out;
  for (SymbolId i = 0; i < symbols_.size(); ++i)
    if (symbols_[i].kind == SymbolKind::terminal) out.push_back(i);
  return out;
}

std::vector<SymbolId> Pcfg::nonterminals() const {
  std::vector<SymbolId> out;
  for (SymbolId i = 0; i < symbols_.size(); ++i)
    if (symbols_[i].kind == SymbolKind::nonterminal) out.push_back(i);
  return out;
}

bool Pcfg::equivalent(const Pcfg& other, double tolerance) const {
  auto names = [](const Pcfg& g, SymbolKind kind) {
    std::set<std::string> out;
    for (const auto& s : g.symbols())
      if (s.kind == kind) out.insert(s.name);
    return out;
  };
  if (names(*this, SymbolKind::terminal) != names(other, SymbolKind::terminal)) return false;
  if (names(*this, SymbolKind::nonterminal) != names(other, SymbolKind::nonterminal)) return false;
  if (symbol(start_).name != other.symbol(other.start()).name) return false;
  for (SymbolId a : nonterminals()) {
    SymbolId b = *other.find(symbol(a).name, SymbolKind::nonterminal);
    auto ra = rules_for(a);
    auto rb = other.rules_for(b);
    if (ra.size() != rb.size()) return false;
    for (std::size_t i = 0; i < ra.size(); ++i) {
      const auto& x = rule(ra[i]);
      const auto& y = other.rule(rb[i]);
      if (x.rhs.size() != y.rhs.size()) return false;
      for (std::size_t k = 0; k < x.rhs.size(); ++k) {
        const auto& sx = symbol(x.rhs[k]);
        const auto& sy = other.symbol(y.rhs[k]);
        if (sx.name != sy.name || sx.kind != sy.kind) return false;
      }
      if (std::abs(x.probability - y.probability) > tolerance) return false;
    }
  }
  return true;
}

SymbolId PcfgBuilder::intern(std::string_view name, SymbolKind kind) {
  for (SymbolId i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].name != name) continue;
    if (symbols_[i].kind != kind)
      throw GrammarError("'" + std::string(name) + "' is declared both as terminal and nonterminal");
    return i;
  }
  symbols_.push_back({std::string(name), kind});
  return static_cast<SymbolId>(symbols_.size() - 1);
}

SymbolId PcfgBuilder::terminal(std::string_view name) { return intern(name, SymbolKind::terminal); }
SymbolId PcfgBuilder::nonterminal(std::string_view name) {
  return intern(name, SymbolKind::nonterminal);
}

PcfgBuilder& PcfgBuilder::rule(SymbolId lhs, std::vector<SymbolId> rhs, double probability) {
  rules_.push_back({lhs, std::move(rhs), probability});
  return *this;
}

PcfgBuilder& PcfgBuilder::start(SymbolId s) {
  start_ = s;
  return *this;
}

Pcfg PcfgBuilder::build() const {
  if (!start_) {
    if (rules_.empty()) throw GrammarError("grammar has no rules and no start symbol");
    return Pcfg(symbols_, rules_, rules_.front().lhs);
  }
  return Pcfg(symbols_, rules_, *start_);
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate(const Pcfg& g, int coverage_horizon) {
  ValidationReport report;
  report.coverage_horizon = coverage_horizon;
  const auto nts = g.nonterminals();

  for (SymbolId a : nts) {
    auto rules = g.rules_for(a);
    const auto& name = g.symbol(a).name;
    if (rules.empty()) {
      report.violations.push_back(
          {ViolationKind::dead_nonterminal, name, "nonterminal '" + name + "' has no rules"});
      continue;
    }
    double sum = 0.0;
    for (RuleId r : rules) sum += g.rule(r).probability;
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", sum);
      report.violations.push_back({ViolationKind::probability_sum, name,
                                   "rule probabilities for '" + name + "' sum to " + buf});
    }
  }

  std::vector<bool> reachable(g.symbols().size(), false);
  std::vector<SymbolId> stack{g.start()};
  reachable[g.start()] = true;
  while (!stack.empty()) {
    SymbolId a = stack.back();
    stack.pop_back();
    for (RuleId r : g.rules_for(a))
      for (SymbolId s : g.rule(r).rhs)
        if (!reachable[s]) {
          reachable[s] = true;
          stack.push_back(s);
        }
  }

  std::vector<bool> productive(g.symbols().size(), false);
  for (SymbolId t : g.terminals()) productive[t] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& rule : g.rules()) {
      if (productive[rule.lhs]) continue;
      if (std::all_of(rule.rhs.begin(), rule.rhs.end(), [&](SymbolId s) { return productive[s]; })) {
        productive[rule.lhs] = true;
        changed = true;
      }
    }
  }

  for (SymbolId a : nts) {
    const auto& name = g.symbol(a).name;
    if (!reachable[a])
      report.violations.push_back({ViolationKind::unreachable_nonterminal, name,
                                   "nonterminal '" + name + "' is unreachable from the start"});
    if (!productive[a] && !g.rules_for(a).empty())
      report.violations.push_back({ViolationKind::unproductive_nonterminal, name,
                                   "nonterminal '" + name + "' derives no terminal string"});
  }

  const auto cov = coverage_table(g, coverage_horizon);
  const auto& series = cov.at(g.start());
  for (int h = 1; h <= coverage_horizon; ++h) {
    if (series[h] + 1e-12 < series[h - 1]) {
      report.violations.push_back({ViolationKind::coverage_decreasing, g.symbol(g.start()).name,
                                   "coverage decreases at height " + std::to_string(h)});
      break;
    }
  }
  report.coverage_at_horizon = series[coverage_horizon];
  return report;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

struct RawAlternative {
  struct Item {
    std::string name;
    bool quoted;
    std::size_t column;
  };
  std::vector<Item> items;
  std::optional<double> probability;
  std::size_t column;
};

struct RawGroup {
  std::string lhs;
  std::size_t line;
  std::size_t column;
  std::vector<RawAlternative> alternatives;
};

bool is_name_char(char c) {
  return !(std::isspace(static_cast<unsigned char>(c)) || c == '\'' || c == '[' || c == ']' ||
           c == '|' || c == '#' || c == ':');
}

class LineLexer {
 public:
  LineLexer(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip_space();
    return pos_ >= text_.size() || text_[pos_] == '#';
  }
  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }
  bool consume(std::string_view token) {
    skip_space();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }
  std::size_t column() const { return pos_ + 1; }

  [[noreturn]] void fail(const std::string& message) const {
    throw GrammarError("grammar syntax error: " + message, line_, column());
  }

  std::string name() {
    skip_space();
    std::size_t begin = pos_;
    while (pos_ < text_.size() && is_name_char(text_[pos_])) {
      if (text_.substr(pos_, 2) == "->") break;
      ++pos_;
    }
    if (pos_ == begin) fail("expected a symbol name");
    return std::string(text_.substr(begin, pos_ - begin));
  }

  std::string quoted() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '\'') fail("expected a quoted terminal");
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) fail("unterminated terminal literal");
      char c = text_[pos_++];
      if (c == '\'') break;
      if (c == '\\') {
        if (pos_ >= text_.size()) fail("dangling escape");
        c = text_[pos_++];
      }
      out.push_back(c);
    }
    if (out.empty()) fail("empty terminal literal");
    return out;
  }

  double number() {
    skip_space();
    double value = 0.0;
    auto first = text_.data() + pos_;
    auto last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) fail("expected a probability literal");
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  std::string_view rest() {
    skip_space();
    auto r = text_.substr(pos_);
    auto hash = r.find('#');
    if (hash != std::string_view::npos) r = r.substr(0, hash);
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.remove_suffix(1);
    pos_ = text_.size();
    return r;
  }

 private:
  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string format_probability(double p) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  // Prefer the shortest representation that round-trips.
  for (int precision = 1; precision <= 17; ++precision) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", precision, p);
    double back = 0.0;
    std::from_chars(shorter, shorter + std::strlen(shorter), back);
    if (back == p) return shorter;
  }
  return buf;
}

std::string quote_terminal(const std::string& name) {
  std::string out = "'";
  for (char c : name) {
    if (c == '\'' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

}  // namespace

Pcfg parse_grammar(std::string_view text) {
  std::vector<RawGroup> groups;
  std::optional<std::pair<std::string, std::size_t>> start_name;
  bool normalize = false;

  std::size_t line_no = 0;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(begin, end - begin);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    begin = end + 1;

    LineLexer lex(line, line_no);
    if (lex.at_end()) continue;
    std::size_t head_column = lex.column();
    std::string head = lex.name();
    if (lex.consume(":")) {
      auto value = lex.rest();
      if (head == "start") {
        if (value.empty()) lex.fail("start directive needs a nonterminal");
        start_name = {std::string(value), line_no};
      } else if (head == "normalize") {
        if (value == "true")
          normalize = true;
        else if (value == "false")
          normalize = false;
        else
          lex.fail("normalize expects true or false");
      } else {
        lex.fail("unknown directive '" + head + "'");
      }
      continue;
    }
    if (!lex.consume("->")) lex.fail("expected '->' after '" + head + "'");

    RawGroup group{head, line_no, head_column, {}};
    while (true) {
      RawAlternative alt;
      alt.column = lex.column();
      while (!lex.at_end() && lex.peek() != '[' && lex.peek() != '|') {
        if (lex.peek() == '\'') {
          std::size_t col = lex.column();
          alt.items.push_back({lex.quoted(), true, col});
        } else {
          std::size_t col = lex.column();
          alt.items.push_back({lex.name(), false, col});
        }
      }
      if (alt.items.empty()) lex.fail("empty alternative (epsilon productions are not allowed)");
      if (lex.consume("[")) {
        alt.probability = lex.number();
        if (!lex.consume("]")) lex.fail("expected ']'");
      }
      group.alternatives.push_back(std::move(alt));
      if (lex.at_end()) break;
      if (!lex.consume("|")) lex.fail("expected '|' or end of line");
    }
    groups.push_back(std::move(group));
  }

  if (groups.empty()) throw GrammarError("grammar has no rules");

  PcfgBuilder builder;
  std::map<std::string, SymbolId> nonterminals;
  for (const auto& g : groups)
    if (!nonterminals.contains(g.lhs)) nonterminals[g.lhs] = builder.nonterminal(g.lhs);

  std::map<std::string, double> weight_sums;
  for (const auto& g : groups)
    for (const auto& alt : g.alternatives) {
      if (!alt.probability) {
        if (!normalize)
          throw GrammarError("missing probability for alternative of '" + g.lhs + "'", g.line,
                             alt.column);
        weight_sums[g.lhs] += 1.0;
        continue;
      }
      double p = *alt.probability;
      if (!std::isfinite(p) || p <= 0.0 || (!normalize && p > 1.0))
        throw GrammarError("probability out of range for '" + g.lhs + "'", g.line, alt.column);
      weight_sums[g.lhs] += p;
    }

  for (const auto& g : groups) {
    SymbolId lhs = nonterminals.at(g.lhs);
    for (const auto& alt : g.alternatives) {
      std::vector<SymbolId> rhs;
      for (const auto& item : alt.items) {
        if (item.quoted) {
          if (nonterminals.contains(item.name))
            throw GrammarError("'" + item.name + "' is declared both as terminal and nonterminal",
                               g.line, item.column);
          rhs.push_back(builder.terminal(item.name));
        } else {
          auto it = nonterminals.find(item.name);
          if (it == nonterminals.end())
            throw GrammarError("undeclared symbol '" + item.name +
                                   "' (terminals must be single-quoted)",
                               g.line, item.column);
          rhs.push_back(it->second);
        }
      }
      double p = alt.probability.value_or(1.0);
      if (normalize) p /= weight_sums.at(g.lhs);
      builder.rule(lhs, std::move(rhs), p);
    }
  }

  if (start_name) {
    auto it = nonterminals.find(start_name->first);
    if (it == nonterminals.end())
      throw GrammarError("start symbol '" + start_name->first + "' has no rules",
                         start_name->second, 1);
    builder.start(it->second);
  } else {
    builder.start(nonterminals.at(groups.front().lhs));
  }

  Pcfg g = builder.build();
  auto report = validate(g);
  if (!report.valid()) {
    std::string message = "invalid grammar:";
    for (const auto& v : report.violations) message += " " + v.message + ";";
    message.pop_back();
    throw GrammarError(message);
  }
  return g;
}

Pcfg load_grammar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GrammarError("cannot open grammar file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_grammar(buffer.str());
}

std::string render_grammar(const Pcfg& g) {
  std::ostringstream out;
  out << "start: " << g.symbol(g.start()).name << '\n';
  for (SymbolId a : g.nonterminals()) {
    auto rules = g.rules_for(a);
    if (rules.empty()) continue;
    out << g.symbol(a).name << " ->";
    bool first = true;
    for (RuleId r : rules) {
      if (!first) out << " |";
      first = false;
      for (SymbolId s : g.rule(r).rhs) {
        const auto& sym = g.symbol(s);
        out << ' ' << (sym.kind == SymbolKind::terminal ? quote_terminal(sym.name) : sym.name);
      }
      out << " [" << format_probability(g.rule(r).probability) << ']';
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Parameterized grammars

namespace {

std::string variable_name(int index) {
  static constexpr std::string_view letters = "xyzabdefghijklmnopqrstuvw";
  if (index < static_cast<int>(letters.size())) return std::string(1, letters[index]);
  return "v" + std::to_string(index);
}

}  // namespace

Pcfg linear_grammar(int n_vars, double p) {
  if (n_vars < 1 || n_vars > 26) throw GrammarError("linear grammar needs 1..26 variables");
  std::vector<std::string> names;
  for (int i = 0; i < n_vars; ++i) names.push_back(variable_name(i));
  return linear_grammar(names, p);
}

Pcfg linear_grammar(std::span<const std::string> variables, double p) {
  if (variables.empty()) throw GrammarError("linear grammar needs at least one variable");
  if (!(p > 0.0 && p < 1.0)) throw GrammarError("linear grammar recursion probability must lie in (0, 1)");
  PcfgBuilder b;
  SymbolId E = b.nonterminal("E");
  SymbolId V = b.nonterminal("V");
  SymbolId plus = b.terminal("+");
  b.rule(E, {E, plus, V}, p).rule(E, {V}, 1.0 - p);
  const double q = 1.0 / static_cast<double>(variables.size());
  for (const auto& name : variables) b.rule(V, {b.terminal(name)}, q);
  b.start(E);
  return b.build();
}

namespace {

/// Splits `mass` between two alternatives whose baseline weights are
/// `weight_a` and `weight_b`, scaling the a:b ratio by `ratio`.
std::pair<double, double> split(double mass, double weight_a, double weight_b, double ratio) {
  const double a = weight_a * ratio;
  const double total = a + weight_b;
  return {mass * (a / total), mass * (weight_b / total)};
}

}  // namespace

Pcfg universal_grammar(std::span<const std::string> variables, const BiasRatios& ratios,
                       const StructuralProbs& s) {
  static const std::set<std::string> reserved = {"E",   "F",   "T",    "R",   "V",   "c",
                                                 "+",   "-",   "*",    "/",   "(",   ")",
                                                 "sin", "cos", "sqrt", "exp"};
  if (variables.empty()) throw GrammarError("universal grammar needs at least one variable");
  std::set<std::string> seen;
  for (const auto& v : variables) {
    if (v.empty()) throw GrammarError("variable names must be non-empty");
    if (reserved.contains(v))
      throw GrammarError("variable name '" + v + "' collides with a reserved grammar symbol");
    if (!seen.insert(v).second) throw GrammarError("duplicate variable '" + v + "'");
  }
  for (double r : {ratios.r_sum, ratios.r_mul, ratios.r_const, ratios.r_funct})
    if (!(r > 0.0) || !std::isfinite(r)) throw GrammarError("bias ratios must be positive and finite");

  const auto [p_plus, p_minus] = split(s.p_recurse_E, 1.0, 1.0, ratios.r_sum);
  const auto [p_times, p_div] = split(s.p_recurse_F, 1.0, 1.0, ratios.r_mul);
  const auto [p_const, p_var] = split(s.p_V + s.p_c, s.p_c, s.p_V, ratios.r_const);
  const auto [p_funcs, p_paren] = split(1.0, 1.0 - s.p_paren, s.p_paren, ratios.r_funct);
  const double p_func = p_funcs / 4.0;

  const double probabilities[] = {p_plus, p_minus, 1.0 - s.p_recurse_E, p_times, p_div,
                                  1.0 - s.p_recurse_F, s.p_R, p_var, p_const, p_paren, p_func};
  for (double p : probabilities)
    if (!(p > 0.0 && p < 1.0))
      throw GrammarError("infeasible universal grammar: a rule probability falls outside (0, 1)");
  if (std::abs(s.p_R + s.p_V + s.p_c - 1.0) > kProbabilitySumTolerance)
    throw GrammarError("infeasible universal grammar: p_R + p_V + p_c must equal 1");

  PcfgBuilder b;
  SymbolId E = b.nonterminal("E"), F = b.nonterminal("F"), T = b.nonterminal("T"),
           R = b.nonterminal("R"), V = b.nonterminal("V");
  SymbolId plus = b.terminal("+"), minus = b.terminal("-"), times = b.terminal("*"),
           div = b.terminal("/"), lp = b.terminal("("), rp = b.terminal(")"),
           c = b.terminal(kConstantSymbol);

  b.rule(E, {E, plus, F}, p_plus).rule(E, {E, minus, F}, p_minus).rule(E, {F}, 1.0 - s.p_recurse_E);
  b.rule(F, {F, times, T}, p_times).rule(F, {F, div, T}, p_div).rule(F, {T}, 1.0 - s.p_recurse_F);
  b.rule(T, {R}, s.p_R).rule(T, {V}, p_var).rule(T, {c}, p_const);
  b.rule(R, {lp, E, rp}, p_paren);
  for (std::string_view fn : {"sin", "cos", "sqrt", "exp"})
    b.rule(R, {b.terminal(fn), lp, E, rp}, p_func);
  const double q = 1.0 / static_cast<double>(variables.size());
  for (const auto& v : variables) b.rule(V, {b.terminal(v)}, q);
  b.start(E);
  return b.build();
}

}  // namespace eqgram
