#include "eqgram/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace eqgram {

// ---------------------------------------------------------------- Number

double Number::to_double() const {
  if (const auto* d = std::get_if<double>(&value_)) return *d;
  return std::get<BigRational>(value_).convert_to<double>();
}

int Number::sign() const {
  if (const auto* d = std::get_if<double>(&value_)) return *d > 0 ? 1 : (*d < 0 ? -1 : 0);
  return std::get<BigRational>(value_).sign();
}

bool Number::is_one() const {
  if (const auto* d = std::get_if<double>(&value_)) return *d == 1.0;
  return std::get<BigRational>(value_) == 1;
}

bool Number::is_nan() const {
  const auto* d = std::get_if<double>(&value_);
  return d && std::isnan(*d);
}

bool Number::is_integer() const {
  if (const auto* d = std::get_if<double>(&value_)) return std::isfinite(*d) && std::floor(*d) == *d;
  return boost::multiprecision::denominator(std::get<BigRational>(value_)) == 1;
}

Number Number::operator-() const {
  if (is_exact()) return Number(BigRational(-rational()));
  return Number(-std::get<double>(value_));
}

Number operator+(const Number& a, const Number& b) {
  if (a.is_exact() && b.is_exact()) return Number(BigRational(a.rational() + b.rational()));
  return Number(a.to_double() + b.to_double());
}

Number operator*(const Number& a, const Number& b) {
  if (a.is_exact() && b.is_exact()) return Number(BigRational(a.rational() * b.rational()));
  return Number(a.to_double() * b.to_double());
}

Number Number::pow(int exponent) const {
  if (exponent == 0) return Number(1LL);
  if (!is_exact()) return Number(std::pow(to_double(), exponent));
  const BigRational& r = rational();
  if (r == 0) return exponent > 0 ? Number(0LL) : Number(std::numeric_limits<double>::infinity());
  const unsigned k = static_cast<unsigned>(exponent < 0 ? -exponent : exponent);
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  const auto bits = std::max(boost::multiprecision::msb(boost::multiprecision::abs(num)), boost::multiprecision::msb(den)) + 1;
  if (bits * k > 4096) return Number(std::pow(to_double(), exponent));
  BigInt pn = boost::multiprecision::pow(num, k);
  BigInt pd = boost::multiprecision::pow(den, k);
  if (exponent < 0) std::swap(pn, pd);
  if (pd < 0) {
    pn = -pn;
    pd = -pd;
  }
  return Number(BigRational(pn, pd));
}

std::string Number::str() const {
  if (is_exact()) {
    const BigRational& r = rational();
    const BigInt den = boost::multiprecision::denominator(r);
    if (den == 1) return boost::multiprecision::numerator(r).str();
    return boost::multiprecision::numerator(r).str() + "/" + den.str();
  }
  const double v = std::get<double>(value_);
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int Number::compare(const Number& a, const Number& b) {
  if (a.is_exact() && b.is_exact()) {
    if (a.rational() < b.rational()) return -1;
    return a.rational() > b.rational() ? 1 : 0;
  }
  const double x = a.to_double(), y = b.to_double();
  const bool nx = std::isnan(x), ny = std::isnan(y);
  if (nx || ny) return nx == ny ? 0 : (nx ? 1 : -1);
  if (x < y) return -1;
  if (x > y) return 1;
  if (a.is_exact() != b.is_exact()) return a.is_exact() ? -1 : 1;
  return 0;
}

// ------------------------------------------------------------- functions

namespace {
constexpr std::pair<FunctionKind, std::string_view> kFunctionNames[] = {
    {FunctionKind::sin, "sin"},   {FunctionKind::cos, "cos"},   {FunctionKind::sqrt, "sqrt"},
    {FunctionKind::exp, "exp"},   {FunctionKind::tanh, "tanh"}, {FunctionKind::arcsin, "arcsin"},
    {FunctionKind::log, "log"},
};
}  // namespace

std::string_view function_name(FunctionKind f) {
  for (const auto& [k, name] : kFunctionNames)
    if (k == f) return name;
  return "?";
}

std::optional<FunctionKind> function_from_name(std::string_view name) {
  for (const auto& [k, n] : kFunctionNames)
    if (n == name) return k;
  if (name == "asin") return FunctionKind::arcsin;
  if (name == "ln") return FunctionKind::log;
  return std::nullopt;
}

double apply_function(FunctionKind f, double x) {
  switch (f) {
    case FunctionKind::sin: return std::sin(x);
    case FunctionKind::cos: return std::cos(x);
    case FunctionKind::sqrt: return std::sqrt(x);
    case FunctionKind::exp: return std::exp(x);
    case FunctionKind::tanh: return std::tanh(x);
    case FunctionKind::arcsin: return std::asin(x);
    case FunctionKind::log: return std::log(x);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// ------------------------------------------------------------ Expression

Expression::Expression() : node_(std::make_shared<const ExprNode>(ExprNode{Literal{Number(0LL)}})) {}

Expression Expression::variable(std::string name) {
  return Expression(std::make_shared<const ExprNode>(ExprNode{Variable{std::move(name)}}));
}

Expression Expression::parameter(int index) {
  return Expression(std::make_shared<const ExprNode>(ExprNode{Parameter{index}}));
}

Expression Expression::literal(Number value) {
  return Expression(std::make_shared<const ExprNode>(ExprNode{Literal{std::move(value)}}));
}

Expression Expression::sum(std::vector<Term> terms) {
  return Expression(std::make_shared<const ExprNode>(ExprNode{Sum{std::move(terms)}}));
}

Expression Expression::product(std::vector<Factor> factors) {
  return Expression(std::make_shared<const ExprNode>(ExprNode{Product{std::move(factors)}}));
}

Expression Expression::function(FunctionKind f, Expression argument) {
  return Expression(std::make_shared<const ExprNode>(ExprNode{Function{f, std::move(argument)}}));
}

Expression Expression::add(Expression a, Expression b) { return sum({{1, std::move(a)}, {1, std::move(b)}}); }

Expression Expression::subtract(Expression a, Expression b) {
  return sum({{1, std::move(a)}, {-1, std::move(b)}});
}

Expression Expression::multiply(Expression a, Expression b) {
  return product({{std::move(a), 1}, {std::move(b), 1}});
}

Expression Expression::divide(Expression a, Expression b) {
  return product({{std::move(a), 1}, {std::move(b), -1}});
}

Expression Expression::negate(Expression a) { return sum({{-1, std::move(a)}}); }

Expression Expression::power(Expression base, int exponent) {
  if (exponent == 0) return literal(Number(1LL));
  return product({{std::move(base), exponent}});
}

ExpressionSyntaxError::ExpressionSyntaxError(const std::string& message, std::size_t position)
    : ExpressionError(message + " at position " + std::to_string(position)), position_(position) {}

// ------------------------------------------------------------- rendering

namespace {

int rank(const Expression& e) { return static_cast<int>(e.node().value.index()); }

bool is_negative_literal(const Expression& e) {
  const auto* l = as<Literal>(e);
  return l && l->value.sign() < 0;
}

bool is_fraction_literal(const Expression& e) {
  const auto* l = as<Literal>(e);
  return l && l->value.is_exact() && !l->value.is_integer();
}

void render_into(const Expression& e, bool anonymous, std::string& out);

std::string render_string(const Expression& e, bool anonymous) {
  std::string s;
  render_into(e, anonymous, s);
  return s;
}

void render_factor(const Expression& base, int exponent, bool leading, bool anonymous, std::string& out) {
  const int magnitude = exponent < 0 ? -exponent : exponent;
  const bool wrap = as<Sum>(base) || as<Product>(base) ||
                    (is_negative_literal(base) && (!leading || magnitude != 1 || exponent < 0)) ||
                    (is_fraction_literal(base) && (!leading || magnitude != 1 || exponent < 0));
  if (wrap) out += '(';
  render_into(base, anonymous, out);
  if (wrap) out += ')';
  if (magnitude != 1) out += '^' + std::to_string(magnitude);
}

void render_into(const Expression& e, bool anonymous, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>) {
          out += n.value.str();
        } else if constexpr (std::is_same_v<T, Parameter>) {
          out += 'C';
          if (!anonymous) out += std::to_string(n.index);
        } else if constexpr (std::is_same_v<T, Variable>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, Function>) {
          out += function_name(n.kind);
          out += '(';
          render_into(n.argument, anonymous, out);
          out += ')';
        } else if constexpr (std::is_same_v<T, Sum>) {
          bool first = true;
          for (const auto& term : n.terms) {
            std::string s = render_string(term.expr, anonymous);
            if (as<Sum>(term.expr) || (!first && !s.empty() && s[0] == '-')) s = "(" + s + ")";
            const int magnitude = term.coefficient < 0 ? -term.coefficient : term.coefficient;
            if (magnitude != 1) s = std::to_string(magnitude) + "*" + s;
            if (term.coefficient < 0) {
              out += '-';
            } else if (!first) {
              out += '+';
            }
            out += s;
            first = false;
          }
        } else if constexpr (std::is_same_v<T, Product>) {
          bool any_numerator = false;
          for (const auto& f : n.factors) {
            if (f.exponent <= 0) continue;
            if (any_numerator) out += '*';
            render_factor(f.base, f.exponent, !any_numerator, anonymous, out);
            any_numerator = true;
          }
          if (!any_numerator) out += '1';
          for (const auto& f : n.factors) {
            if (f.exponent >= 0) continue;
            out += '/';
            render_factor(f.base, f.exponent, false, anonymous, out);
          }
        }
      },
      e.node().value);
}

}  // namespace

std::string render(const Expression& e) { return render_string(e, false); }

// -------------------------------------------------------- canonicalization

namespace {

bool contains_parameter(const Expression& e) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Parameter>) {
          return true;
        } else if constexpr (std::is_same_v<T, Function>) {
          return contains_parameter(n.argument);
        } else if constexpr (std::is_same_v<T, Sum>) {
          return std::any_of(n.terms.begin(), n.terms.end(),
                             [](const auto& t) { return contains_parameter(t.expr); });
        } else if constexpr (std::is_same_v<T, Product>) {
          return std::any_of(n.factors.begin(), n.factors.end(),
                             [](const auto& f) { return contains_parameter(f.base); });
        } else {
          return false;
        }
      },
      e.node().value);
}

bool contains_variable(const Expression& e) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          return true;
        } else if constexpr (std::is_same_v<T, Function>) {
          return contains_variable(n.argument);
        } else if constexpr (std::is_same_v<T, Sum>) {
          return std::any_of(n.terms.begin(), n.terms.end(),
                             [](const auto& t) { return contains_variable(t.expr); });
        } else if constexpr (std::is_same_v<T, Product>) {
          return std::any_of(n.factors.begin(), n.factors.end(),
                             [](const auto& f) { return contains_variable(f.base); });
        } else {
          return false;
        }
      },
      e.node().value);
}

/// Operand order. Parameters compare equal so ordering ignores numbering.
int compare(const Expression& a, const Expression& b) {
  if (rank(a) != rank(b)) return rank(a) < rank(b) ? -1 : 1;
  return std::visit(
      [&](const auto& x) -> int {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node().value);
        if constexpr (std::is_same_v<T, Literal>) {
          return Number::compare(x.value, y.value);
        } else if constexpr (std::is_same_v<T, Parameter>) {
          return 0;
        } else if constexpr (std::is_same_v<T, Variable>) {
          return x.name < y.name ? -1 : (x.name > y.name ? 1 : 0);
        } else if constexpr (std::is_same_v<T, Function>) {
          const auto nx = function_name(x.kind), ny = function_name(y.kind);
          if (nx != ny) return nx < ny ? -1 : 1;
          return compare(x.argument, y.argument);
        } else if constexpr (std::is_same_v<T, Product>) {
          const std::size_t n = std::min(x.factors.size(), y.factors.size());
          for (std::size_t i = 0; i < n; ++i) {
            if (int c = compare(x.factors[i].base, y.factors[i].base)) return c;
            if (x.factors[i].exponent != y.factors[i].exponent)
              return x.factors[i].exponent < y.factors[i].exponent ? -1 : 1;
          }
          return x.factors.size() == y.factors.size() ? 0 : (x.factors.size() < y.factors.size() ? -1 : 1);
        } else {
          const std::size_t n = std::min(x.terms.size(), y.terms.size());
          for (std::size_t i = 0; i < n; ++i) {
            if (int c = compare(x.terms[i].expr, y.terms[i].expr)) return c;
            if (x.terms[i].coefficient != y.terms[i].coefficient)
              return x.terms[i].coefficient < y.terms[i].coefficient ? -1 : 1;
          }
          return x.terms.size() == y.terms.size() ? 0 : (x.terms.size() < y.terms.size() ? -1 : 1);
        }
      },
      a.node().value);
}

using FactorList = std::vector<Expression::Factor>;
using TermList = std::vector<std::pair<Number, Expression>>;

constexpr std::size_t kMaxExpandedTerms = 64;

// Set for the duration of one canonicalize() call.
thread_local bool expand_products = true;

Expression canon(const Expression& e);
Expression canon_product(const FactorList& input);

FactorList factors_of(const Expression& e) {
  if (const auto* p = as<Product>(e)) return p->factors;
  return {{e, 1}};
}

Expression canon_sum(const TermList& input) {
  struct Group {
    Number literal{0LL};
    bool parameter = false;
    std::optional<Expression> rest;
  };
  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;

  for (const auto& [coefficient, t] : input) {
    Number lit = coefficient;
    bool param = false;
    std::optional<Expression> rest;
    if (const auto* l = as<Literal>(t)) {
      lit = lit * l->value;
    } else if (as<Parameter>(t)) {
      param = true;
    } else if (const auto* p = as<Product>(t);
               p && !p->factors.empty() && p->factors[0].exponent == 1 &&
               (as<Literal>(p->factors[0].base) || as<Parameter>(p->factors[0].base))) {
      if (const auto* l0 = as<Literal>(p->factors[0].base)) {
        lit = lit * l0->value;
      } else {
        param = true;
      }
      FactorList remaining(p->factors.begin() + 1, p->factors.end());
      if (remaining.size() == 1 && remaining[0].exponent == 1) {
        rest = remaining[0].base;
      } else {
        rest = Expression::product(std::move(remaining));
      }
    } else {
      rest = t;
    }

    std::string key;
    if (rest) {
      key = render_string(*rest, true);
      if (contains_parameter(*rest)) key += "#" + std::to_string(groups.size());
    }
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, groups.size());
      groups.push_back(Group{param ? Number(0LL) : lit, param, rest});
    } else {
      Group& g = groups[it->second];
      g.parameter = g.parameter || param;
      if (!param) g.literal = g.literal + lit;
    }
  }

  std::vector<std::pair<int, Expression>> terms;
  for (const auto& g : groups) {
    if (!g.rest) {
      if (g.parameter) {
        terms.emplace_back(1, Expression::parameter(0));
      } else if (g.literal.is_nan()) {
        terms.emplace_back(1, Expression::literal(g.literal));
      } else if (!g.literal.is_zero()) {
        terms.emplace_back(g.literal.sign(), Expression::literal(g.literal.abs()));
      }
      continue;
    }
    FactorList fs = factors_of(*g.rest);
    if (g.parameter) {
      fs.insert(fs.begin(), {Expression::parameter(0), 1});
      terms.emplace_back(1, canon_product(fs));
      continue;
    }
    if (g.literal.is_zero()) continue;
    const int s = g.literal.is_nan() ? 1 : g.literal.sign();
    const Number magnitude = g.literal.is_nan() ? g.literal : g.literal.abs();
    if (magnitude.is_one()) {
      terms.emplace_back(s, *g.rest);
    } else {
      fs.insert(fs.begin(), {Expression::literal(magnitude), 1});
      terms.emplace_back(s, canon_product(fs));
    }
  }

  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    const int c = compare(a.second, b.second);
    return c != 0 ? c < 0 : a.first < b.first;
  });

  if (terms.empty()) return Expression::literal(Number(0LL));
  if (terms.size() == 1) {
    if (terms[0].first > 0) return terms[0].second;
    FactorList fs = factors_of(terms[0].second);
    fs.insert(fs.begin(), {Expression::literal(Number(-1LL)), 1});
    return canon_product(fs);
  }
  std::vector<Expression::Term> out;
  out.reserve(terms.size());
  for (auto& [s, e] : terms) out.push_back({s, std::move(e)});
  return Expression::sum(std::move(out));
}

/// Multiplies out sums raised to positive powers. Returns nullopt if the
/// expansion would exceed kMaxExpandedTerms terms.
std::optional<Expression> expand(const Number& literal, const FactorList& factors) {
  std::vector<std::pair<Number, FactorList>> monomials{{literal, {}}};
  for (const auto& f : factors) {
    const auto* s = as<Sum>(f.base);
    if (!s || f.exponent < 0) {
      for (auto& m : monomials) m.second.push_back(f);
      continue;
    }
    for (int rep = 0; rep < f.exponent; ++rep) {
      if (monomials.size() * s->terms.size() > kMaxExpandedTerms) return std::nullopt;
      std::vector<std::pair<Number, FactorList>> next;
      for (const auto& m : monomials) {
        for (const auto& t : s->terms) {
          auto copy = m;
          copy.first = copy.first * Number(static_cast<long long>(t.coefficient));
          copy.second.push_back({t.expr, 1});
          next.push_back(std::move(copy));
        }
      }
      monomials = std::move(next);
    }
  }
  TermList terms;
  for (auto& [lit, fs] : monomials) {
    fs.insert(fs.begin(), {Expression::literal(lit), 1});
    terms.emplace_back(Number(1LL), canon_product(fs));
  }
  return canon_sum(terms);
}

Expression canon_product(const FactorList& input) {
  Number literal{1LL};
  bool parameter = false;
  FactorList ordinary;
  std::map<std::string, std::size_t> index;

  FactorList flat;
  for (const auto& f : input) {
    if (const auto* p = as<Product>(f.base)) {
      for (const auto& g : p->factors) flat.push_back({g.base, g.exponent * f.exponent});
    } else {
      flat.push_back(f);
    }
  }

  for (const auto& [b, k] : flat) {
    if (k == 0) continue;
    if (const auto* l = as<Literal>(b)) {
      literal = literal * l->value.pow(k);
    } else if (as<Parameter>(b) || (contains_parameter(b) && !contains_variable(b))) {
      parameter = true;
    } else if (contains_parameter(b)) {
      ordinary.push_back({b, k});
    } else {
      const std::string key = render_string(b, true);
      auto it = index.find(key);
      if (it == index.end()) {
        index.emplace(key, ordinary.size());
        ordinary.push_back({b, k});
      } else {
        ordinary[it->second].exponent += k;
      }
    }
  }
  std::erase_if(ordinary, [](const auto& f) { return f.exponent == 0; });

  if (literal.is_zero()) return Expression::literal(Number(0LL));

  if (!parameter) {
    const bool parameter_free = std::none_of(ordinary.begin(), ordinary.end(),
                                             [](const auto& f) { return contains_parameter(f.base); });
    const bool has_sum = std::any_of(ordinary.begin(), ordinary.end(),
                                     [](const auto& f) { return as<Sum>(f.base) && f.exponent > 0; });
    const bool trivial = ordinary.size() == 1 && ordinary[0].exponent == 1 && literal.is_one();
    if (expand_products && parameter_free && has_sum && !trivial) {
      if (auto expanded = expand(literal, ordinary)) return *expanded;
    }
  }

  std::stable_sort(ordinary.begin(), ordinary.end(), [](const auto& a, const auto& b) {
    const int c = compare(a.base, b.base);
    return c != 0 ? c < 0 : a.exponent < b.exponent;
  });

  std::optional<Expression> constant;
  if (parameter) {
    constant = Expression::parameter(0);
  } else if (!literal.is_one()) {
    constant = Expression::literal(literal);
  }
  if (ordinary.empty()) return constant ? *constant : Expression::literal(Number(1LL));
  if (!constant && ordinary.size() == 1 && ordinary[0].exponent == 1) return ordinary[0].base;
  if (constant) ordinary.insert(ordinary.begin(), {*constant, 1});
  return Expression::product(std::move(ordinary));
}

Expression canon(const Expression& e) {
  return std::visit(
      [&](const auto& n) -> Expression {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal> || std::is_same_v<T, Variable>) {
          return e;
        } else if constexpr (std::is_same_v<T, Parameter>) {
          return Expression::parameter(0);
        } else if constexpr (std::is_same_v<T, Function>) {
          Expression arg = canon(n.argument);
          if (!contains_variable(arg)) {
            if (contains_parameter(arg)) return Expression::parameter(0);
            if (const auto* l = as<Literal>(arg)) {
              const double v = apply_function(n.kind, l->value.to_double());
              if (std::isfinite(v)) return Expression::literal(Number::real(v));
            }
          }
          return Expression::function(n.kind, std::move(arg));
        } else if constexpr (std::is_same_v<T, Sum>) {
          TermList terms;
          for (const auto& t : n.terms) {
            Expression c = canon(t.expr);
            const Number k(static_cast<long long>(t.coefficient));
            if (const auto* s = as<Sum>(c)) {
              for (const auto& inner : s->terms)
                terms.emplace_back(k * Number(static_cast<long long>(inner.coefficient)), inner.expr);
            } else {
              terms.emplace_back(k, std::move(c));
            }
          }
          return canon_sum(terms);
        } else {
          FactorList factors;
          for (const auto& f : n.factors) factors.push_back({canon(f.base), f.exponent});
          return canon_product(factors);
        }
      },
      e.node().value);
}

/// Assigns parameter indices in rendering order.
Expression renumber(const Expression& e, int& next) {
  return std::visit(
      [&](const auto& n) -> Expression {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Parameter>) {
          return Expression::parameter(next++);
        } else if constexpr (std::is_same_v<T, Function>) {
          return Expression::function(n.kind, renumber(n.argument, next));
        } else if constexpr (std::is_same_v<T, Sum>) {
          std::vector<Expression::Term> terms;
          for (const auto& t : n.terms) terms.push_back({t.coefficient, renumber(t.expr, next)});
          return Expression::sum(std::move(terms));
        } else if constexpr (std::is_same_v<T, Product>) {
          FactorList factors(n.factors);
          for (auto& f : factors)
            if (f.exponent > 0) f.base = renumber(f.base, next);
          for (auto& f : factors)
            if (f.exponent < 0) f.base = renumber(f.base, next);
          return Expression::product(std::move(factors));
        } else {
          return e;
        }
      },
      e.node().value);
}

void collect_parameters(const Expression& e, std::set<int>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Parameter>) {
          out.insert(n.index);
        } else if constexpr (std::is_same_v<T, Function>) {
          collect_parameters(n.argument, out);
        } else if constexpr (std::is_same_v<T, Sum>) {
          for (const auto& t : n.terms) collect_parameters(t.expr, out);
        } else if constexpr (std::is_same_v<T, Product>) {
          for (const auto& f : n.factors) collect_parameters(f.base, out);
        }
      },
      e.node().value);
}

void collect_variables(const Expression& e, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, Function>) {
          collect_variables(n.argument, out);
        } else if constexpr (std::is_same_v<T, Sum>) {
          for (const auto& t : n.terms) collect_variables(t.expr, out);
        } else if constexpr (std::is_same_v<T, Product>) {
          for (const auto& f : n.factors) collect_variables(f.base, out);
        }
      },
      e.node().value);
}

}  // namespace

CanonicalForm canonicalize(const Expression& e, const CanonicalOptions& options) {
  struct Restore {
    bool saved = expand_products;
    ~Restore() { expand_products = saved; }
  } restore;
  expand_products = options.expand_products;
  constexpr int kMaxRounds = 16;
  Expression current = e;
  std::string previous;
  for (int round = 0; round < kMaxRounds; ++round) {
    int next = 0;
    Expression c = renumber(canon(current), next);
    std::string key = render(c);
    if (round > 0 && key == previous) return {std::move(c), std::move(key), next};
    previous = std::move(key);
    current = std::move(c);
  }
  int next = 0;
  Expression c = renumber(canon(current), next);
  return {c, render(c), next};
}

int parameter_count(const Expression& e) {
  std::set<int> indices;
  collect_parameters(e, indices);
  return static_cast<int>(indices.size());
}

std::set<std::string> variable_names(const Expression& e) {
  std::set<std::string> out;
  collect_variables(e, out);
  return out;
}

// ------------------------------------------------------------ evaluation

namespace {

double evaluate_node(const Expression& e, const std::map<std::string, double>& bindings,
                     std::span<const double> params) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return n.value.to_double();
        } else if constexpr (std::is_same_v<T, Parameter>) {
          if (n.index < 0 || static_cast<std::size_t>(n.index) >= params.size())
            throw ExpressionError("parameter C" + std::to_string(n.index) + " has no value");
          return params[n.index];
        } else if constexpr (std::is_same_v<T, Variable>) {
          auto it = bindings.find(n.name);
          if (it == bindings.end()) throw ExpressionError("unbound variable '" + n.name + "'");
          return it->second;
        } else if constexpr (std::is_same_v<T, Function>) {
          return apply_function(n.kind, evaluate_node(n.argument, bindings, params));
        } else if constexpr (std::is_same_v<T, Sum>) {
          double total = 0.0;
          for (const auto& t : n.terms) total += t.coefficient * evaluate_node(t.expr, bindings, params);
          return total;
        } else {
          double total = 1.0;
          for (const auto& f : n.factors) {
            const double v = evaluate_node(f.base, bindings, params);
            if (f.exponent == 1) {
              total *= v;
            } else if (f.exponent == -1) {
              total /= v;
            } else {
              total *= std::pow(v, f.exponent);
            }
          }
          return total;
        }
      },
      e.node().value);
}

}  // namespace

double evaluate(const Expression& e, const std::map<std::string, double>& bindings,
                std::span<const double> params) {
  const int n = parameter_count(e);
  if (params.size() != static_cast<std::size_t>(n))
    throw ExpressionError("expected " + std::to_string(n) + " parameter values, got " +
                          std::to_string(params.size()));
  return evaluate_node(e, bindings, params);
}

Expression substitute(const Expression& e, const std::map<std::string, Number>& values) {
  return std::visit(
      [&](const auto& n) -> Expression {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          auto it = values.find(n.name);
          return it == values.end() ? e : Expression::literal(it->second);
        } else if constexpr (std::is_same_v<T, Function>) {
          return Expression::function(n.kind, substitute(n.argument, values));
        } else if constexpr (std::is_same_v<T, Sum>) {
          std::vector<Expression::Term> terms;
          for (const auto& t : n.terms) terms.push_back({t.coefficient, substitute(t.expr, values)});
          return Expression::sum(std::move(terms));
        } else if constexpr (std::is_same_v<T, Product>) {
          FactorList factors;
          for (const auto& f : n.factors) factors.push_back({substitute(f.base, values), f.exponent});
          return Expression::product(std::move(factors));
        } else {
          return e;
        }
      },
      e.node().value);
}

// ------------------------------------------------------------ complexity

namespace {

double operator_count(const Expression& e) {
  return std::visit(
      [](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Function>) {
          return 1.0 + operator_count(n.argument);
        } else if constexpr (std::is_same_v<T, Sum>) {
          double total = static_cast<double>(n.terms.size()) - 1.0;
          for (const auto& t : n.terms) total += operator_count(t.expr);
          return total;
        } else if constexpr (std::is_same_v<T, Product>) {
          double total = -1.0;
          for (const auto& f : n.factors) total += std::abs(f.exponent) + operator_count(f.base);
          return total;
        } else {
          return 0.0;
        }
      },
      e.node().value);
}

}  // namespace

std::optional<ComplexityMeasure> complexity_measure_from_name(std::string_view name) {
  if (name == "string_length") return ComplexityMeasure::string_length;
  if (name == "unique_variables") return ComplexityMeasure::unique_variables;
  if (name == "operator_count") return ComplexityMeasure::operator_count;
  return std::nullopt;
}

std::string_view complexity_measure_name(ComplexityMeasure m) {
  switch (m) {
    case ComplexityMeasure::string_length: return "string_length";
    case ComplexityMeasure::unique_variables: return "unique_variables";
    case ComplexityMeasure::operator_count: return "operator_count";
  }
  return "?";
}

double complexity(const Expression& e, ComplexityMeasure measure) {
  const CanonicalForm c = canonicalize(e);
  switch (measure) {
    case ComplexityMeasure::string_length:
      return static_cast<double>(std::count_if(c.key.begin(), c.key.end(),
                                               [](unsigned char ch) { return std::isalnum(ch) != 0; }));
    case ComplexityMeasure::unique_variables:
      return static_cast<double>(variable_names(c.expr).size());
    case ComplexityMeasure::operator_count:
      return operator_count(c.expr);
  }
  return 0.0;
}

// ------------------------------------------------------- grammar surface

namespace {

std::string surface(const Expression& e);

std::string surface_factor(const Expression& base) {
  std::string s = surface(base);
  if (as<Sum>(base) || as<Product>(base)) s = "(" + s + ")";
  return s;
}

std::string surface(const Expression& e) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal> || std::is_same_v<T, Parameter>) {
          return "c";
        } else if constexpr (std::is_same_v<T, Variable>) {
          return n.name;
        } else if constexpr (std::is_same_v<T, Function>) {
          return std::string(function_name(n.kind)) + "(" + surface(n.argument) + ")";
        } else if constexpr (std::is_same_v<T, Sum>) {
          std::string out;
          bool first = true;
          for (int pass = 0; pass < 2; ++pass) {
            for (const auto& t : n.terms) {
              if ((t.coefficient > 0) != (pass == 0)) continue;
              std::string s = surface(t.expr);
              if (as<Sum>(t.expr)) s = "(" + s + ")";
              if (first) {
                out += t.coefficient > 0 ? s : "c*" + s;
              } else {
                out += (t.coefficient > 0 ? "+" : "-") + s;
              }
              first = false;
            }
          }
          return out;
        } else {
          std::string out;
          bool any = false;
          for (const auto& f : n.factors) {
            if (f.exponent <= 0) continue;
            const bool constant = as<Literal>(f.base) || as<Parameter>(f.base);
            const std::string s = constant ? "c" : surface_factor(f.base);
            for (int i = 0; i < (constant ? 1 : f.exponent); ++i) {
              if (any) out += '*';
              out += s;
              any = true;
            }
          }
          if (!any) out = "c";
          for (const auto& f : n.factors) {
            if (f.exponent >= 0) continue;
            const bool constant = as<Literal>(f.base) || as<Parameter>(f.base);
            const std::string s = constant ? "c" : surface_factor(f.base);
            for (int i = 0; i < (constant ? 1 : -f.exponent); ++i) out += "/" + s;
          }
          return out;
        }
      },
      e.node().value);
}

}  // namespace

std::string grammar_surface(const Expression& e) { return surface(e); }

// ------------------------------------------------------ compiled program

CompiledExpression::CompiledExpression(const Expression& e, std::span<const std::string> columns) {
  emit(e, columns);
  if (depth_ != 1) throw ExpressionError("internal: unbalanced expression program");
}

void CompiledExpression::push(Instruction i, int delta) {
  program_.push_back(i);
  depth_ += delta;
  max_depth_ = std::max(max_depth_, depth_);
}

void CompiledExpression::emit(const Expression& e, std::span<const std::string> columns) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>) {
          push({Op::constant, 0, n.value.to_double()}, 1);
        } else if constexpr (std::is_same_v<T, Parameter>) {
          n_parameters_ = std::max(n_parameters_, n.index + 1);
          push({Op::parameter, n.index}, 1);
        } else if constexpr (std::is_same_v<T, Variable>) {
          auto it = std::find(columns.begin(), columns.end(), n.name);
          if (it == columns.end()) throw ExpressionError("unbound variable '" + n.name + "'");
          push({Op::variable, static_cast<int>(it - columns.begin())}, 1);
        } else if constexpr (std::is_same_v<T, Function>) {
          emit(n.argument, columns);
          push({Op::function, 0, 0.0, n.kind}, 0);
        } else if constexpr (std::is_same_v<T, Sum>) {
          bool first = true;
          for (const auto& t : n.terms) {
            emit(t.expr, columns);
            const int magnitude = std::abs(t.coefficient);
            if (magnitude != 1) {
              push({Op::constant, 0, static_cast<double>(magnitude)}, 1);
              push({Op::mul}, -1);
            }
            if (first) {
              if (t.coefficient < 0) push({Op::neg}, 0);
            } else {
              push({t.coefficient < 0 ? Op::sub : Op::add}, -1);
            }
            first = false;
          }
          if (first) push({Op::constant, 0, 0.0}, 1);
        } else {
          bool first = true;
          for (const auto& f : n.factors) {
            emit(f.base, columns);
            if (first) {
              if (f.exponent != 1) push({Op::pow, f.exponent}, 0);
            } else {
              const int magnitude = std::abs(f.exponent);
              if (magnitude != 1) push({Op::pow, magnitude}, 0);
              push({f.exponent < 0 ? Op::div : Op::mul}, -1);
            }
            first = false;
          }
          if (first) push({Op::constant, 0, 1.0}, 1);
        }
      },
      e.node().value);
}

void CompiledExpression::evaluate(std::span<const std::span<const double>> columns,
                                  std::span<const double> params, std::span<double> out) const {
  if (params.size() < static_cast<std::size_t>(n_parameters_))
    throw ExpressionError("expected " + std::to_string(n_parameters_) + " parameter values, got " +
                          std::to_string(params.size()));
  const std::size_t rows = out.size();
  thread_local std::vector<double> buffer;
  if (buffer.size() < rows * static_cast<std::size_t>(max_depth_)) buffer.resize(rows * max_depth_);
  double* base = buffer.data();
  std::size_t sp = 0;
  auto slot = [&](std::size_t i) { return base + i * rows; };

  for (const auto& ins : program_) {
    switch (ins.op) {
      case Op::variable: {
        const auto& col = columns[ins.index];
        std::copy(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(rows), slot(sp++));
        break;
      }
      case Op::parameter:
        std::fill_n(slot(sp++), rows, params[ins.index]);
        break;
      case Op::constant:
        std::fill_n(slot(sp++), rows, ins.value);
        break;
      case Op::add: {
        double* a = slot(sp - 2);
        const double* b = slot(sp - 1);
        for (std::size_t r = 0; r < rows; ++r) a[r] += b[r];
        --sp;
        break;
      }
      case Op::sub: {
        double* a = slot(sp - 2);
        const double* b = slot(sp - 1);
        for (std::size_t r = 0; r < rows; ++r) a[r] -= b[r];
        --sp;
        break;
      }
      case Op::mul: {
        double* a = slot(sp - 2);
        const double* b = slot(sp - 1);
        for (std::size_t r = 0; r < rows; ++r) a[r] *= b[r];
        --sp;
        break;
      }
      case Op::div: {
        double* a = slot(sp - 2);
        const double* b = slot(sp - 1);
        for (std::size_t r = 0; r < rows; ++r) a[r] /= b[r];
        --sp;
        break;
      }
      case Op::pow: {
        double* a = slot(sp - 1);
        const int k = ins.index;
        if (k == 2) {
          for (std::size_t r = 0; r < rows; ++r) a[r] *= a[r];
        } else if (k == -1) {
          for (std::size_t r = 0; r < rows; ++r) a[r] = 1.0 / a[r];
        } else {
          for (std::size_t r = 0; r < rows; ++r) a[r] = std::pow(a[r], k);
        }
        break;
      }
      case Op::neg: {
        double* a = slot(sp - 1);
        for (std::size_t r = 0; r < rows; ++r) a[r] = -a[r];
        break;
      }
      case Op::function: {
        double* a = slot(sp - 1);
        for (std::size_t r = 0; r < rows; ++r) a[r] = apply_function(ins.function, a[r]);
        break;
      }
    }
  }
  std::copy(slot(0), slot(0) + rows, out.begin());
}

}  // namespace eqgram
