#include <cctype>
#include <cstdlib>

#include "eqgram/expression.hpp"

namespace eqgram {

namespace {

std::optional<Number> parse_number(std::string_view text, std::size_t& pos) {
  const std::size_t start = pos;
  BigInt mantissa = 0;
  int scale = 0;
  bool digits = false;
  while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
    mantissa = mantissa * 10 + (text[pos++] - '0');
    digits = true;
  }
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      mantissa = mantissa * 10 + (text[pos++] - '0');
      --scale;
      digits = true;
    }
  }
  if (!digits) {
    pos = start;
    return std::nullopt;
  }
  if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
    std::size_t p = pos + 1;
    int sign = 1;
    if (p < text.size() && (text[p] == '+' || text[p] == '-')) sign = text[p++] == '-' ? -1 : 1;
    if (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) {
      int exponent = 0;
      while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) {
        exponent = std::min(exponent * 10 + (text[p++] - '0'), 100000);
      }
      scale += sign * exponent;
      pos = p;
    }
  }
  if (scale < -400 || scale > 400) {
    const std::string s(text.substr(start, pos - start));
    return Number::real(std::strtod(s.c_str(), nullptr));
  }
  const BigInt ten_power = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::abs(scale)));
  if (scale >= 0) return Number::exact(BigRational(mantissa * ten_power));
  return Number::exact(BigRational(mantissa, ten_power));
}

bool is_parameter_name(std::string_view name) {
  if (name.size() < 2 || name[0] != 'C') return false;
  for (std::size_t i = 1; i < name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
  return name.size() < 9;
}

/// Exponents must reduce to an integer constant.
int integer_exponent(const Expression& e, std::size_t position) {
  const CanonicalForm c = canonicalize(e);
  const auto* l = as<Literal>(c.expr);
  if (!l || !l->value.is_exact() || !l->value.is_integer())
    throw ExpressionSyntaxError("exponent must be an integer constant", position);
  const BigRational& r = l->value.rational();
  if (r > 1024 || r < -1024) throw ExpressionSyntaxError("exponent out of range", position);
  return static_cast<int>(boost::multiprecision::numerator(r));
}

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& options) : text_(text), options_(options) {}

  Expression parse() {
    Expression e = expression();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw ExpressionSyntaxError(message, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view token) {
    skip_space();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  Expression expression() {
    Expression e = term();
    while (true) {
      if (accept("+")) {
        e = Expression::add(e, term());
      } else if (accept("-")) {
        e = Expression::subtract(e, term());
      } else {
        return e;
      }
    }
  }

  Expression term() {
    Expression e = unary();
    while (true) {
      skip_space();
      if (text_.substr(pos_, 2) == "**") return e;
      if (accept("*")) {
        e = Expression::multiply(e, unary());
      } else if (accept("/")) {
        e = Expression::divide(e, unary());
      } else {
        return e;
      }
    }
  }

  Expression unary() {
    if (accept("-")) return Expression::negate(unary());
    if (accept("+")) return unary();
    return power();
  }

  Expression power() {
    Expression base = primary();
    skip_space();
    const std::size_t at = pos_;
    if (accept("^") || accept("**")) {
      Expression exponent = unary();
      return Expression::power(base, integer_exponent(exponent, at));
    }
    return base;
  }

  Expression primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char ch = text_[pos_];
    if (ch == '(') {
      ++pos_;
      Expression e = expression();
      if (!accept(")")) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      if (auto n = parse_number(text_, pos_)) return Expression::literal(*n);
      fail("malformed number");
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string name(text_.substr(start, pos_ - start));
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        const auto f = function_from_name(name);
        if (!f) {
          pos_ = start;
          fail("unknown function '" + name + "'");
        }
        ++pos_;
        Expression arg = expression();
        if (!accept(")")) fail("expected ')'");
        return Expression::function(*f, arg);
      }
      if (options_.constant_symbol && name == *options_.constant_symbol)
        return Expression::parameter(next_parameter_++);
      if (is_parameter_name(name)) return Expression::parameter(std::stoi(name.substr(1)));
      return Expression::variable(name);
    }
    fail("unexpected '" + std::string(1, ch) + "'");
  }

  std::string_view text_;
  const ParseOptions& options_;
  std::size_t pos_ = 0;
  int next_parameter_ = 0;
};

class TreeBuilder {
 public:
  explicit TreeBuilder(const Pcfg& g) : g_(g) {}

  Expression build(const ParseTree& t) {
    if (t.is_leaf()) return terminal(t.label);
    const auto& ch = t.children;
    if (ch.size() == 1) return build(ch[0]);
    if (ch.size() == 2 && ch[0].is_leaf()) {
      const std::string& op = name(ch[0]);
      if (op == "-") return Expression::negate(build(ch[1]));
      if (op == "+") return build(ch[1]);
    }
    if (ch.size() == 3) {
      if (ch[0].is_leaf() && ch[2].is_leaf() && name(ch[0]) == "(" && name(ch[2]) == ")") return build(ch[1]);
      if (ch[1].is_leaf()) {
        const std::string& op = name(ch[1]);
        if (op == "+" || op == "-" || op == "*" || op == "/" || op == "^" || op == "**") {
          // Left operand first so parameters are numbered left to right.
          Expression lhs = build(ch[0]);
          Expression rhs = build(ch[2]);
          if (op == "+") return Expression::add(std::move(lhs), std::move(rhs));
          if (op == "-") return Expression::subtract(std::move(lhs), std::move(rhs));
          if (op == "*") return Expression::multiply(std::move(lhs), std::move(rhs));
          if (op == "/") return Expression::divide(std::move(lhs), std::move(rhs));
          return Expression::power(std::move(lhs), integer_exponent(rhs, 0));
        }
      }
    }
    if (ch.size() == 4 && ch[0].is_leaf() && ch[1].is_leaf() && ch[3].is_leaf() && name(ch[1]) == "(" &&
        name(ch[3]) == ")") {
      if (const auto f = function_from_name(name(ch[0]))) return Expression::function(*f, build(ch[2]));
    }
    throw ExpressionError("production of '" + g_.symbol(t.label).name +
                          "' has a shape with no arithmetic meaning");
  }

 private:
  const std::string& name(const ParseTree& t) const { return g_.symbol(t.label).name; }

  Expression terminal(SymbolId s) {
    const std::string& text = g_.symbol(s).name;
    if (text == kConstantSymbol) return Expression::parameter(next_parameter_++);
    std::size_t pos = 0;
    if (auto n = parse_number(text, pos); n && pos == text.size()) return Expression::literal(*n);
    const bool identifier =
        !text.empty() && (std::isalpha(static_cast<unsigned char>(text[0])) || text[0] == '_') &&
        std::all_of(text.begin(), text.end(),
                    [](unsigned char c) { return std::isalnum(c) != 0 || c == '_'; });
    if (identifier && !function_from_name(text)) return Expression::variable(text);
    throw ExpressionError("unknown terminal token '" + text + "'");
  }

  const Pcfg& g_;
  int next_parameter_ = 0;
};

}  // namespace

Expression parse_expression(std::string_view text, const ParseOptions& options) {
  return Parser(text, options).parse();
}

Expression tree_to_expression(const ParseTree& t, const Pcfg& g) { return TreeBuilder(g).build(t); }

}  // namespace eqgram
