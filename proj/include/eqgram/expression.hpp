#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eqgram/analytics.hpp"
#include "eqgram/grammar.hpp"
#include "eqgram/sampler.hpp"

namespace eqgram {

/// Either an exact rational or an IEEE double. Arithmetic stays exact while
/// both operands are exact.
class Number {
 public:
  Number() : value_(BigRational(0)) {}
  Number(long long v) : value_(BigRational(v)) {}  // NOLINT(google-explicit-constructor)
  static Number exact(BigRational v) { return Number(std::move(v)); }
  static Number real(double v) { return Number(v); }

  bool is_exact() const noexcept { return std::holds_alternative<BigRational>(value_); }
  const BigRational& rational() const { return std::get<BigRational>(value_); }
  double to_double() const;
  int sign() const;
  bool is_zero() const { return sign() == 0 && !is_nan(); }
  bool is_one() const;
  bool is_nan() const;
  bool is_integer() const;

  Number operator-() const;
  friend Number operator+(const Number& a, const Number& b);
  friend Number operator*(const Number& a, const Number& b);
  Number pow(int exponent) const;
  Number abs() const { return sign() < 0 ? -*this : *this; }

  /// "3", "-1/2", or the shortest round-trip decimal of a double.
  std::string str() const;
  /// Total order by value; exact sorts before a double of equal value.
  static int compare(const Number& a, const Number& b);

 private:
  explicit Number(BigRational v) : value_(std::move(v)) {}
  explicit Number(double v) : value_(v) {}
  std::variant<BigRational, double> value_;
};

enum class FunctionKind { sin, cos, sqrt, exp, tanh, arcsin, log };

std::string_view function_name(FunctionKind f);
std::optional<FunctionKind> function_from_name(std::string_view name);
double apply_function(FunctionKind f, double x);

class Expression;
struct ExprNode;

/// Immutable expression handle; copies share structure.
class Expression {
 public:
  struct Term;
  struct Factor;

  /// The literal 0.
  Expression();

  static Expression variable(std::string name);
  static Expression parameter(int index);
  static Expression literal(Number value);
  static Expression sum(std::vector<Term> terms);
  static Expression product(std::vector<Factor> factors);
  static Expression function(FunctionKind f, Expression argument);

  static Expression add(Expression a, Expression b);
  static Expression subtract(Expression a, Expression b);
  static Expression multiply(Expression a, Expression b);
  static Expression divide(Expression a, Expression b);
  static Expression negate(Expression a);
  static Expression power(Expression base, int exponent);

  const ExprNode& node() const { return *node_; }

 private:
  explicit Expression(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct Expression::Term {
  int coefficient;
  Expression expr;
};

struct Expression::Factor {
  Expression base;
  int exponent;
};

struct Variable {
  std::string name;
};
struct Parameter {
  int index;
};
struct Literal {
  Number value;
};
struct Function {
  FunctionKind kind;
  Expression argument;
};
struct Product {
  std::vector<Expression::Factor> factors;
};
struct Sum {
  std::vector<Expression::Term> terms;
};

/// Alternatives are declared in operand-ordering rank.
struct ExprNode {
  std::variant<Literal, Parameter, Variable, Function, Product, Sum> value;
};

template <class T>
const T* as(const Expression& e) {
  return std::get_if<T>(&e.node().value);
}

class ExpressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExpressionSyntaxError : public ExpressionError {
 public:
  ExpressionSyntaxError(const std::string& message, std::size_t position);
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

struct CanonicalForm {
  Expression expr;
  std::string key;
  int n_parameters = 0;
};

/// Normal form used for deduplication. Two expressions receive the same key
/// when they differ only by ordering, grouping, literal arithmetic, identity
/// elements, or the arrangement of free constants.
struct CanonicalOptions {
  /// Multiply out parameter-free products of sums. Off keeps factored forms.
  bool expand_products = true;
};

CanonicalForm canonicalize(const Expression& e, const CanonicalOptions& options = {});

/// Compact infix rendering: no spaces, C<i> for parameters, ^ for powers.
std::string render(const Expression& e);

/// Builds an expression from a derivation. The terminal `c` becomes a fresh
/// parameter, numbered left to right.
Expression tree_to_expression(const ParseTree& t, const Pcfg& g);

struct ParseOptions {
  /// When set, each occurrence of this identifier becomes a fresh parameter.
  std::optional<std::string> constant_symbol;
};

/// Infix parser: + - * / ^ (also **), unary minus, parentheses, numbers,
/// identifiers and the function names above. Identifiers C0, C1, ... are
/// parameters, so rendered keys parse back.
Expression parse_expression(std::string_view text, const ParseOptions& options = {});

/// Number of distinct parameter indices.
int parameter_count(const Expression& e);
std::set<std::string> variable_names(const Expression& e);

/// IEEE evaluation. Domain violations give NaN or inf.
double evaluate(const Expression& e, const std::map<std::string, double>& bindings,
                std::span<const double> params);

/// Replaces named variables by literal values.
Expression substitute(const Expression& e, const std::map<std::string, Number>& values);

enum class ComplexityMeasure { string_length, unique_variables, operator_count };

std::optional<ComplexityMeasure> complexity_measure_from_name(std::string_view name);
std::string_view complexity_measure_name(ComplexityMeasure m);

/// Measured on the canonical form.
double complexity(const Expression& e, ComplexityMeasure measure);

/// Spells an expression with the token vocabulary of the universal grammar:
/// numbers become `c`, integer powers become repeated products.
std::string grammar_surface(const Expression& e);

/// Stack program for fast evaluation over many rows.
class CompiledExpression {
 public:
  /// `columns` fixes the order of variable columns passed to evaluate().
  CompiledExpression(const Expression& e, std::span<const std::string> columns);

  int n_parameters() const noexcept { return n_parameters_; }

  /// out[r] = e(columns[*][r], params). Every column must have out.size() rows.
  void evaluate(std::span<const std::span<const double>> columns, std::span<const double> params,
                std::span<double> out) const;

 private:
  enum class Op { variable, parameter, constant, add, sub, mul, div, pow, neg, function };
  struct Instruction {
    Op op;
    int index = 0;
    double value = 0.0;
    FunctionKind function = FunctionKind::sin;
  };
  void emit(const Expression& e, std::span<const std::string> columns);
  void push(Instruction i, int delta);

  std::vector<Instruction> program_;
  int n_parameters_ = 0;
  int depth_ = 0;
  int max_depth_ = 0;
};

}  // namespace eqgram
