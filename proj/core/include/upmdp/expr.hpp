#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace upmdp {

// Immutable arithmetic expression over named parameters.
//
// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := number | ident | '(' expr ')'
// A subtraction whose left operand is the literal 1 is stored as a
// one-minus node, so "1 - p" and "1 - (p)" compare equal.
class Expr {
 public:
  enum class Kind { Literal, Param, Add, Sub, Mul, Div, OneMinus };

  Expr();  // literal 0

  static Expr literal(double value);
  static Expr param(std::size_t index, std::string name);
  static Expr add(Expr lhs, Expr rhs);
  static Expr sub(Expr lhs, Expr rhs);
  static Expr mul(Expr lhs, Expr rhs);
  static Expr div(Expr lhs, Expr rhs);
  static Expr one_minus(Expr operand);

  Kind kind() const;
  double literal_value() const;
  std::size_t param_index() const;
  const std::string& param_name() const;
  const Expr& lhs() const;
  const Expr& rhs() const;  // also the operand of OneMinus

  double evaluate(std::span<const double> values) const;
  bool is_constant() const;
  // Sorted, deduplicated parameter indices referenced by the expression.
  std::vector<std::size_t> parameters() const;

  std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  static Expr binary(Kind kind, Expr lhs, Expr rhs);
  std::shared_ptr<const Node> node_;
};

// Resolves an identifier to a parameter index; throws ValidationError for
// unknown names.
using ParamResolver = std::function<std::size_t(std::string_view)>;

// Throws ParseError (with the offending offset) on malformed input.
Expr parse_expr(std::string_view text, const ParamResolver& resolve);

}  // namespace upmdp
