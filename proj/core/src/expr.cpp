#include "upmdp/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "upmdp/error.hpp"

namespace upmdp {

struct Expr::Node {
  Kind kind = Kind::Literal;
  double value = 0.0;
  std::size_t index = 0;
  std::string name;
  Expr lhs_expr{nullptr};
  Expr rhs_expr{nullptr};
};

Expr::Expr() : Expr(literal(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::literal(double value) {
  if (!std::isfinite(value) || value < 0.0) {
    throw ValidationError("expression literal must be finite and non-negative");
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::Literal;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::param(std::size_t index, std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Param;
  n->index = index;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::add(Expr lhs, Expr rhs) { return binary(Kind::Add, std::move(lhs), std::move(rhs)); }
Expr Expr::mul(Expr lhs, Expr rhs) { return binary(Kind::Mul, std::move(lhs), std::move(rhs)); }
Expr Expr::div(Expr lhs, Expr rhs) { return binary(Kind::Div, std::move(lhs), std::move(rhs)); }

Expr Expr::sub(Expr lhs, Expr rhs) {
  if (lhs.kind() == Kind::Literal && lhs.literal_value() == 1.0) {
    return one_minus(std::move(rhs));
  }
  return binary(Kind::Sub, std::move(lhs), std::move(rhs));
}

Expr Expr::one_minus(Expr operand) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::OneMinus;
  n->rhs_expr = std::move(operand);
  return Expr(std::move(n));
}

Expr Expr::binary(Kind kind, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs_expr = std::move(lhs);
  n->rhs_expr = std::move(rhs);
  return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::literal_value() const { return node_->value; }
std::size_t Expr::param_index() const { return node_->index; }
const std::string& Expr::param_name() const { return node_->name; }
const Expr& Expr::lhs() const { return node_->lhs_expr; }
const Expr& Expr::rhs() const { return node_->rhs_expr; }

double Expr::evaluate(std::span<const double> values) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Literal:
      return n.value;
    case Kind::Param:
      if (n.index >= values.size()) throw ValidationError("valuation misses parameter '" + n.name + "'");
      return values[n.index];
    case Kind::Add:
      return n.lhs_expr.evaluate(values) + n.rhs_expr.evaluate(values);
    case Kind::Sub:
      return n.lhs_expr.evaluate(values) - n.rhs_expr.evaluate(values);
    case Kind::Mul:
      return n.lhs_expr.evaluate(values) * n.rhs_expr.evaluate(values);
    case Kind::Div:
      return n.lhs_expr.evaluate(values) / n.rhs_expr.evaluate(values);
    case Kind::OneMinus:
      return 1.0 - n.rhs_expr.evaluate(values);
  }
  return 0.0;
}

bool Expr::is_constant() const { return parameters().empty(); }

std::vector<std::size_t> Expr::parameters() const {
  std::vector<std::size_t> out;
  std::function<void(const Expr&)> walk = [&](const Expr& e) {
    switch (e.kind()) {
      case Kind::Literal:
        return;
      case Kind::Param:
        out.push_back(e.param_index());
        return;
      case Kind::OneMinus:
        walk(e.rhs());
        return;
      default:
        walk(e.lhs());
        walk(e.rhs());
    }
  };
  walk(*this);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

int precedence(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
    case Expr::Kind::OneMinus:
      return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
      return 2;
    default:
      return 3;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void print(const Expr& e, std::string& out);

void print_operand(const Expr& e, bool parens, std::string& out) {
  if (parens) out += '(';
  print(e, out);
  if (parens) out += ')';
}

void print(const Expr& e, std::string& out) {
  const int prec = precedence(e.kind());
  switch (e.kind()) {
    case Expr::Kind::Literal:
      out += format_number(e.literal_value());
      return;
    case Expr::Kind::Param:
      out += e.param_name();
      return;
    case Expr::Kind::OneMinus:
      out += "1 - ";
      print_operand(e.rhs(), precedence(e.rhs().kind()) <= prec, out);
      return;
    default:
      break;
  }
  const char* op = e.kind() == Expr::Kind::Add   ? " + "
                   : e.kind() == Expr::Kind::Sub ? " - "
                   : e.kind() == Expr::Kind::Mul ? " * "
                                                 : " / ";
  // Left associative: the right operand needs parentheses at equal precedence.
  print_operand(e.lhs(), precedence(e.lhs().kind()) < prec, out);
  out += op;
  print_operand(e.rhs(), precedence(e.rhs().kind()) <= prec, out);
}

}  // namespace

std::string Expr::to_string() const {
  std::string out;
  print(*this, out);
  return out;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expr::Kind::Literal:
      return a.literal_value() == b.literal_value();
    case Expr::Kind::Param:
      return a.param_index() == b.param_index() && a.param_name() == b.param_name();
    case Expr::Kind::OneMinus:
      return a.rhs() == b.rhs();
    default:
      return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, const ParamResolver& resolve) : text_(text), resolve_(resolve) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("expression: " + what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::add(lhs, term());
      } else if (accept('-')) {
        lhs = Expr::sub(lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::mul(lhs, factor());
      } else if (accept('/')) {
        lhs = Expr::div(lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    double value = 0.0;
    auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value,
                               std::chars_format::general);
    if (res.ec != std::errc()) fail("malformed number");
    pos_ = static_cast<std::size_t>(res.ptr - text_.data());
    if (!std::isfinite(value)) {
      pos_ = start;
      fail("number out of range");
    }
    return Expr::literal(value);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    std::string_view name = text_.substr(start, pos_ - start);
    std::size_t index = 0;
    try {
      index = resolve_(name);
    } catch (const ValidationError& e) {
      throw ParseError(std::string("expression: ") + e.what(), start);
    }
    return Expr::param(index, std::string(name));
  }

  std::string_view text_;
  const ParamResolver& resolve_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const ParamResolver& resolve) {
  return Parser(text, resolve).parse();
}

}  // namespace upmdp
