#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace greenfn::expr {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& message)
      : std::runtime_error(message + " (at offset " + std::to_string(position) + ")"),
        position_(position),
        message_(message) {}
  std::size_t position() const { return position_; }
  const std::string& bare_message() const { return message_; }

 private:
  std::size_t position_;
  std::string message_;
};

/// An arithmetic expression in the single variable t.
///
/// Grammar (everything the problem files may use):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?          right associative
///   primary := number | 't' | ('exp'|'sin'|'cos') '(' expr ')' | '(' expr ')'
class Expression {
 public:
  Expression() { nodes_.push_back({Kind::number, 0.0, -1, -1}); }

  static Expression parse(std::string_view text) {
    Parser p{text, 0};
    Expression e;
    e.nodes_.clear();
    e.text_.assign(text);
    e.root_ = e.parse_expr(p);
    p.skip_space();
    if (!p.done()) throw ParseError(p.pos, "unexpected trailing input");
    return e;
  }

  static Expression constant(double value) {
    Expression e;
    e.nodes_[0].value = value;
    e.text_ = std::to_string(value);
    return e;
  }

  double operator()(double t) const { return eval(root_, t); }

  /// True when the expression never references t.
  bool is_constant() const {
    for (const Node& n : nodes_)
      if (n.kind == Kind::var_t) return false;
    return true;
  }

  const std::string& text() const { return text_; }

 private:
  enum class Kind { number, var_t, add, sub, mul, div, pow, neg, exp_fn, sin_fn, cos_fn };

  struct Node {
    Kind kind;
    double value;
    int lhs;
    int rhs;
  };

  struct Parser {
    std::string_view src;
    std::size_t pos;
    void skip_space() {
      while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t')) ++pos;
    }
    bool done() const { return pos >= src.size(); }
    char peek() const { return pos < src.size() ? src[pos] : '\0'; }
  };

  std::vector<Node> nodes_;
  int root_ = 0;
  std::string text_;

  int push(Kind k, double v, int l, int r) {
    nodes_.push_back({k, v, l, r});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int parse_expr(Parser& p) {
    int lhs = parse_term(p);
    for (;;) {
      p.skip_space();
      char c = p.peek();
      if (c != '+' && c != '-') return lhs;
      ++p.pos;
      int rhs = parse_term(p);
      lhs = push(c == '+' ? Kind::add : Kind::sub, 0.0, lhs, rhs);
    }
  }

  int parse_term(Parser& p) {
    int lhs = parse_unary(p);
    for (;;) {
      p.skip_space();
      char c = p.peek();
      if (c != '*' && c != '/') return lhs;
      ++p.pos;
      int rhs = parse_unary(p);
      lhs = push(c == '*' ? Kind::mul : Kind::div, 0.0, lhs, rhs);
    }
  }

  int parse_unary(Parser& p) {
    p.skip_space();
    if (p.peek() == '-') {
      ++p.pos;
      return push(Kind::neg, 0.0, parse_unary(p), -1);
    }
    return parse_power(p);
  }

  int parse_power(Parser& p) {
    int base = parse_primary(p);
    p.skip_space();
    if (p.peek() == '^') {
      ++p.pos;
      int exponent = parse_unary(p);
      return push(Kind::pow, 0.0, base, exponent);
    }
    return base;
  }

  int parse_primary(Parser& p) {
    p.skip_space();
    if (p.done()) throw ParseError(p.pos, "unexpected end of expression");
    char c = p.peek();
    if (c == '(') {
      ++p.pos;
      int inner = parse_expr(p);
      p.skip_space();
      if (p.peek() != ')') throw ParseError(p.pos, "expected ')'");
      ++p.pos;
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number(p);
    if (c >= 'a' && c <= 'z') {
      std::size_t start = p.pos;
      while (!p.done() && p.peek() >= 'a' && p.peek() <= 'z') ++p.pos;
      std::string_view name = p.src.substr(start, p.pos - start);
      if (name == "t") return push(Kind::var_t, 0.0, -1, -1);
      Kind k;
      if (name == "exp")
        k = Kind::exp_fn;
      else if (name == "sin")
        k = Kind::sin_fn;
      else if (name == "cos")
        k = Kind::cos_fn;
      else
        throw ParseError(start, "unknown name '" + std::string(name) + "'");
      p.skip_space();
      if (p.peek() != '(') throw ParseError(p.pos, "expected '(' after function name");
      ++p.pos;
      int arg = parse_expr(p);
      p.skip_space();
      if (p.peek() != ')') throw ParseError(p.pos, "expected ')'");
      ++p.pos;
      return push(k, 0.0, arg, -1);
    }
    throw ParseError(p.pos, std::string("unexpected character '") + c + "'");
  }

  int parse_number(Parser& p) {
    const char* begin = p.src.data() + p.pos;
    const char* end = p.src.data() + p.src.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{}) throw ParseError(p.pos, "malformed number");
    p.pos += static_cast<std::size_t>(ptr - begin);
    return push(Kind::number, value, -1, -1);
  }

  double eval(int idx, double t) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.kind) {
      case Kind::number: return n.value;
      case Kind::var_t: return t;
      case Kind::add: return eval(n.lhs, t) + eval(n.rhs, t);
      case Kind::sub: return eval(n.lhs, t) - eval(n.rhs, t);
      case Kind::mul: return eval(n.lhs, t) * eval(n.rhs, t);
      case Kind::div: return eval(n.lhs, t) / eval(n.rhs, t);
      case Kind::pow: return std::pow(eval(n.lhs, t), eval(n.rhs, t));
      case Kind::neg: return -eval(n.lhs, t);
      case Kind::exp_fn: return std::exp(eval(n.lhs, t));
      case Kind::sin_fn: return std::sin(eval(n.lhs, t));
      case Kind::cos_fn: return std::cos(eval(n.lhs, t));
    }
    return 0.0;
  }
};

}  // namespace greenfn::expr
