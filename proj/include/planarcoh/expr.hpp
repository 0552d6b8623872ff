#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "planarcoh/geometry.hpp"

namespace pcoh {

enum class Var { X, Y };

/// Node of an immutable expression tree over the variables x, y.
/// Trees are shared (values never mutate after construction) so copies of
/// Expr are cheap and evaluation is safe from any number of threads.
struct ExprNode {
  enum class Op {
    Const, VarX, VarY,
    Add, Sub, Mul, Div, Pow,
    Neg,
    Sin, Cos, Tan, Exp, Log, Sqrt, Tanh, Atan, Abs
  };

  Op op;
  double value = 0.0;  // Const only
  std::shared_ptr<const ExprNode> a, b;
  int src_offset = -1;  // byte offset in the source text, when parsed
};

using NodePtr = std::shared_ptr<const ExprNode>;

/// Syntax problem, with the byte offset of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Result of evaluating an expression. Domain violations (log of a
/// non-positive number, division by zero, ...) are reported as values rather
/// than thrown: gap computations deliberately probe close to singular loci
/// and must be able to observe the failure.
struct EvalResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  const ExprNode* fault = nullptr;  // offending subexpression, when any
  bool ok() const { return fault == nullptr; }
};

class Expr {
 public:
  Expr() = default;  // empty; eval faults

  /// Parses an infix expression over {x, y}, decimal literals and the
  /// functions sin, cos, tan, exp, log, sqrt, tanh, atan, abs.
  /// ^ is right-associative; unary minus binds looser, so -x^2 == -(x^2).
  static Expr parse(std::string_view src);

  EvalResult eval(double x, double y) const noexcept;
  EvalResult eval(Point2 p) const noexcept { return eval(p.x, p.y); }

  /// Convenience: NaN on domain fault.
  double operator()(double x, double y) const noexcept { return eval(x, y).value; }
  double operator()(Point2 p) const noexcept { return eval(p).value; }

  /// Exact symbolic partial derivative. Total on the grammar.
  Expr diff(Var v) const;

  /// Canonical fully parenthesized infix form; parse(str()) evaluates
  /// identically to the original at every point.
  std::string str() const;

  /// Substitutes sub-expressions for the variables ("pullback" plumbing).
  Expr composed(const Expr& for_x, const Expr& for_y) const;

  bool dependsOn(Var v) const;
  bool empty() const { return !root_; }
  const NodePtr& root() const { return root_; }

  // Builders used when deriving fields and Lie derivatives symbolically.
  static Expr constant(double c);
  static Expr x();
  static Expr y();
  friend Expr operator+(const Expr&, const Expr&);
  friend Expr operator-(const Expr&, const Expr&);
  friend Expr operator*(const Expr&, const Expr&);
  friend Expr operator/(const Expr&, const Expr&);
  friend Expr operator-(const Expr&);
  static Expr pow(const Expr& base, const Expr& exponent);
  static Expr apply(ExprNode::Op unary_op, const Expr& arg);

  explicit Expr(NodePtr root) : root_(std::move(root)) {}

 private:
  NodePtr root_;
};

Expr sin(const Expr&);
Expr cos(const Expr&);
Expr exp(const Expr&);
Expr log(const Expr&);
Expr sqrt(const Expr&);
Expr tanh(const Expr&);
Expr atan(const Expr&);

}  // namespace pcoh
