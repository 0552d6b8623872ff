#include "planarcoh/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>

namespace pcoh {

using Op = ExprNode::Op;

namespace {

NodePtr mk(Op op, NodePtr a = nullptr, NodePtr b = nullptr, double v = 0.0, int off = -1) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->value = v;
  n->a = std::move(a);
  n->b = std::move(b);
  n->src_offset = off;
  return n;
}

bool isConst(const NodePtr& n, double* v = nullptr) {
  if (n && n->op == Op::Const) {
    if (v) *v = n->value;
    return true;
  }
  return false;
}

bool isConstEq(const NodePtr& n, double c) {
  double v;
  return isConst(n, &v) && v == c;
}

NodePtr constant(double c) { return mk(Op::Const, nullptr, nullptr, c); }

// Light algebraic simplification keeps iterated symbolic Lie derivatives from
// blowing up; this is not CAS-grade rewriting, just constant folding and
// neutral/absorbing elements.
NodePtr add(NodePtr a, NodePtr b) {
  double ca, cb;
  if (isConst(a, &ca) && isConst(b, &cb)) return constant(ca + cb);
  if (isConstEq(a, 0.0)) return b;
  if (isConstEq(b, 0.0)) return a;
  return mk(Op::Add, std::move(a), std::move(b));
}

NodePtr neg(NodePtr a) {
  double c;
  if (isConst(a, &c)) return constant(-c);
  if (a->op == Op::Neg) return a->a;
  return mk(Op::Neg, std::move(a));
}

NodePtr sub(NodePtr a, NodePtr b) {
  double ca, cb;
  if (isConst(a, &ca) && isConst(b, &cb)) return constant(ca - cb);
  if (isConstEq(b, 0.0)) return a;
  if (isConstEq(a, 0.0)) return neg(std::move(b));
  return mk(Op::Sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
  double ca, cb;
  if (isConst(a, &ca) && isConst(b, &cb)) return constant(ca * cb);
  if (isConstEq(a, 0.0) || isConstEq(b, 0.0)) return constant(0.0);
  if (isConstEq(a, 1.0)) return b;
  if (isConstEq(b, 1.0)) return a;
  if (isConstEq(a, -1.0)) return neg(std::move(b));
  if (isConstEq(b, -1.0)) return neg(std::move(a));
  return mk(Op::Mul, std::move(a), std::move(b));
}

NodePtr div(NodePtr a, NodePtr b) {
  double ca, cb;
  if (isConst(b, &cb) && cb != 0.0 && isConst(a, &ca)) return constant(ca / cb);
  if (isConstEq(a, 0.0) && !isConstEq(b, 0.0)) return constant(0.0);
  if (isConstEq(b, 1.0)) return a;
  return mk(Op::Div, std::move(a), std::move(b));
}

NodePtr powNode(NodePtr a, NodePtr b) {
  double cb;
  if (isConst(b, &cb)) {
    if (cb == 0.0) return constant(1.0);
    if (cb == 1.0) return a;
    double ca;
    if (isConst(a, &ca)) {
      const double r = std::pow(ca, cb);
      if (std::isfinite(r)) return constant(r);
    }
  }
  return mk(Op::Pow, std::move(a), std::move(b));
}

NodePtr unary(Op op, NodePtr a) {
  double c;
  if (isConst(a, &c)) {
    double r = std::numeric_limits<double>::quiet_NaN();
    switch (op) {
      case Op::Neg:  r = -c; break;
      case Op::Sin:  r = std::sin(c); break;
      case Op::Cos:  r = std::cos(c); break;
      case Op::Tan:  r = std::tan(c); break;
      case Op::Exp:  r = std::exp(c); break;
      case Op::Log:  r = c > 0 ? std::log(c) : r; break;
      case Op::Sqrt: r = c >= 0 ? std::sqrt(c) : r; break;
      case Op::Tanh: r = std::tanh(c); break;
      case Op::Atan: r = std::atan(c); break;
      case Op::Abs:  r = std::fabs(c); break;
      default: break;
    }
    if (std::isfinite(r)) return constant(r);
  }
  if (op == Op::Neg) return neg(std::move(a));
  return mk(op, std::move(a));
}

// ---------------------------------------------------------------------------
// Parser: conventional precedence, ^ right-associative.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | power
//   power  := primary ('^' exponent)?
//   exponent := '-' exponent | power
//   primary := NUMBER | 'x' | 'y' | FUNC '(' expr ')' | '(' expr ')'
// ---------------------------------------------------------------------------

struct Parser {
  std::string_view src;
  std::size_t pos = 0;

  void skipWs() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }
  char peek() {
    skipWs();
    return pos < src.size() ? src[pos] : '\0';
  }
  bool accept(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what, std::size_t at) { throw ParseError(what, at); }

  NodePtr parseExpr() {
    NodePtr lhs = parseTerm();
    for (;;) {
      if (accept('+')) lhs = mk(Op::Add, lhs, parseTerm());
      else if (accept('-')) lhs = mk(Op::Sub, lhs, parseTerm());
      else return lhs;
    }
  }

  NodePtr parseTerm() {
    NodePtr lhs = parseFactor();
    for (;;) {
      if (accept('*')) lhs = mk(Op::Mul, lhs, parseFactor());
      else if (accept('/')) lhs = mk(Op::Div, lhs, parseFactor());
      else return lhs;
    }
  }

  NodePtr parseFactor() {
    if (accept('-')) {
      const int off = static_cast<int>(pos - 1);
      auto n = mk(Op::Neg, parseFactor());
      const_cast<ExprNode*>(n.get())->src_offset = off;
      return n;
    }
    return parsePower();
  }

  NodePtr parsePower() {
    NodePtr base = parsePrimary();
    if (accept('^')) return mk(Op::Pow, base, parseExponent());
    return base;
  }

  NodePtr parseExponent() {
    if (accept('-')) return mk(Op::Neg, parseExponent());
    return parsePower();
  }

  NodePtr parsePrimary() {
    skipWs();
    if (pos >= src.size()) fail("unexpected end of expression", pos);
    const std::size_t at = pos;
    const char c = src[pos];

    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src.data() + pos;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number", at);
      pos += static_cast<std::size_t>(end - begin);
      return mk(Op::Const, nullptr, nullptr, v, static_cast<int>(at));
    }

    if (c == '(') {
      ++pos;
      NodePtr inner = parseExpr();
      if (!accept(')')) fail("expected ')'", pos);
      return inner;
    }

    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t end = pos;
      while (end < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[end])) || src[end] == '_'))
        ++end;
      const std::string name(src.substr(pos, end - pos));
      pos = end;

      static const std::map<std::string, Op> kFuncs = {
          {"sin", Op::Sin},   {"cos", Op::Cos}, {"tan", Op::Tan},
          {"exp", Op::Exp},   {"log", Op::Log}, {"sqrt", Op::Sqrt},
          {"tanh", Op::Tanh}, {"atan", Op::Atan}, {"abs", Op::Abs}};

      if (name == "x") return mk(Op::VarX, nullptr, nullptr, 0.0, static_cast<int>(at));
      if (name == "y") return mk(Op::VarY, nullptr, nullptr, 0.0, static_cast<int>(at));

      auto it = kFuncs.find(name);
      if (it == kFuncs.end()) fail("unknown identifier '" + name + "'", at);
      // Reserved function names cannot appear without an argument list.
      if (!accept('(')) fail("function '" + name + "' expects '('", pos);
      NodePtr arg = parseExpr();
      if (peek() == ',') fail("function '" + name + "' takes exactly one argument", pos);
      if (!accept(')')) fail("expected ')'", pos);
      return mk(it->second, arg, nullptr, 0.0, static_cast<int>(at));
    }

    fail(std::string("unexpected character '") + c + "'", at);
  }
};

double evalNode(const ExprNode* n, double x, double y, const ExprNode*& fault) {
  switch (n->op) {
    case Op::Const: return n->value;
    case Op::VarX: return x;
    case Op::VarY: return y;
    default: break;
  }
  const double a = evalNode(n->a.get(), x, y, fault);
  if (fault) return a;
  double b = 0.0;
  if (n->b) {
    b = evalNode(n->b.get(), x, y, fault);
    if (fault) return b;
  }
  double r;
  switch (n->op) {
    case Op::Add: r = a + b; break;
    case Op::Sub: r = a - b; break;
    case Op::Mul: r = a * b; break;
    case Op::Div:
      if (b == 0.0) { fault = n; return std::numeric_limits<double>::quiet_NaN(); }
      r = a / b;
      break;
    case Op::Pow: {
      if (a < 0.0 && b != std::floor(b)) { fault = n; return std::numeric_limits<double>::quiet_NaN(); }
      if (a == 0.0 && b <= 0.0) { fault = n; return std::numeric_limits<double>::quiet_NaN(); }
      r = std::pow(a, b);
      break;
    }
    case Op::Neg: r = -a; break;
    case Op::Sin: r = std::sin(a); break;
    case Op::Cos: r = std::cos(a); break;
    case Op::Tan: r = std::tan(a); break;
    case Op::Exp: r = std::exp(a); break;
    case Op::Log:
      if (a <= 0.0) { fault = n; return std::numeric_limits<double>::quiet_NaN(); }
      r = std::log(a);
      break;
    case Op::Sqrt:
      if (a < 0.0) { fault = n; return std::numeric_limits<double>::quiet_NaN(); }
      r = std::sqrt(a);
      break;
    case Op::Tanh: r = std::tanh(a); break;
    case Op::Atan: r = std::atan(a); break;
    case Op::Abs: r = std::fabs(a); break;
    default: fault = n; return std::numeric_limits<double>::quiet_NaN();
  }
  if (!std::isfinite(r)) { fault = n; return std::numeric_limits<double>::quiet_NaN(); }
  return r;
}

NodePtr diffNode(const NodePtr& n, Var v) {
  switch (n->op) {
    case Op::Const: return constant(0.0);
    case Op::VarX: return constant(v == Var::X ? 1.0 : 0.0);
    case Op::VarY: return constant(v == Var::Y ? 1.0 : 0.0);
    default: break;
  }
  const NodePtr da = diffNode(n->a, v);
  switch (n->op) {
    case Op::Add: return add(da, diffNode(n->b, v));
    case Op::Sub: return sub(da, diffNode(n->b, v));
    case Op::Mul: return add(mul(da, n->b), mul(n->a, diffNode(n->b, v)));
    case Op::Div: {
      const NodePtr db = diffNode(n->b, v);
      return div(sub(mul(da, n->b), mul(n->a, db)), powNode(n->b, constant(2.0)));
    }
    case Op::Pow: {
      double c;
      if (isConst(n->b, &c)) {
        // c * u^(c-1) * u'; keeps integral exponents integral so negative
        // bases stay evaluable.
        return mul(mul(constant(c), powNode(n->a, constant(c - 1.0))), da);
      }
      const NodePtr db = diffNode(n->b, v);
      // u^v * (v' log u + v u'/u)
      return mul(powNode(n->a, n->b),
                 add(mul(db, unary(Op::Log, n->a)), div(mul(n->b, da), n->a)));
    }
    case Op::Neg: return neg(da);
    case Op::Sin: return mul(unary(Op::Cos, n->a), da);
    case Op::Cos: return neg(mul(unary(Op::Sin, n->a), da));
    case Op::Tan: return div(da, powNode(unary(Op::Cos, n->a), constant(2.0)));
    case Op::Exp: return mul(unary(Op::Exp, n->a), da);
    case Op::Log: return div(da, n->a);
    case Op::Sqrt: return div(da, mul(constant(2.0), unary(Op::Sqrt, n->a)));
    case Op::Tanh:
      return mul(sub(constant(1.0), powNode(unary(Op::Tanh, n->a), constant(2.0))), da);
    case Op::Atan: return div(da, add(constant(1.0), powNode(n->a, constant(2.0))));
    case Op::Abs: return mul(div(n->a, unary(Op::Abs, n->a)), da);
    default: return constant(0.0);
  }
}

void printNode(const ExprNode* n, std::string& out) {
  auto binary = [&](const char* sym) {
    out.push_back('(');
    printNode(n->a.get(), out);
    out += sym;
    printNode(n->b.get(), out);
    out.push_back(')');
  };
  auto func = [&](const char* name) {
    out += name;
    out.push_back('(');
    printNode(n->a.get(), out);
    out.push_back(')');
  };
  switch (n->op) {
    case Op::Const: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", n->value);
      // Negative literals are wrapped so printing stays unambiguous inside ^.
      if (n->value < 0) {
        out.push_back('(');
        out += buf;
        out.push_back(')');
      } else {
        out += buf;
      }
      break;
    }
    case Op::VarX: out.push_back('x'); break;
    case Op::VarY: out.push_back('y'); break;
    case Op::Add: binary("+"); break;
    case Op::Sub: binary("-"); break;
    case Op::Mul: binary("*"); break;
    case Op::Div: binary("/"); break;
    case Op::Pow: binary("^"); break;
    case Op::Neg:
      out += "(-";
      printNode(n->a.get(), out);
      out.push_back(')');
      break;
    case Op::Sin: func("sin"); break;
    case Op::Cos: func("cos"); break;
    case Op::Tan: func("tan"); break;
    case Op::Exp: func("exp"); break;
    case Op::Log: func("log"); break;
    case Op::Sqrt: func("sqrt"); break;
    case Op::Tanh: func("tanh"); break;
    case Op::Atan: func("atan"); break;
    case Op::Abs: func("abs"); break;
  }
}

NodePtr substNode(const NodePtr& n, const NodePtr& fx, const NodePtr& fy) {
  switch (n->op) {
    case Op::Const: return n;
    case Op::VarX: return fx;
    case Op::VarY: return fy;
    default: break;
  }
  NodePtr a = substNode(n->a, fx, fy);
  if (!n->b) {
    if (n->op == Op::Neg) return neg(std::move(a));
    return unary(n->op, std::move(a));
  }
  NodePtr b = substNode(n->b, fx, fy);
  switch (n->op) {
    case Op::Add: return add(std::move(a), std::move(b));
    case Op::Sub: return sub(std::move(a), std::move(b));
    case Op::Mul: return mul(std::move(a), std::move(b));
    case Op::Div: return div(std::move(a), std::move(b));
    case Op::Pow: return powNode(std::move(a), std::move(b));
    default: return n;
  }
}

bool dependsNode(const ExprNode* n, Var v) {
  if (!n) return false;
  if (n->op == Op::VarX) return v == Var::X;
  if (n->op == Op::VarY) return v == Var::Y;
  return dependsNode(n->a.get(), v) || dependsNode(n->b.get(), v);
}

}  // namespace

Expr Expr::parse(std::string_view src) {
  Parser p{src};
  NodePtr root = p.parseExpr();
  p.skipWs();
  if (p.pos != src.size()) p.fail("trailing characters", p.pos);
  return Expr(std::move(root));
}

EvalResult Expr::eval(double x, double y) const noexcept {
  EvalResult r;
  if (!root_) {
    static const ExprNode kEmpty{Op::Const, 0.0, nullptr, nullptr, -1};
    r.fault = &kEmpty;
    return r;
  }
  const ExprNode* fault = nullptr;
  r.value = evalNode(root_.get(), x, y, fault);
  r.fault = fault;
  if (fault) r.value = std::numeric_limits<double>::quiet_NaN();
  return r;
}

Expr Expr::diff(Var v) const {
  if (!root_) return Expr();
  return Expr(diffNode(root_, v));
}

std::string Expr::str() const {
  if (!root_) return "0";
  std::string out;
  printNode(root_.get(), out);
  return out;
}

Expr Expr::composed(const Expr& for_x, const Expr& for_y) const {
  if (!root_) return Expr();
  return Expr(substNode(root_, for_x.root_, for_y.root_));
}

bool Expr::dependsOn(Var v) const { return dependsNode(root_.get(), v); }

Expr Expr::constant(double c) { return Expr(pcoh::constant(c)); }
Expr Expr::x() { return Expr(mk(Op::VarX)); }
Expr Expr::y() { return Expr(mk(Op::VarY)); }

Expr operator+(const Expr& a, const Expr& b) { return Expr(add(a.root_, b.root_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(sub(a.root_, b.root_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(mul(a.root_, b.root_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(div(a.root_, b.root_)); }
Expr operator-(const Expr& a) { return Expr(neg(a.root_)); }

Expr Expr::pow(const Expr& base, const Expr& exponent) {
  return Expr(powNode(base.root(), exponent.root()));
}

Expr Expr::apply(ExprNode::Op op, const Expr& arg) { return Expr(unary(op, arg.root())); }

Expr sin(const Expr& e) { return Expr::apply(Op::Sin, e); }
Expr cos(const Expr& e) { return Expr::apply(Op::Cos, e); }
Expr exp(const Expr& e) { return Expr::apply(Op::Exp, e); }
Expr log(const Expr& e) { return Expr::apply(Op::Log, e); }
Expr sqrt(const Expr& e) { return Expr::apply(Op::Sqrt, e); }
Expr tanh(const Expr& e) { return Expr::apply(Op::Tanh, e); }
Expr atan(const Expr& e) { return Expr::apply(Op::Atan, e); }

}  // namespace pcoh
