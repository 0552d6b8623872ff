#include <doctest.h>

#include <cmath>

#include "planarcoh/expr.hpp"

using namespace pcoh;

namespace {

double ev(const Expr& e, double x, double y) {
  const EvalResult r = e.eval(x, y);
  REQUIRE(r.ok());
  return r.value;
}

double ev(const std::string& src, double x, double y) { return ev(Expr::parse(src), x, y); }

// Central finite differences used as the independent derivative oracle.
double fd1(const Expr& e, Var v, double x, double y, double h) {
  const double dx = v == Var::X ? h : 0.0, dy = v == Var::Y ? h : 0.0;
  return (ev(e, x + dx, y + dy) - ev(e, x - dx, y - dy)) / (2 * h);
}

double fd2_4th(const Expr& e, Var v, double x, double y, double h) {
  auto at = [&](double s) {
    const double dx = v == Var::X ? s : 0.0, dy = v == Var::Y ? s : 0.0;
    return ev(e, x + dx, y + dy);
  };
  return (-at(2 * h) + 16 * at(h) - 30 * at(0) + 16 * at(-h) - at(-2 * h)) / (12 * h * h);
}

}  // namespace

TEST_CASE("parse and evaluate reference generators") {
  CHECK(ev("(1-y^2)*exp(x)", 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  // generator of the second polynomial family member vanishes on y = 1
  CHECK(ev("(1+y)^2*(1-y)*exp(x)", 0, 1) == doctest::Approx(0.0).epsilon(1e-15));
  const double pi = std::acos(-1.0);
  CHECK(ev("-sin(y/2)^0*sin(y)*exp(x)", 0, pi / 2) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(ev("x", 3, 7) == 3);
  CHECK(ev("y*exp(x)", 0, -1) == -1);
  CHECK(ev("exp(x)*cos(y)", 0, 0) == 1);
}

TEST_CASE("grammar corners") {
  // unary minus binds looser than ^: -x^2 == -(x^2)
  CHECK(ev("-x^2", 3, 0) == -9);
  // ^ right-associative
  CHECK(ev("2^3^2", 0, 0) == 512);
  CHECK(ev("2^-2", 0, 0) == 0.25);
  CHECK(ev("1 - -1", 0, 0) == 2);

  CHECK_THROWS_AS((void)Expr::parse("1 +"), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("foo(3)"), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("sin"), ParseError);        // reserved, needs '('
  CHECK_THROWS_AS((void)Expr::parse("sin(x, y)"), ParseError);  // wrong arity
  CHECK_THROWS_AS((void)Expr::parse("(x"), ParseError);
  try {
    (void)Expr::parse("x + bogus");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("domain violations are reported, never silent NaN") {
  const Expr e = Expr::parse("log(x)");
  const EvalResult bad = e.eval(-1.0, 0.0);
  CHECK(!bad.ok());
  CHECK(bad.fault != nullptr);
  CHECK(std::isnan(bad.value));
  CHECK(e.eval(2.0, 0.0).ok());

  CHECK(!Expr::parse("1/x").eval(0.0, 0.0).ok());
  CHECK(!Expr::parse("sqrt(x)").eval(-2.0, 0.0).ok());
  CHECK(!Expr::parse("x^0.5").eval(-2.0, 0.0).ok());
  // integral exponents of negative bases are fine
  CHECK(ev("x^3", -2, 0) == -8);
  CHECK(ev("(1+y)^2", 0, -3) == 4);
}

TEST_CASE("exact derivatives vs finite differences") {
  CHECK(ev(Expr::parse("1-y^2").diff(Var::Y), 5.0, 1.0) == doctest::Approx(-2.0).epsilon(1e-15));

  // x-translation covariance of the generator: d/dx F == F
  const Expr F = Expr::parse("(y^2-1)*exp(x)");
  const Expr Fx = F.diff(Var::X);
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-2, 2), y = rng.uniform(-2, 2);
    CHECK(ev(Fx, x, y) == doctest::Approx(ev(F, x, y)).epsilon(1e-14));
  }

  // random expression, first derivative vs central differences at O(h^2)
  const Expr e = Expr::parse("sin(x*y) + exp(x/2)*tanh(y) - atan(x-y)");
  for (int i = 0; i < 40; ++i) {
    const double x = rng.uniform(-1.5, 1.5), y = rng.uniform(-1.5, 1.5);
    for (Var v : {Var::X, Var::Y}) {
      const double exact = ev(e.diff(v), x, y);
      const double approx = fd1(e, v, x, y, 1e-6);
      CHECK(exact == doctest::Approx(approx).epsilon(1e-7));
    }
  }
}

TEST_CASE("second derivatives vs fourth-order stencil on the periodic generator") {
  const Expr F = Expr::parse("-sin(y/2)^0*sin(y)*exp(x)");
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-1.5, 1.5), y = rng.uniform(-3, 3);
    for (Var v : {Var::X, Var::Y}) {
      const double exact = ev(F.diff(v).diff(v), x, y);
      const double approx = fd2_4th(F, v, x, y, 1e-2);
      const double scale = std::max(1.0, std::fabs(exact));
      CHECK(std::fabs(exact - approx) / scale <= 1e-6);
    }
  }
}

TEST_CASE("mixed partials commute") {
  for (const char* src : {"exp(x)*sin(y)", "(1+y)^3*(1-y)*exp(x)", "atan(x*y)+sqrt(1+x^2+y^2)",
                          "tanh(x-y)*cos(x+y)"}) {
    const Expr e = Expr::parse(src);
    const Expr dxy = e.diff(Var::X).diff(Var::Y);
    const Expr dyx = e.diff(Var::Y).diff(Var::X);
    Rng rng(3);
    for (int i = 0; i < 60; ++i) {
      const double x = rng.uniform(-2, 2), y = rng.uniform(-2, 2);
      const double a = ev(dxy, x, y), b = ev(dyx, x, y);
      CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));
    }
  }
}

TEST_CASE("print round trip is evaluation-identical") {
  const char* sources[] = {"(1-y^2)*exp(x)", "2*y/(1+y^2)", "-x^2+y^-2",
                           "sin(x)*cos(y)-tan(x/4)+abs(y)", "x^y", "sqrt(x^2+y^2)"};
  Rng rng(23);
  for (const char* src : sources) {
    const Expr e = Expr::parse(src);
    const Expr back = Expr::parse(e.str());
    for (int i = 0; i < 1000 / 6; ++i) {
      const double x = rng.uniform(0.1, 2), y = rng.uniform(0.1, 2);
      const EvalResult a = e.eval(x, y), b = back.eval(x, y);
      REQUIRE(a.ok() == b.ok());
      if (a.ok())
        CHECK(std::fabs(a.value - b.value) <= 1e-15 * std::max(1.0, std::fabs(a.value)));
    }
  }
}

TEST_CASE("diff is linear and obeys the chain rule") {
  const Expr e1 = Expr::parse("exp(x)*sin(y)");
  const Expr e2 = Expr::parse("x*y^2 - atan(y)");
  const double alpha = 3.25;
  const Expr combo = Expr::constant(alpha) * e1 + e2;
  const Expr lhs = combo.diff(Var::Y);
  const Expr rhs = Expr::constant(alpha) * e1.diff(Var::Y) + e2.diff(Var::Y);

  const Expr F = Expr::parse("(y^2-1)*exp(x)");
  const Expr chain_lhs = sin(F).diff(Var::X);
  const Expr chain_rhs = cos(F) * F.diff(Var::X);

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-2, 2), y = rng.uniform(-2, 2);
    CHECK(std::fabs(ev(lhs, x, y) - ev(rhs, x, y)) <=
          1e-12 * std::max(1.0, std::fabs(ev(lhs, x, y))));
    CHECK(std::fabs(ev(chain_lhs, x, y) - ev(chain_rhs, x, y)) <=
          1e-12 * std::max(1.0, std::fabs(ev(chain_lhs, x, y))));
  }
}

TEST_CASE("composition substitutes variables") {
  const Expr ghat = Expr::parse("y/sqrt(x^2+y^2)");  // in rectified variables
  const Expr F = Expr::parse("(y^2-1)*exp(x)");
  const Expr G = Expr::parse("2*y*exp(x)");
  const Expr g = ghat.composed(F, G);
  // pullback collapses to 2y/(1+y^2)
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-2, 2), y = rng.uniform(-2, 2);
    const double expect = 2 * y / (1 + y * y);
    CHECK(ev(g, x, y) == doctest::Approx(expect).epsilon(1e-13));
  }
  CHECK(Expr::parse("x").dependsOn(Var::X));
  CHECK(!Expr::parse("x").dependsOn(Var::Y));
}
