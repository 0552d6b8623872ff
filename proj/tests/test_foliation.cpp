#include <doctest.h>

#include <cmath>

#include "planarcoh/fieldspec.hpp"
#include "planarcoh/registry.hpp"

using namespace pcoh;

TEST_CASE("polynomial family chart: two separatrices, one pair") {
  const ModelContext ctx = buildContext(registryModel("ex51:1"));
  CHECK(ctx.chart.seps.size() == 2);
  REQUIRE(ctx.chart.pairs.size() == 1);
  const AdjacentPair& pair = ctx.chart.pairs[0];
  CHECK(pair.a == 0.0);
  // junctions of the G-level transversals with y = +1 and y = -1 sit at x = 0
  CHECK(pair.p1.x == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::fabs(std::fabs(pair.p1.y) - 1.0) <= 1e-9);
  CHECK(pair.p2.x == doctest::Approx(0.0).epsilon(1e-9));

  // determinism: rebuilding gives the same junctions
  const ModelContext ctx2 = buildContext(registryModel("ex51:1"));
  CHECK(ctx2.chart.pairs[0].p1.x == pair.p1.x);
  CHECK(ctx2.chart.pairs[0].p1.y == pair.p1.y);
}

TEST_CASE("periodic family chart: separatrices bounded by the box, chain pairs") {
  SUBCASE("default box holds k = -1, 0, 1") {
    const ModelContext ctx = buildContext(registryModel("ex52:1"));
    CHECK(ctx.chart.seps.size() == 3);
    CHECK(ctx.chart.pairs.size() == 2);
  }
  SUBCASE("taller box holds k = -2..2") {
    Box b{-6, 6, -7, 7};
    const ModelContext ctx = buildContext(registryModel("ex52:1", b));
    CHECK(ctx.chart.seps.size() == 5);
    CHECK(ctx.chart.pairs.size() == 4);
    // each pair joins consecutive separatrices only
    for (const auto& p : ctx.chart.pairs) {
      const int k1 = std::stoi(p.s1.substr(1));
      const int k2 = std::stoi(p.s2.substr(1));
      CHECK(std::abs(k1 - k2) == 1);
    }
  }
}

TEST_CASE("constant field: zero separatrices, zero pairs, trivially valid") {
  const PlanarField f = PlanarField::parse("1", "0", "const");
  const FoliationChart chart = buildChart(f, {}, {}, Box{});
  CHECK(chart.seps.empty());
  CHECK(chart.pairs.empty());
}

TEST_CASE("validation failures carry locations") {
  SUBCASE("field with a zero is rejected") {
    const PlanarField f = PlanarField::parse("x", "y", "spiral");
    CHECK_THROWS_AS(buildChart(f, {}, {}, Box{}), ValidationError);
  }
  SUBCASE("a declared separatrix that is not a leaf is rejected") {
    const PlanarField f = PlanarField::parse("2*y", "1-y^2", "poly1");
    Separatrix s;
    s.id = "bad";
    s.desc = SeparatrixDesc::parse("y=0.5");
    CST cst;
    cst.emplace("bad", Transversal::levelSet(Expr::parse("2*y*exp(x)"), 1.0, {0.0, 0.5}));
    CHECK_THROWS_WITH_AS(buildChart(f, {s}, std::move(cst), Box{}),
                         doctest::Contains("not a leaf"), ValidationError);
  }
  SUBCASE("a curve tangent to the foliation is rejected as transversal") {
    const PlanarField f = PlanarField::parse("2*y", "1-y^2", "poly1");
    Separatrix s;
    s.id = "s+";
    s.desc = SeparatrixDesc::parse("y=1");
    CST cst;
    // level set of the first integral: everywhere tangent to the leaves
    cst.emplace("s+", Transversal::levelSet(Expr::parse("(y^2-1)*exp(x)"), -1.0, {0.0, 0.0}));
    CHECK_THROWS_WITH_AS(buildChart(f, {s}, std::move(cst), Box{}),
                         doctest::Contains("tangent"), ValidationError);
  }
  SUBCASE("a CST that misses whole regions is a coverage gap") {
    const PlanarField f = PlanarField::parse("2*y", "1-y^2", "poly1");
    Separatrix s;
    s.id = "s+";
    s.desc = SeparatrixDesc::parse("y=1");
    CST cst;
    cst.emplace("s+", Transversal::levelSet(Expr::parse("2*y*exp(x)"), 2.0, {0.0, 1.0}));
    // leaves with y < -1 never reach {G = 2}
    CHECK_THROWS_WITH_AS(buildChart(f, {s}, std::move(cst), Box{}),
                         doctest::Contains("coverage gap"), ValidationError);
  }
  SUBCASE("asymmetric adjacency is rejected") {
    const PlanarField f = PlanarField::parse("2*y", "1-y^2", "poly1");
    Separatrix a, b;
    a.id = "s-";
    a.desc = SeparatrixDesc::parse("y=-1");
    a.inseparable_from = {"s+"};
    b.id = "s+";
    b.desc = SeparatrixDesc::parse("y=1");
    CST cst;
    cst.emplace("s-", Transversal::levelSet(Expr::parse("2*y*exp(x)"), -2.0, {0.0, -1.0}));
    cst.emplace("s+", Transversal::levelSet(Expr::parse("2*y*exp(x)"), 2.0, {0.0, 1.0}));
    CHECK_THROWS_WITH_AS(buildChart(f, {a, b}, std::move(cst), Box{}),
                         doctest::Contains("symmetrically"), ValidationError);
  }
  SUBCASE("self-inseparability is rejected") {
    const PlanarField f = PlanarField::parse("2*y", "1-y^2", "poly1");
    Separatrix a;
    a.id = "s+";
    a.desc = SeparatrixDesc::parse("y=1");
    a.inseparable_from = {"s+"};
    CST cst;
    cst.emplace("s+", Transversal::levelSet(Expr::parse("2*y*exp(x)"), 2.0, {0.0, 1.0}));
    CHECK_THROWS_WITH_AS(buildChart(f, {a}, std::move(cst), Box{}),
                         doctest::Contains("itself"), ValidationError);
  }
}

TEST_CASE("rectified interval of the polynomial pair collapses to a point") {
  const ModelContext ctx = buildContext(registryModel("ex51:1"));
  const Interval iv = rectifiedInterval(ctx.chart, ctx.chart.pairs[0], ctx.ham.F, ctx.ham.G);
  CHECK(iv.a == 0.0);
  CHECK(iv.b1 <= iv.b2);
  CHECK(std::fabs(iv.b1) <= 1e-6);
  CHECK(std::fabs(iv.b2) <= 1e-6);
  // the transversal levels bracket the interval strictly
  CHECK(-2.0 < iv.b1);
  CHECK(iv.b2 < 2.0);
}

TEST_CASE("rectified interval bound agrees with the level-curve bisection oracle") {
  // Oracle: the upper bound of the interval is the edge of the set of G-levels
  // whose level-curve component through the upper separatrix still reaches an
  // inner leaf {F = -delta}. Traced with the (unit-speed) Hamiltonian field of
  // G, which is tangent to the G-level curves -- an entirely different route
  // than the flow-limit extrapolation used by the library.
  const ModelContext ctx = buildContext(registryModel("ex51:1"));
  const Expr G = ctx.ham.G;
  const Expr Gx = G.diff(Var::X), Gy = G.diff(Var::Y);
  const Expr norm = sqrt(Gx * Gx + Gy * Gy);
  const PlanarField gflow = PlanarField::make(Gy / norm, (-Gx) / norm, "g-curves");

  const double delta = 0.25;
  const Transversal inner =
      Transversal::levelSet(Expr::parse("(y^2-1)*exp(x)"), -delta, {0.0, 0.0});
  FlowOptions fo;
  fo.box = ctx.chart.box;
  fo.tol = 1e-9;

  auto curve_reaches_inner = [&](double g) -> bool {
    if (g <= 0.0) return false;  // the level set does not even meet y = 1
    const Point2 start{std::log(g / 2.0), 1.0};
    if (!fo.integrationBox().contains(start)) return false;
    return findCrossing(gflow, start, inner, 200.0, fo).has_value();
  };

  double lo = -1.0, hi = 1.0;  // indicator is false at -1, true at +1
  REQUIRE(curve_reaches_inner(hi));
  REQUIRE(!curve_reaches_inner(lo));
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (curve_reaches_inner(mid) ? hi : lo) = mid;
  }
  const double b2_oracle = 0.5 * (lo + hi);
  CHECK(std::fabs(b2_oracle) <= 1e-9);

  const Interval iv = rectifiedInterval(ctx.chart, ctx.chart.pairs[0], ctx.ham.F, ctx.ham.G);
  CHECK(std::fabs(iv.b2 - b2_oracle) <= 1e-6);
}

TEST_CASE("inseparability witnesses cross both transversals") {
  const ModelContext ctx = buildContext(registryModel("ex51:1"));
  const AdjacentPair& pair = ctx.chart.pairs[0];
  FlowOptions fo;
  fo.box = ctx.chart.box;
  const auto c1 =
      findCrossing(ctx.field, pair.region_sample, *ctx.chart.transversalOf(pair.s1), 1e3, fo);
  const auto c2 =
      findCrossing(ctx.field, pair.region_sample, *ctx.chart.transversalOf(pair.s2), 1e3, fo);
  CHECK(c1.has_value());
  CHECK(c2.has_value());
}
