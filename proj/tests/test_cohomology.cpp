#include <doctest.h>

#include <cmath>

#include "planarcoh/fieldspec.hpp"
#include "planarcoh/registry.hpp"

using namespace pcoh;

namespace {

const ModelContext& poly1() {
  static ModelContext ctx = buildContext(registryModel("ex51:1"));
  return ctx;
}

GapSchedule fieldSchedule(int steps = 16) {
  GapSchedule s;
  s.time = TimeParam::Field;
  s.steps = steps;
  return s;
}

GapSchedule hamSchedule(int steps = 12) {
  GapSchedule s;
  s.time = TimeParam::Hamiltonian;
  s.steps = steps;
  return s;
}

}  // namespace

TEST_CASE("gap of zero is zero") {
  const auto& ctx = poly1();
  for (auto sched : {fieldSchedule(8), hamSchedule(8)}) {
    const GapResult r =
        gapBetween(ctx.chart, ctx.dp, Expr::parse("0"), ctx.chart.pairs[0], 0, sched);
    CHECK(r.cls == SeqClass::Finite);
    CHECK(std::fabs(r.value) <= 1e-12);
  }
}

TEST_CASE("field-time gap of constants diverges with monotone partials") {
  const auto& ctx = poly1();
  for (const char* gsrc : {"1", "1+x^2+y^4"}) {
    const GapResult r = gapBetween(ctx.chart, ctx.dp, Expr::parse(gsrc), ctx.chart.pairs[0], 0,
                                   fieldSchedule(18));
    INFO(gsrc);
    CHECK(r.cls == SeqClass::Divergent);
    REQUIRE(r.partials.size() >= 6);
    for (std::size_t i = 0; i + 1 < r.partials.size(); ++i)
      CHECK(std::fabs(r.partials[i + 1]) >= std::fabs(r.partials[i]) - 1e-12);
  }
}

TEST_CASE("unit-speed gap reproduces boundary differences of known solutions") {
  // For g produced as the derivative of a smooth f along the normalized
  // kernel field, the gap is exactly f(p2) - f(p1).
  const auto& ctx = poly1();
  const AdjacentPair& pair = ctx.chart.pairs[0];

  SUBCASE("the odd reference right-hand side has gap zero") {
    const GapResult r =
        gapBetween(ctx.chart, ctx.dp, Expr::parse("2*y/(1+y^2)"), pair, 0, hamSchedule());
    REQUIRE(r.cls == SeqClass::Finite);
    // solution (1+y^2) e^x takes the value 2 at both junctions (0, 1) and (0, -1)
    CHECK(std::fabs(r.value - 0.0) <= 1e-5);
  }

  SUBCASE("five random smooth solutions") {
    const char* fs[] = {"x*y", "sin(x)+y^2", "x^2-y^3/3", "tanh(x)*y", "exp(y/4)+x"};
    double gap1 = 0, gap2 = 0;
    for (const char* fsrc : fs) {
      const Expr f = Expr::parse(fsrc);
      const Expr g = ctx.dp.lieXiF(f);
      const GapResult r = gapBetween(ctx.chart, ctx.dp, g, pair, 0, hamSchedule());
      REQUIRE(r.cls == SeqClass::Finite);
      const double expect = f(pair.p2) - f(pair.p1);
      INFO(fsrc);
      CHECK(std::fabs(r.value - expect) <= 1e-5);
      if (fsrc == fs[0]) gap1 = r.value;
      if (fsrc == fs[1]) gap2 = r.value;
    }

    // linearity on the same two functions
    const Expr combo = Expr::constant(2.5) * ctx.dp.lieXiF(Expr::parse("x*y")) +
                       ctx.dp.lieXiF(Expr::parse("sin(x)+y^2"));
    const GapResult rc = gapBetween(ctx.chart, ctx.dp, combo, pair, 0, hamSchedule());
    REQUIRE(rc.cls == SeqClass::Finite);
    CHECK(std::fabs(rc.value - (2.5 * gap1 + gap2)) <= 1e-6);
  }

  SUBCASE("field-time variant against the field equation") {
    const Expr f = Expr::parse("x*y - tanh(y)");
    const Expr g = ctx.field.lieDerivative(f);
    const GapResult r = gapBetween(ctx.chart, ctx.dp, g, pair, 0, fieldSchedule());
    REQUIRE(r.cls == SeqClass::Finite);
    CHECK(std::fabs(r.value - (f(pair.p2) - f(pair.p1))) <= 1e-5);
  }
}

TEST_CASE("gap finiteness is CST-independent up to the separatrix corrections") {
  const auto& ctx = poly1();
  // second CST: G-levels -4 and 4, junctions at (log 2, -1) and (log 2, 1)
  FieldSpec spec2 = registryModel("ex51:1");
  spec2.transversals[0].level = -4.0;
  spec2.transversals[0].anchor = {std::log(2.0), -1.0};
  spec2.transversals[1].level = 4.0;
  spec2.transversals[1].anchor = {std::log(2.0), 1.0};
  const ModelContext ctx2 = buildContext(spec2);

  const Expr f = Expr::parse("x*y");
  const Expr g = ctx.dp.lieXiF(f);
  const Expr w = ctx.field.lieDerivative(ctx.ham.G);

  const GapResult gap1 = gapBetween(ctx.chart, ctx.dp, g, ctx.chart.pairs[0], 0, hamSchedule());
  const GapResult gap2 =
      gapBetween(ctx2.chart, ctx2.dp, g, ctx2.chart.pairs[0], 0, hamSchedule());
  REQUIRE(gap1.cls == SeqClass::Finite);
  REQUIRE(gap2.cls == SeqClass::Finite);

  FlowOptions fo;
  fo.box = ctx.chart.box;
  // A1: along the first separatrix from the wide-CST junction to the narrow
  // one; A2: along the second separatrix from the narrow junction out to the
  // wide one. The limit path of the wide gap is A1 + (narrow gap) + A2.
  const auto a1 = findCrossing(ctx.field, ctx2.chart.pairs[0].p1,
                               *ctx.chart.transversalOf("s-"), 100.0, fo, &g, &w);
  const auto a2 = findCrossing(ctx.field, ctx.chart.pairs[0].p2,
                               *ctx2.chart.transversalOf("s+"), 100.0, fo, &g, &w);
  REQUIRE(a1);
  REQUIRE(a2);
  CHECK(std::fabs(gap2.value - (gap1.value + a1->integral + a2->integral)) <= 1e-6);
}

TEST_CASE("diagnosis ladders on the fixture functions") {
  const auto& ctx = poly1();
  const Expr F = ctx.ham.F, G = ctx.ham.G;

  SUBCASE("pullbacks of globally smooth functions solve at every tested order") {
    const Expr ghat = Expr::parse("x*y");  // rectified-plane coordinates
    const SolvabilityVerdict v = diagnose(ctx.chart, ctx.dp, ghat.composed(F, G), 4);
    CHECK(v.solvable_to_order == 4);
    CHECK(!v.inconclusive);
  }
  SUBCASE("the even reference function solves at order 0 only") {
    const Expr g = Expr::parse("(1-y^2)/(1+y^2)");
    const SolvabilityVerdict v = diagnose(ctx.chart, ctx.dp, g, 2);
    CHECK(v.solvable_to_order == 0);
    REQUIRE(v.table.size() >= 2);
    CHECK(v.table[0].gap.cls == SeqClass::Finite);
    CHECK(v.table[1].gap.cls == SeqClass::Divergent);
  }
  SUBCASE("a reciprocal-distance pullback already fails order 0") {
    const Expr ghat = Expr::parse("1/sqrt(x^2+y^2)");
    const SolvabilityVerdict v = diagnose(ctx.chart, ctx.dp, ghat.composed(F, G), 1);
    CHECK(v.solvable_to_order == -1);
  }
  SUBCASE("no pairs means vacuously solvable") {
    const PlanarField cf = PlanarField::parse("1", "0", "const");
    const FoliationChart chart = buildChart(cf, {}, {}, Box{});
    HamiltonianPair ham{Expr::parse("y"), Expr::parse("x"), {}, 0.05};
    Rng rng(3);
    const DerivedPair dp = derivePair(cf, ham, Box{}, rng);
    const SolvabilityVerdict v = diagnose(chart, dp, Expr::parse("exp(x)*sin(y)"), 3);
    CHECK(v.solvable_to_order == 3);
  }
}

TEST_CASE("characteristic solver reproduces the closed-form solution") {
  const auto& ctx = poly1();
  const Expr g = Expr::parse("2*y/(1+y^2)");
  const Expr f_exact = Expr::parse("(1+y^2)*exp(x)");

  GridSpec grid;
  grid.box = Box{-2, 2, -2, 2};
  grid.nx = 21;
  grid.ny = 21;
  std::map<std::string, Expr> initial{{"s-", f_exact}, {"s+", f_exact}};
  SolveOptions opt;
  const SolutionGrid sol = solveGrid(ctx.chart, ctx.dp, g, grid, initial, opt);

  CHECK(!sol.extension_failure);
  REQUIRE(!sol.stitches.empty());
  CHECK(sol.stitches[0].performed);
  CHECK(sol.stitches[0].cls == SeqClass::Finite);
  CHECK(sol.stitches[0].data_mismatch <= 1e-6);

  double max_rel = 0;
  int ok_cells = 0;
  for (std::size_t i = 0; i < sol.f.size(); ++i) {
    if (sol.status[i] != CellStatus::Ok) continue;
    ++ok_cells;
    const double expect = f_exact(sol.xs[i], sol.ys[i]);
    max_rel = std::max(max_rel, std::fabs(sol.f[i] - expect) / std::max(1.0, std::fabs(expect)));
  }
  CHECK(ok_cells == 21 * 21);
  CHECK(max_rel <= 1e-5);
  CHECK(sol.maxResidual() <= 1e-5);
}

TEST_CASE("without initial data the solution is exact modulo kernel") {
  // Increments along any single leaf are data-independent.
  const auto& ctx = poly1();
  const Expr g = Expr::parse("2*y/(1+y^2)");
  const Expr f_exact = Expr::parse("(1+y^2)*exp(x)");
  const Expr w = ctx.field.lieDerivative(ctx.ham.G);

  GridSpec grid;
  grid.box = Box{-1, 1, -0.8, 0.8};
  grid.nx = 5;
  grid.ny = 5;
  const SolutionGrid sol = solveGrid(ctx.chart, ctx.dp, g, grid, {}, {});

  FlowOptions fo;
  fo.box = ctx.chart.box;
  for (std::size_t i = 0; i < sol.f.size(); ++i) {
    REQUIRE(sol.status[i] == CellStatus::Ok);
    const Point2 p{sol.xs[i], sol.ys[i]};
    const FlowResult q = integrateFlow(ctx.field, p, 0.4, fo);
    REQUIRE(q.status == OdeStatus::ReachedTime);
    const double inc_exact = f_exact(q.endpoint) - f_exact(p);
    GridSpec single;
    single.box = Box{q.endpoint.x, q.endpoint.x, q.endpoint.y, q.endpoint.y};
    single.nx = 1;
    single.ny = 1;
    const SolutionGrid at = solveGrid(ctx.chart, ctx.dp, g, single, {}, {});
    REQUIRE(at.status[0] == CellStatus::Ok);
    CHECK(std::fabs((at.f[0] - sol.f[i]) - inc_exact) <= 1e-6);
  }
}

TEST_CASE("grid points whose leaf reaches no transversal are flagged") {
  const auto& ctx = poly1();
  // Deep in the lower region the crossing with {G = -2} sits far outside any
  // reasonable integration window.
  GridSpec grid;
  grid.box = Box{5.0, 5.0, -5.0, -5.0};
  grid.nx = 1;
  grid.ny = 1;
  const SolutionGrid sol = solveGrid(ctx.chart, ctx.dp, Expr::parse("0"), grid, {}, {});
  CHECK(sol.status[0] == CellStatus::Unreachable);
  CHECK(std::isnan(sol.f[0]));
}

TEST_CASE("divergent right-hand side: extension failure is reported at the pair") {
  const auto& ctx = poly1();
  // pullback of the reciprocal distance: e^{-x}/(1+y^2) up to scale
  const Expr g = Expr::parse("1/sqrt(x^2+y^2)").composed(ctx.ham.F, ctx.ham.G);
  GridSpec grid;
  grid.box = Box{-1.5, 1.5, -1.8, 1.8};
  grid.nx = 7;
  grid.ny = 7;
  const SolutionGrid sol = solveGrid(ctx.chart, ctx.dp, g, grid, {}, {});
  CHECK(sol.extension_failure);
  CHECK(sol.failure_pair == "s-|s+");
  int blocked = 0;
  for (auto st : sol.status)
    if (st == CellStatus::ExtensionBlocked) ++blocked;
  CHECK(blocked > 0);  // the region beyond the upper separatrix is stranded
}

TEST_CASE("solver crosses a pair of the periodic family") {
  Box tall{-6, 6, -7, 7};
  const ModelContext ctx = buildContext(registryModel("ex52:1", tall));
  const double pi = std::acos(-1.0);
  const Expr g = Expr::parse("2*x");
  const Expr f_exact = Expr::parse("2*((x-1)*cos(y)-y*sin(y))*exp(x)");

  std::map<std::string, Expr> initial;
  for (const auto& s : ctx.chart.seps) initial.emplace(s.id, f_exact);

  GridSpec grid;
  grid.box = Box{-1, 1, 0.2, 2 * pi - 0.2};  // spans the pair between y=0 and y=pi
  grid.nx = 9;
  grid.ny = 17;
  const SolutionGrid sol = solveGrid(ctx.chart, ctx.dp, g, grid, initial, {});
  CHECK(!sol.extension_failure);

  double max_rel = 0;
  for (std::size_t i = 0; i < sol.f.size(); ++i) {
    REQUIRE(sol.status[i] == CellStatus::Ok);
    const double expect = f_exact(sol.xs[i], sol.ys[i]);
    max_rel = std::max(max_rel, std::fabs(sol.f[i] - expect) / std::max(1.0, std::fabs(expect)));
  }
  CHECK(max_rel <= 1e-5);
  // at least one continuation across a pair happened and matched the data
  bool stitched = false;
  for (const auto& st : sol.stitches)
    if (st.performed && st.cls == SeqClass::Finite) {
      stitched = true;
      CHECK(st.data_mismatch <= 1e-5);
    }
  CHECK(stitched);
}

TEST_CASE("rectified antiderivative solver") {
  RectRegion region;
  region.x1 = -2.0;
  region.x2 = 0.5;
  region.c1 = -2.0;
  region.c2 = 2.0;
  region.a = 0.0;
  region.approach = -1;
  region.excluded_y = std::make_pair(0.0, 0.0);

  SUBCASE("constant right-hand side integrates to the coordinate") {
    RectifiedSolution rs(Expr::parse("1"), region, 0.0);
    const auto v = rs.value(-0.5, 1.25);
    REQUIRE(v);
    CHECK(*v == doctest::Approx(1.25).epsilon(1e-10));
  }
  SUBCASE("odd kernel integrates to the distance function") {
    RectifiedSolution rs(Expr::parse("y/sqrt(x^2+y^2)"), region, 0.0);
    for (double xp : {-1.5, -0.75, -0.1}) {
      for (double yp : {-1.5, -0.4, 0.8, 1.9}) {
        const auto v = rs.value(xp, yp);
        REQUIRE(v);
        const double expect = std::hypot(xp, yp) - std::fabs(xp);
        CHECK(std::fabs(*v - expect) <= 1e-8);
      }
    }
  }
  SUBCASE("even kernel integrates to the logarithmic profile") {
    RectifiedSolution rs(Expr::parse("x/sqrt(x^2+y^2)"), region, 0.0);
    auto closed = [](double xp, double yp) {
      return xp * std::log(2 * (yp + std::hypot(xp, yp)));
    };
    for (double xp : {-1.5, -0.5, -0.05}) {
      for (double yp : {0.4, 1.2, 1.9}) {
        const auto v = rs.value(xp, yp);
        REQUIRE(v);
        CHECK(std::fabs(*v - (closed(xp, yp) - closed(xp, 0.0))) <= 1e-7);
      }
    }
  }
  SUBCASE("crossing the excluded rectangle is refused") {
    RectRegion r2 = region;
    r2.excluded_y = std::make_pair(-0.25, 0.25);
    RectifiedSolution rs(Expr::parse("1"), r2, -1.0);
    std::string why;
    CHECK(rs.value(0.25, 1.0, &why) == std::nullopt);  // beyond a, other side
    CHECK(!why.empty());
    CHECK(rs.value(0.25, -1.0).has_value());  // same side as baseline
    CHECK(rs.value(-0.5, 1.0).has_value());   // plain side: no band
  }
  SUBCASE("pullback of the rectified solution solves the equation") {
    // midpoint form: (f(q) - f(p)) / (G(q) - G(p)) equals ghat at the midpoint
    // level up to second order in the step
    const auto& ctx = poly1();
    RectifiedSolution rs(Expr::parse("y/sqrt(x^2+y^2)"), region, 0.0);
    FlowOptions fo;
    fo.box = ctx.chart.box;
    Rng rng(12);
    for (int i = 0; i < 20; ++i) {
      const Point2 p = rng.inBox(Box{-1.5, 0.5, -0.7, 0.7});
      const FlowResult fr = integrateFlow(ctx.field, p, 1e-4, fo);
      const Point2 q = fr.endpoint;
      const double Fp = ctx.ham.F(p), Gp = ctx.ham.G(p), Gq = ctx.ham.G(q);
      const auto fp = rs.value(Fp, Gp), fq = rs.value(ctx.ham.F(q), Gq);
      REQUIRE(fp);
      REQUIRE(fq);
      const double lie = (*fq - *fp) / (Gq - Gp);
      const double gm = 0.5 * (Gp + Gq);
      const double ghat_mid = gm / std::hypot(Fp, gm);
      CHECK(std::fabs(lie - ghat_mid) <= 1e-5);
    }
  }
}

TEST_CASE("germ functional h_I") {
  GermInterval iv;
  iv.a = 0.0;
  iv.b1 = 0.0;
  iv.b2 = 0.0;
  iv.c1 = -2.0;
  iv.c2 = 2.0;
  iv.approach = -1;

  SUBCASE("odd integrands give identically zero traces") {
    const Expr ghat = Expr::parse("y/sqrt(x^2+y^2)");
    for (double xp : {-1.0, -0.3, -0.01}) {
      const QuadResult q = germH(ghat, iv, 1.0, xp);
      REQUIRE(q.converged);
      CHECK(std::fabs(q.value) <= 1e-10);
    }
  }
  SUBCASE("constants give the widened interval length exactly") {
    GermInterval iv2 = iv;
    iv2.b1 = -0.5;
    iv2.b2 = 0.75;
    const QuadResult q = germH(Expr::parse("1"), iv2, 0.5, -0.2);
    REQUIRE(q.converged);
    CHECK(q.value == doctest::Approx((iv2.b2 - iv2.b1) + 2 * 0.5).epsilon(1e-12));
  }
  SUBCASE("even kernel against its closed antiderivative") {
    const Expr ghat = Expr::parse("x/sqrt(x^2+y^2)");
    const double eps = 1.0;
    for (double xp : {-0.5, -0.1}) {
      const QuadResult q = germH(ghat, iv, eps, xp);
      REQUIRE(q.converged);
      const double expect = 2 * xp * std::asinh(eps / std::fabs(xp));
      CHECK(std::fabs(q.value - expect) <= 1e-8);
    }
  }
  SUBCASE("the widening must stay inside the chart") {
    CHECK_THROWS_AS(germH(Expr::parse("1"), iv, 2.5, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(germH(Expr::parse("1"), iv, 0.0, -0.1), std::invalid_argument);
  }
  SUBCASE("a non-integrable interior singularity is reported") {
    const Expr ghat = Expr::parse("1/x^2 + 1/y^2");
    const QuadResult q = germH(ghat, iv, 1.0, -0.5);
    CHECK(q.divergent);
    CHECK(std::fabs(q.trouble_at) <= 0.1);  // the bad point is the interior y' = 0
  }
}

TEST_CASE("regularity ladder classifications are stable in the widening") {
  GermInterval iv;
  iv.a = 0.0;
  iv.b1 = 0.0;
  iv.b2 = 0.0;
  iv.c1 = -2.0;
  iv.c2 = 2.0;
  iv.approach = -1;

  for (double eps : {0.5, 1.0}) {
    INFO("eps = " << eps);
    const RegularityReport odd = estimateOrder(Expr::parse("y/sqrt(x^2+y^2)"), iv, 3, eps);
    CHECK(odd.max_order == 3);

    const RegularityReport even = estimateOrder(Expr::parse("x/sqrt(x^2+y^2)"), iv, 3, eps);
    CHECK(even.max_order == 0);
    REQUIRE(even.rungs.size() == 2);
    CHECK(even.rungs[1].cls == SeqClass::Divergent);

    const RegularityReport bad = estimateOrder(Expr::parse("1/x^2+1/y^2"), iv, 3, eps);
    CHECK(bad.max_order == -1);
  }
}

TEST_CASE("sampled ladder agrees with the symbolic one") {
  GermInterval iv;
  iv.a = 0.0;
  iv.b1 = iv.b2 = 0.0;
  iv.c1 = -2.0;
  iv.c2 = 2.0;
  iv.approach = -1;
  const Expr ghat = Expr::parse("x/sqrt(x^2+y^2)");
  auto sampler = [&](double xp, double yp) -> std::optional<double> {
    const EvalResult r = ghat.eval(xp, yp);
    if (!r.ok()) return std::nullopt;
    return r.value;
  };
  const RegularityReport sym = estimateOrder(ghat, iv, 2, 1.0);
  const RegularityReport num = estimateOrderSampled(sampler, iv, 2, 1.0);
  CHECK(sym.max_order == num.max_order);
}

TEST_CASE("the trace functional is a module map over functions of x'") {
  GermInterval iv;
  iv.a = 0.0;
  iv.b1 = iv.b2 = 0.0;
  iv.c1 = -2.0;
  iv.c2 = 2.0;
  iv.approach = -1;
  const Expr ghat = Expr::parse("x/sqrt(x^2+y^2)");
  const Expr fx = Expr::parse("1+x^2");
  const Expr product = fx * ghat;
  for (double xp : {-0.8, -0.2, -0.05}) {
    const QuadResult a = germH(product, iv, 0.75, xp);
    const QuadResult b = germH(ghat, iv, 0.75, xp);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(std::fabs(a.value - fx(xp, 0.0) * b.value) <= 1e-9);
  }
}

TEST_CASE("order estimate matches the diagnosis ladder on pullbacks") {
  const auto& ctx = poly1();
  const GermInterval iv = germInterval(ctx.chart, ctx.dp, ctx.chart.pairs[0]);
  CHECK(std::fabs(iv.b1) <= 1e-6);
  CHECK(std::fabs(iv.b2) <= 1e-6);
  CHECK(iv.approach == -1);

  struct Fixture {
    const char* ghat;
    int expected;
  } fixtures[] = {
      {"y/sqrt(x^2+y^2)", 2},
      {"x/sqrt(x^2+y^2)", 0},
      {"1/sqrt(x^2+y^2)", -1},
  };
  GermInterval ivp = iv;
  ivp.b1 = ivp.b2 = 0.0;  // collapse exactly for the symbolic quadrature
  for (const auto& fx : fixtures) {
    const Expr ghat = Expr::parse(fx.ghat);
    const RegularityReport ladder = estimateOrder(ghat, ivp, 2, 1.0);
    const SolvabilityVerdict v =
        diagnose(ctx.chart, ctx.dp, ghat.composed(ctx.ham.F, ctx.ham.G), 2);
    INFO(fx.ghat);
    CHECK(ladder.max_order == fx.expected);
    CHECK(v.solvable_to_order == fx.expected);
  }
}
