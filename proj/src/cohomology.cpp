#include "planarcoh/cohomology.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pcoh {

namespace {

double sign(double v) { return v < 0 ? -1.0 : 1.0; }

// Curve parameter of a point known to lie on (or next to) a transversal:
// coarse scan, then ternary refinement of the distance.
double paramOf(const Transversal& t, Point2 target, double span) {
  if (t.kind != Transversal::Kind::LevelSet) {
    return t.kind == Transversal::Kind::VerticalSegment ? (target.y - t.anchor.y) * t.orientation
                                                        : (target.x - t.anchor.x) * t.orientation;
  }
  double best_tau = 0.0, best_d = distance(t.anchor, target);
  const int n = 256;
  for (int i = 0; i <= n; ++i) {
    const double tau = -span + 2.0 * span * i / n;
    const auto p = t.pointAt(tau);
    if (!p) continue;
    const double d = distance(*p, target);
    if (d < best_d) {
      best_d = d;
      best_tau = tau;
    }
  }
  double lo = best_tau - 2.0 * span / n, hi = best_tau + 2.0 * span / n;
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    const auto p1 = t.pointAt(m1), p2 = t.pointAt(m2);
    if (!p1 || !p2) break;
    if (distance(*p1, target) < distance(*p2, target)) hi = m2;
    else lo = m1;
  }
  return 0.5 * (lo + hi);
}

struct PairFrame {
  const Transversal* l1;
  const Transversal* l2;
  double tau1;       // parameter of the junction p1 on l1
  double dir;        // offset direction along l1 into the separating region
  int region_sign;   // sign of F - a inside the region
};

PairFrame pairFrame(const FoliationChart& chart, const DerivedPair& dp,
                    const AdjacentPair& pair) {
  PairFrame fr{};
  fr.l1 = chart.transversalOf(pair.s1);
  fr.l2 = chart.transversalOf(pair.s2);
  if (!fr.l1 || !fr.l2) throw ValidationError("pair " + pair.id + ": missing transversal");
  const double span = std::hypot(chart.box.width(), chart.box.height());
  fr.tau1 = paramOf(*fr.l1, pair.p1, span);
  const double Fr = dp.F(pair.region_sample);
  fr.region_sign = (Fr - pair.a) < 0 ? -1 : +1;
  const double probe = 1e-4;
  fr.dir = +1.0;
  const auto pp = fr.l1->pointAt(fr.tau1 + probe);
  const auto pm = fr.l1->pointAt(fr.tau1 - probe);
  if (pp && sign(dp.F(*pp) - pair.a) == fr.region_sign) fr.dir = +1.0;
  else if (pm && sign(dp.F(*pm) - pair.a) == fr.region_sign) fr.dir = -1.0;
  else throw ValidationError("pair " + pair.id + ": cannot orient the approach schedule");
  return fr;
}

bool monotoneMagnitude(const std::vector<double>& v) {
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    if (std::fabs(v[i + 1]) < std::fabs(v[i]) - 1e-14) return false;
  return true;
}

}  // namespace

GapResult gapBetween(const FoliationChart& chart, const DerivedPair& dp, const Expr& g,
                     const AdjacentPair& pair, int k, const GapSchedule& sched) {
  GapResult out;
  out.order = k;
  out.pair_id = pair.id;
  out.time = sched.time;
  out.p1 = pair.p1;
  out.p2 = pair.p2;

  Expr integrand = g;
  for (int i = 0; i < k; ++i) integrand = dp.lieXiG(integrand);
  Expr weight;  // empty = 1
  const bool use_weight = sched.time == TimeParam::Hamiltonian;
  if (use_weight) weight = chart.field.lieDerivative(dp.G);

  const PairFrame fr = pairFrame(chart, dp, pair);

  FlowOptions fo;
  fo.box = chart.box;
  fo.tol = sched.tol;

  int flow_dir = 0;  // remembered after the first schedule point
  bool timed_out = false;
  double offset = sched.d0;
  for (int m = 0; m < sched.steps; ++m, offset *= sched.shrink) {
    const auto pm = fr.l1->pointAt(fr.tau1 + fr.dir * offset);
    if (!pm) break;
    FlowResult res;
    bool found = false;
    if (flow_dir == 0) {
      for (double d : {+1.0, -1.0}) {
        res = flowToCrossing(chart.field, *pm, *fr.l2, d * sched.tmax, fo, &integrand,
                             use_weight ? &weight : nullptr);
        if (res.status == OdeStatus::Event) {
          flow_dir = d > 0 ? 1 : -1;
          found = true;
          break;
        }
      }
    } else {
      res = flowToCrossing(chart.field, *pm, *fr.l2, flow_dir * sched.tmax, fo, &integrand,
                           use_weight ? &weight : nullptr);
      found = res.status == OdeStatus::Event;
    }
    if (!found) {
      timed_out = true;
      std::ostringstream os;
      os << "no crossing within tmax at schedule point " << m;
      out.note = os.str();
      break;
    }
    out.partials.push_back(res.integral);
  }

  const SeqVerdict v = classifySequence(out.partials, sched.policy);
  out.value = v.limit;
  out.rate = v.rate;
  out.cls = v.cls;
  if (out.note.empty()) out.note = v.note;
  if (timed_out) {
    // Crossings that stop happening while the partials grow are the
    // divergence mechanism itself (the crossing time escaped to infinity).
    out.cls = (out.partials.size() >= 2 && monotoneMagnitude(out.partials))
                  ? SeqClass::Divergent
                  : SeqClass::Inconclusive;
  }
  return out;
}

SolvabilityVerdict diagnose(const FoliationChart& chart, const DerivedPair& dp, const Expr& g,
                            int kmax, GapSchedule schedule) {
  SolvabilityVerdict verdict;
  verdict.time = schedule.time;
  int order = kmax;
  for (const auto& pair : chart.pairs) {
    for (int k = 0; k <= kmax; ++k) {
      GapResult gr = gapBetween(chart, dp, g, pair, k, schedule);
      const SeqClass cls = gr.cls;
      verdict.table.push_back({pair.id, k, std::move(gr)});
      if (cls == SeqClass::Finite) continue;
      if (cls == SeqClass::Inconclusive) verdict.inconclusive = true;
      order = std::min(order, k - 1);
      break;
    }
  }
  verdict.solvable_to_order = order;
  return verdict;
}

double SolutionGrid::maxResidual() const {
  double m = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i)
    if (status[i] == CellStatus::Ok && std::isfinite(residual[i]))
      m = std::max(m, residual[i]);
  return m;
}

namespace {

struct TransData {
  const Separatrix* sep = nullptr;
  const Transversal* trans = nullptr;
  bool has_user = false;
  Expr user;
  const AdjacentPair* link = nullptr;  // pair connecting to an earlier separatrix
  int covered_sign = 0;                // sign of F - a on the already-covered side
  double junction_limit = 0.0;
  SeqClass junction_cls = SeqClass::Inconclusive;
};

struct Solver {
  const FoliationChart& chart;
  const DerivedPair& dp;
  const Expr& g;
  const SolveOptions& opt;
  Expr weight;
  bool use_weight;
  FlowOptions fo;
  std::vector<TransData> td;
  std::vector<StitchRecord> stitches;
  bool extension_failure = false;
  std::string failure_pair;

  struct Eval {
    double value = 0.0;
    CellStatus status = CellStatus::Ok;
    int used = -1;  // transversal index of the owning route
  };

  // f at p via the first transversal (in stitching order) whose leaf crossing
  // exists; `skip` excludes one route so a second, independent route can be
  // used as the residual probe. Transversals whose guard contains p are tried
  // first: for guarded CSTs they are the ones the leaf actually reaches.
  Eval evaluate(Point2 p, int skip = -1, int depth = 0) const {
    Eval out;
    if (depth > 4) {
      out.status = CellStatus::Fault;
      return out;
    }
    std::vector<int> order;
    order.reserve(td.size());
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < static_cast<int>(td.size()); ++j) {
        const bool guarded = td[static_cast<std::size_t>(j)].trans->guard.has_value();
        const bool inside = td[static_cast<std::size_t>(j)].trans->inGuard(p);
        if ((pass == 0) == (guarded && inside)) order.push_back(j);
      }
    for (int j : order) {
      if (j == skip) continue;
      const Transversal& tr = *td[static_cast<std::size_t>(j)].trans;
      const double v0 = tr.signedValue(p);
      const int prefer = std::isfinite(v0) ? (v0 > 0 ? -1 : +1) : 0;
      const auto cr = findCrossing(chart.field, p, tr, opt.tmax, fo, &gExpr(),
                                   use_weight ? &weight : nullptr, prefer);
      if (!cr) continue;
      const Point2 q = cr->endpoint;
      const double A = cr->integral;  // integral from p to q along the leaf
      const TransData& d = td[static_cast<std::size_t>(j)];
      double base = 0.0;
      if (d.has_user) {
        const EvalResult b = d.user.eval(q);
        if (!b.ok()) {
          out.status = CellStatus::Fault;
          return out;
        }
        base = b.value;
      } else if (d.link) {
        const double side = sign(dp.F(q) - d.link->a);
        if (static_cast<int>(side) == d.covered_sign) {
          // q lies in a region already owned by an earlier transversal.
          const Eval inner = evaluate(q, j, depth + 1);
          if (inner.status != CellStatus::Ok) {
            out.status = inner.status;
            return out;
          }
          base = inner.value;
        } else {
          if (d.junction_cls != SeqClass::Finite && !opt.force) {
            out.status = CellStatus::ExtensionBlocked;
            return out;
          }
          base = d.junction_limit;
        }
      }
      out.value = base - A;
      out.used = j;
      return out;
    }
    out.status = CellStatus::Unreachable;
    return out;
  }

  const Expr& gExpr() const { return g; }
};

}  // namespace

SolutionGrid solveGrid(const FoliationChart& chart, const DerivedPair& dp, const Expr& g,
                       const GridSpec& grid, const std::map<std::string, Expr>& initial,
                       const SolveOptions& opt) {
  Solver sv{chart, dp, g, opt, Expr(), opt.time == TimeParam::Hamiltonian, {}, {}, {}, false, ""};
  if (sv.use_weight) sv.weight = chart.field.lieDerivative(dp.G);
  sv.fo.box = chart.box;
  sv.fo.tol = opt.tol;

  const double span = std::hypot(chart.box.width(), chart.box.height());

  // Assemble per-transversal data in stitching (declaration) order; each
  // transversal after the first that is linked by an adjacent pair to an
  // earlier one receives the continuous extension of the solution built so
  // far as its seed value beyond the junction.
  for (std::size_t j = 0; j < chart.seps.size(); ++j) {
    TransData d;
    d.sep = &chart.seps[j];
    d.trans = chart.transversalOf(d.sep->id);
    if (!d.trans) throw ValidationError("no transversal for '" + d.sep->id + "'");
    auto it = initial.find(d.sep->id);
    if (it != initial.end()) {
      d.has_user = true;
      d.user = it->second;
    }
    for (const auto& pair : chart.pairs) {
      if (pair.s2 == d.sep->id) {
        for (std::size_t i = 0; i < j; ++i)
          if (chart.seps[i].id == pair.s1) d.link = &pair;
      }
    }
    if (d.link) d.covered_sign = sign(dp.F(d.link->region_sample) - d.link->a) < 0 ? -1 : +1;
    sv.td.push_back(std::move(d));
  }

  // Junction limits (the stitches), in order.
  for (std::size_t j = 0; j < sv.td.size(); ++j) {
    TransData& d = sv.td[j];
    if (!d.link) continue;
    StitchRecord rec;
    rec.sep_id = d.sep->id;
    rec.pair_id = d.link->id;
    rec.performed = true;

    const double tau_j = paramOf(*d.trans, d.link->p2, span);
    double dir = +1.0;
    {
      const auto pp = d.trans->pointAt(tau_j + 1e-4);
      const auto pm = d.trans->pointAt(tau_j - 1e-4);
      if (pp && static_cast<int>(sign(dp.F(*pp) - d.link->a)) == d.covered_sign) dir = +1.0;
      else if (pm && static_cast<int>(sign(dp.F(*pm) - d.link->a)) == d.covered_sign) dir = -1.0;
    }
    std::vector<double> vals;
    double off = opt.stitch_schedule.d0;
    for (int m = 0; m < opt.stitch_schedule.steps; ++m, off *= opt.stitch_schedule.shrink) {
      const auto qm = d.trans->pointAt(tau_j + dir * off);
      if (!qm) break;
      const Solver::Eval e = sv.evaluate(*qm, static_cast<int>(j));
      if (e.status != CellStatus::Ok) break;
      vals.push_back(e.value);
    }
    const SeqVerdict v = classifySequence(vals, opt.stitch_schedule.policy);
    rec.cls = v.cls;
    rec.limit = v.limit;
    d.junction_cls = v.cls;
    d.junction_limit = v.limit;
    if (v.cls != SeqClass::Finite) {
      sv.extension_failure = true;
      sv.failure_pair = d.link->id;
    }
    if (d.has_user) {
      const EvalResult u = d.user.eval(d.link->p2);
      if (u.ok() && v.cls == SeqClass::Finite) rec.data_mismatch = std::fabs(u.value - v.limit);
    }
    sv.stitches.push_back(rec);
  }

  SolutionGrid outg;
  outg.grid = grid;
  const std::size_t total = static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny);
  outg.xs.resize(total);
  outg.ys.resize(total);
  outg.f.assign(total, std::numeric_limits<double>::quiet_NaN());
  outg.residual.assign(total, std::numeric_limits<double>::quiet_NaN());
  outg.status.assign(total, CellStatus::Ok);

  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const std::size_t idx = outg.index(ix, iy);
      const double x = grid.box.x1 + (grid.box.x2 - grid.box.x1) * ix /
                                         std::max(1, grid.nx - 1);
      const double y = grid.box.y1 + (grid.box.y2 - grid.box.y1) * iy /
                                         std::max(1, grid.ny - 1);
      outg.xs[idx] = x;
      outg.ys[idx] = y;
      const Point2 p{x, y};
      const Solver::Eval e = sv.evaluate(p);
      outg.status[idx] = e.status;
      if (e.status != CellStatus::Ok) continue;
      outg.f[idx] = e.value;

      // Residual in integral form: a second, independent route when the leaf
      // reaches another transversal, otherwise the same route at a tighter
      // tolerance.
      const Solver::Eval e2 = sv.evaluate(p, e.used);
      if (e2.status == CellStatus::Ok) {
        outg.residual[idx] = std::fabs(e.value - e2.value);
      } else {
        Solver tight = sv;
        tight.fo.tol = opt.tol * 0.1;
        const Solver::Eval e3 = tight.evaluate(p);
        outg.residual[idx] =
            e3.status == CellStatus::Ok ? std::fabs(e.value - e3.value) : 0.0;
      }
    }
  }
  outg.stitches = sv.stitches;
  outg.extension_failure = sv.extension_failure;
  outg.failure_pair = sv.failure_pair;
  return outg;
}

GermInterval germInterval(const FoliationChart& chart, const DerivedPair& dp,
                          const AdjacentPair& pair) {
  const Interval iv = rectifiedInterval(chart, pair, dp.F, dp.G);
  GermInterval gi;
  gi.a = pair.a;
  gi.b1 = iv.b1;
  gi.b2 = iv.b2;
  const double g1 = dp.G(pair.p1), g2 = dp.G(pair.p2);
  gi.c1 = std::min(g1, g2);
  gi.c2 = std::max(g1, g2);
  gi.approach = (dp.F(pair.region_sample) - pair.a) < 0 ? -1 : +1;
  if (!(gi.c1 < gi.b1 && gi.b2 < gi.c2))
    throw ValidationError("pair " + pair.id + ": chart bounds do not bracket the interval");
  return gi;
}

QuadResult germH(const Expr& ghat, const GermInterval& iv, double eps, double xprime,
                 double atol) {
  const double delta = std::min(iv.c2 - iv.b2, iv.b1 - iv.c1);
  if (!(eps > 0.0 && eps < delta))
    throw std::invalid_argument("eps must lie in (0, " + std::to_string(delta) + ")");
  auto f = [&](double yp) -> std::optional<double> {
    const EvalResult r = ghat.eval(xprime, yp);
    if (!r.ok()) return std::nullopt;
    return r.value;
  };
  return adaptiveQuad(f, iv.b1 - eps, iv.b2 + eps, atol);
}

namespace {

RegularityReport runLadder(const std::function<QuadResult(int k, double xp)>& hval,
                           const GermInterval& iv, int rmax, int steps, double x0) {
  RegularityReport rep;
  for (int k = 0; k <= rmax; ++k) {
    OrderRung rung;
    rung.k = k;
    bool quad_failed = false;
    double off = x0;
    for (int m = 0; m < steps; ++m, off *= 0.5) {
      const double xp = iv.a + iv.approach * off;
      const QuadResult q = hval(k, xp);
      if (q.divergent) {
        quad_failed = true;
        break;
      }
      rung.h_trace.push_back(q.value);
    }
    if (quad_failed || rung.h_trace.empty()) {
      rung.cls = SeqClass::Divergent;
      rep.rungs.push_back(std::move(rung));
      break;
    }
    const SeqVerdict v = classifySequence(rung.h_trace);
    rung.cls = v.cls;
    rung.limit = v.limit;
    const SeqClass cls = rung.cls;
    rep.rungs.push_back(std::move(rung));
    if (cls == SeqClass::Finite) {
      rep.max_order = k;
      continue;
    }
    if (cls == SeqClass::Inconclusive) rep.inconclusive_halt = true;
    break;
  }
  return rep;
}

}  // namespace

RegularityReport estimateOrder(const Expr& ghat, const GermInterval& iv, int rmax, double eps,
                               int steps, double x0) {
  std::vector<Expr> dk{ghat};
  for (int k = 1; k <= rmax; ++k) dk.push_back(dk.back().diff(Var::X));
  return runLadder(
      [&](int k, double xp) { return germH(dk[static_cast<std::size_t>(k)], iv, eps, xp); }, iv,
      rmax, steps, x0);
}

RegularityReport estimateOrderSampled(
    const std::function<std::optional<double>(double, double)>& ghat, const GermInterval& iv,
    int rmax, double eps, int steps, double x0) {
  auto h0 = [&](double xp) -> QuadResult {
    auto f = [&](double yp) { return ghat(xp, yp); };
    return adaptiveQuad(f, iv.b1 - eps, iv.b2 + eps, 1e-10);
  };
  // d^k h by 5-point stencils; legitimate because the functional commutes
  // with x'-derivatives.
  return runLadder(
      [&](int k, double xp) -> QuadResult {
        if (k == 0) return h0(xp);
        const double h = 1e-3 * std::fabs(xp - iv.a);
        double v[5];
        for (int j = -2; j <= 2; ++j) {
          const QuadResult q = h0(xp + j * h);
          if (q.divergent) return q;
          v[j + 2] = q.value;
        }
        QuadResult out;
        out.converged = true;
        switch (k) {
          case 1: out.value = (-v[4] + 8 * v[3] - 8 * v[1] + v[0]) / (12 * h); break;
          case 2: out.value = (-v[4] + 16 * v[3] - 30 * v[2] + 16 * v[1] - v[0]) / (12 * h * h); break;
          case 3: out.value = (v[4] - 2 * v[3] + 2 * v[1] - v[0]) / (2 * h * h * h); break;
          default: out.value = (v[4] - 4 * v[3] + 6 * v[2] - 4 * v[1] + v[0]) / (h * h * h * h); break;
        }
        return out;
      },
      iv, rmax, steps, x0);
}

RectifiedSolution::RectifiedSolution(Expr ghat, RectRegion region, std::optional<double> baseline)
    : ghat_(std::move(ghat)), region_(region) {
  y0_ = baseline.value_or(0.5 * (region_.c1 + region_.c2));
}

std::optional<double> RectifiedSolution::value(double xp, double yp, std::string* why) const {
  const double pad = 1e-9;
  if (xp < region_.x1 - pad || xp > region_.x2 + pad || yp < region_.c1 - pad ||
      yp > region_.c2 + pad) {
    if (why) *why = "point outside the chart";
    return std::nullopt;
  }
  const bool beyond = region_.approach < 0 ? xp >= region_.a : xp <= region_.a;
  if (region_.excluded_y && beyond) {
    const auto [b1, b2] = *region_.excluded_y;
    const bool base_low = y0_ < b1, base_high = y0_ > b2;
    const bool p_low = yp < b1, p_high = yp > b2;
    if (!((base_low && p_low) || (base_high && p_high))) {
      if (why) *why = "baseline and point are separated by the excluded rectangle";
      return std::nullopt;
    }
  }
  auto f = [&](double s) -> std::optional<double> {
    const EvalResult r = ghat_.eval(xp, s);
    if (!r.ok()) return std::nullopt;
    return r.value;
  };
  const QuadResult q = adaptiveQuad(f, y0_, yp, 1e-11);
  if (q.divergent) {
    if (why) *why = "quadrature failed inside the chart";
    return std::nullopt;
  }
  return q.value;
}

}  // namespace pcoh
