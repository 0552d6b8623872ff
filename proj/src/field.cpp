#include "planarcoh/field.hpp"

#include <algorithm>
#include <cmath>

namespace pcoh {

PlanarField PlanarField::make(Expr fx, Expr fy, std::string name) {
  PlanarField f;
  f.fx = std::move(fx);
  f.fy = std::move(fy);
  f.name = std::move(name);
  f.fx_x = f.fx.diff(Var::X);
  f.fx_y = f.fx.diff(Var::Y);
  f.fy_x = f.fy.diff(Var::X);
  f.fy_y = f.fy.diff(Var::Y);
  return f;
}

PlanarField PlanarField::parse(const std::string& fx_src, const std::string& fy_src,
                               std::string name) {
  return make(Expr::parse(fx_src), Expr::parse(fy_src), std::move(name));
}

bool PlanarField::evalVec(double x, double y, double out[2]) const {
  const EvalResult a = fx.eval(x, y);
  const EvalResult b = fy.eval(x, y);
  out[0] = a.value;
  out[1] = b.value;
  return a.ok() && b.ok();
}

Expr PlanarField::lieDerivative(const Expr& e) const {
  return fx * e.diff(Var::X) + fy * e.diff(Var::Y);
}

double PlanarField::minSquaredNormOnGrid(const Box& box, int nx, int ny, Point2* worst) const {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double x = box.x1 + (box.x2 - box.x1) * i / (nx - 1.0);
      const double y = box.y1 + (box.y2 - box.y1) * j / (ny - 1.0);
      double v[2];
      if (!evalVec(x, y, v)) {
        if (worst) *worst = {x, y};
        return 0.0;  // a field that cannot even be evaluated is not regular here
      }
      const double s = v[0] * v[0] + v[1] * v[1];
      if (s < best) {
        best = s;
        if (worst) *worst = {x, y};
      }
    }
  }
  return best;
}

Transversal Transversal::verticalSegment(double x, Point2 anchor_hint) {
  Transversal t;
  t.kind = Kind::VerticalSegment;
  t.defining = Expr::x();
  t.level = x;
  t.anchor = {x, anchor_hint.y};
  return t;
}

Transversal Transversal::horizontalSegment(double y, Point2 anchor_hint) {
  Transversal t;
  t.kind = Kind::HorizontalSegment;
  t.defining = Expr::y();
  t.level = y;
  t.anchor = {anchor_hint.x, y};
  return t;
}

Transversal Transversal::levelSet(Expr defining, double level, Point2 anchor,
                                  std::optional<Box> guard) {
  Transversal t;
  t.kind = Kind::LevelSet;
  t.defining = std::move(defining);
  t.level = level;
  t.anchor = anchor;
  t.guard = guard;
  return t;
}

std::optional<Point2> Transversal::tangentAt(Point2 p) const {
  const EvalResult gx = defining.diff(Var::X).eval(p);
  const EvalResult gy = defining.diff(Var::Y).eval(p);
  if (!gx.ok() || !gy.ok()) return std::nullopt;
  const double norm = std::hypot(gx.value, gy.value);
  if (norm < 1e-300) return std::nullopt;
  return Point2{orientation * gy.value / norm, -orientation * gx.value / norm};
}

std::optional<Point2> Transversal::pointAt(double tau) const {
  if (kind == Kind::VerticalSegment)
    return Point2{anchor.x, anchor.y + orientation * tau};
  if (kind == Kind::HorizontalSegment)
    return Point2{anchor.x + orientation * tau, anchor.y};

  if (tau == 0.0) return anchor;
  // Walk the level curve by its unit tangent, then project back onto the
  // level set with one Newton correction along the gradient.
  const Expr ex = defining.diff(Var::X), ey = defining.diff(Var::Y);
  OdeRhs rhs = [&](double, const double* y, double* dy) {
    const EvalResult gx = ex.eval(y[0], y[1]);
    const EvalResult gy = ey.eval(y[0], y[1]);
    if (!gx.ok() || !gy.ok()) return false;
    const double norm = std::hypot(gx.value, gy.value);
    if (norm < 1e-300) return false;
    dy[0] = orientation * gy.value / norm;
    dy[1] = -orientation * gx.value / norm;
    return true;
  };
  OdeState s;
  s.n = 2;
  s[0] = anchor.x;
  s[1] = anchor.y;
  OdeOptions opt;
  opt.rtol = 1e-12;
  opt.atol = 1e-14;
  const OdeOutcome o = integrateOde(rhs, s, 0.0, tau, opt);
  if (o.status != OdeStatus::ReachedTime) return std::nullopt;
  Point2 p{o.y[0], o.y[1]};
  for (int it = 0; it < 2; ++it) {
    const EvalResult e = defining.eval(p);
    const EvalResult gx = ex.eval(p), gy = ey.eval(p);
    if (!e.ok() || !gx.ok() || !gy.ok()) break;
    const double g2 = gx.value * gx.value + gy.value * gy.value;
    if (g2 < 1e-300) break;
    const double r = (e.value - level) / g2;
    p.x -= r * gx.value;
    p.y -= r * gy.value;
  }
  return p;
}

namespace {

FlowResult runFlow(const PlanarField& f, Point2 p0, double t_target,
                   const Transversal* target, const FlowOptions& opt, const Expr* integrand,
                   const Expr* weight, const OdeObserver* observer) {
  const bool acc = integrand != nullptr;
  OdeRhs rhs = [&](double, const double* y, double* dy) {
    if (!f.evalVec(y[0], y[1], dy)) return false;
    if (acc) {
      const EvalResult u = integrand->eval(y[0], y[1]);
      if (!u.ok()) return false;
      double w = 1.0;
      if (weight) {
        const EvalResult we = weight->eval(y[0], y[1]);
        if (!we.ok()) return false;
        w = we.value;
      }
      dy[2] = u.value * w;
    }
    return true;
  };

  // Events fire on the raw defining function; the guard is checked after
  // localization so that crossings of the wrong component of a level set are
  // skipped and the hunt resumes.
  OdeEvent event;
  if (target) {
    event = [&](double, const double* y) -> double {
      return target->signedValue({y[0], y[1]});
    };
  }

  OdeState s;
  s.n = acc ? 3 : 2;
  s[0] = p0.x;
  s[1] = p0.y;
  if (acc) s[2] = 0.0;

  // Already on the target: a zero-length crossing.
  if (target && target->inGuard(p0) &&
      std::fabs(target->signedValue(p0)) <= 1e-11 * (1.0 + std::fabs(target->level))) {
    FlowResult r;
    r.endpoint = p0;
    r.elapsed = 0.0;
    r.status = OdeStatus::Event;
    r.event_residual = std::fabs(target->signedValue(p0));
    return r;
  }
  // Monotone defining functions cannot come back: skip hopeless directions.
  if (target && target->flow_monotone != 0) {
    const double e0 = target->signedValue(p0);
    const double drift = target->flow_monotone * (t_target >= 0 ? 1.0 : -1.0);
    if (std::isfinite(e0) && e0 * drift > 0.0) {
      FlowResult r;
      r.endpoint = p0;
      r.status = OdeStatus::Stopped;
      return r;
    }
  }

  OdeOptions oopt;
  oopt.rtol = opt.tol;
  oopt.atol = opt.tol * 1e-2;
  oopt.hmax = opt.hmax;
  const Box big = opt.integrationBox();
  oopt.stop_box = &big;
  if (acc) {
    oopt.stop_component = 2;
    oopt.stop_abs = opt.acc_limit;
  }

  double t0 = 0.0;
  OdeOutcome o;
  for (int component = 0;; ++component) {
    o = integrateOde(rhs, s, t0, t_target, oopt, target ? &event : nullptr, observer);
    if (o.status != OdeStatus::Event) break;
    if (target->inGuard({o.y[0], o.y[1]})) break;
    double dy[kMaxOdeDim];
    if (component >= 16 || !rhs(o.t, o.y.y.data(), dy)) {
      o.status = OdeStatus::StepLimit;  // hunt exhausted on wrong components
      break;
    }
    // Wrong component: nudge just past the crossing and keep going.
    const double nudge = 1e-9 * (std::fabs(o.t) + 1.0) * (t_target > t0 ? 1.0 : -1.0);
    s = o.y;
    for (int i = 0; i < s.n; ++i) s[i] += nudge * dy[i];
    t0 = o.t + nudge;
  }

  FlowResult r;
  r.endpoint = {o.y[0], o.y[1]};
  r.elapsed = o.t;
  r.status = o.status;
  r.event_residual = o.event_residual;
  r.integral = acc ? o.y[2] : 0.0;
  r.steps = o.steps;
  return r;
}

}  // namespace

FlowResult integrateFlow(const PlanarField& f, Point2 p0, double t, const FlowOptions& opt,
                         const Expr* integrand, const Expr* weight) {
  return runFlow(f, p0, t, nullptr, opt, integrand, weight, nullptr);
}

FlowResult flowToCrossing(const PlanarField& f, Point2 p0, const Transversal& target,
                          double tmax, const FlowOptions& opt, const Expr* integrand,
                          const Expr* weight) {
  return runFlow(f, p0, tmax, &target, opt, integrand, weight, nullptr);
}

std::optional<FlowResult> findCrossing(const PlanarField& f, Point2 p0,
                                       const Transversal& target, double tmax,
                                       const FlowOptions& opt, const Expr* integrand,
                                       const Expr* weight, int prefer) {
  const double first = prefer < 0 ? -1.0 : 1.0;
  FlowResult a = flowToCrossing(f, p0, target, first * tmax, opt, integrand, weight);
  if (a.status == OdeStatus::Event) return a;
  FlowResult b = flowToCrossing(f, p0, target, -first * tmax, opt, integrand, weight);
  if (b.status == OdeStatus::Event) return b;
  return std::nullopt;
}

Polyline traceLeaf(const PlanarField& f, Point2 p0, const Box& box, double tmax, double tol,
                   double max_spatial_step) {
  // Arclength parametrization: steps are spatial steps, which both bounds the
  // plotting spacing and provides the arc-length budget. Flow time is carried
  // as an extra state component.
  OdeRhs rhs = [&](double, const double* y, double* dy) {
    double v[2];
    if (!f.evalVec(y[0], y[1], v)) return false;
    const double n = std::hypot(v[0], v[1]);
    if (n < 1e-300) return false;
    dy[0] = v[0] / n;
    dy[1] = v[1] / n;
    dy[2] = 1.0 / n;  // dt/ds
    return true;
  };

  const double s_budget = 8.0 * std::hypot(box.width(), box.height());

  auto arc = [&](double dir) {
    Polyline pts;
    OdeObserver obs = [&](double, const double* y) {
      if (std::fabs(y[2]) <= tmax) pts.push_back({y[2], {y[0], y[1]}});
    };
    OdeState st;
    st.n = 3;
    st[0] = p0.x;
    st[1] = p0.y;
    st[2] = 0.0;
    OdeOptions oo;
    oo.rtol = tol;
    oo.atol = tol * 1e-2;
    oo.hmax = max_spatial_step;
    oo.stop_box = &box;
    integrateOde(rhs, st, 0.0, dir * s_budget, oo, nullptr, &obs);
    return pts;
  };

  Polyline back = arc(-1.0), fwd = arc(+1.0);
  Polyline out;
  out.reserve(back.size() + fwd.size() + 1);
  for (auto it = back.rbegin(); it != back.rend(); ++it) out.push_back(*it);
  out.push_back({0.0, p0});
  for (const auto& q : fwd) out.push_back(q);
  return out;
}

}  // namespace pcoh
