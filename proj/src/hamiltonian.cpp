#include "planarcoh/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pcoh {

Expr DerivedPair::lieXiG(const Expr& e) const {
  return xiG_x * e.diff(Var::X) + xiG_y * e.diff(Var::Y);
}

Expr DerivedPair::lieXiF(const Expr& e) const {
  return xiF_x * e.diff(Var::X) + xiF_y * e.diff(Var::Y);
}

std::function<bool(Point2)> degeneracyCollar(const std::vector<Separatrix>& seps,
                                             const HamiltonianPair& ham) {
  struct Band {
    bool horizontal;
    double value;
  };
  std::vector<Band> bands;
  for (const auto& id : ham.degenerate_ids) {
    for (const auto& s : seps) {
      if (s.id != id) continue;
      if (s.desc.kind == SeparatrixDesc::Kind::LineY)
        bands.push_back({true, s.desc.value});
      else if (s.desc.kind == SeparatrixDesc::Kind::LineX)
        bands.push_back({false, s.desc.value});
    }
  }
  const double w = ham.collar_halfwidth;
  if (bands.empty()) return nullptr;
  return [bands, w](Point2 p) {
    for (const auto& b : bands) {
      const double d = b.horizontal ? std::fabs(p.y - b.value) : std::fabs(p.x - b.value);
      if (d < w) return true;
    }
    return false;
  };
}

DerivedPair derivePair(const PlanarField& field, const HamiltonianPair& ham, const Box& box,
                       Rng& rng, int samples, const std::function<bool(Point2)>& collar) {
  DerivedPair dp;
  dp.F = ham.F;
  dp.G = ham.G;
  dp.Fx = ham.F.diff(Var::X);
  dp.Fy = ham.F.diff(Var::Y);
  dp.Gx = ham.G.diff(Var::X);
  dp.Gy = ham.G.diff(Var::Y);
  dp.density = dp.Fx * dp.Gy - dp.Fy * dp.Gx;
  dp.xiF_x = (-dp.Fy) / dp.density;
  dp.xiF_y = dp.Fx / dp.density;
  dp.xiG_x = dp.Gy / dp.density;
  dp.xiG_y = (-dp.Gx) / dp.density;

  // F must be a first integral of the field and G strictly increasing along
  // it (off the degeneracy collar).
  const Expr lF = field.lieDerivative(ham.F);
  const Expr lG = field.lieDerivative(ham.G);
  int checked = 0;
  for (int i = 0; i < samples * 4 && checked < samples; ++i) {
    const Point2 p = rng.inBox(box);
    if (collar && collar(p)) continue;
    const EvalResult a = lF.eval(p), b = lG.eval(p), f = ham.F.eval(p);
    if (!a.ok() || !b.ok() || !f.ok()) continue;
    ++checked;
    const double scale = std::max(1.0, std::fabs(f.value));
    if (std::fabs(a.value) > 1e-9 * scale) {
      std::ostringstream os;
      os << "F is not constant along the field: L_xi F = " << a.value << " at (" << p.x << ", "
         << p.y << ")";
      throw ValidationError(os.str());
    }
    if (!(b.value > 0.0)) {
      std::ostringstream os;
      os << "G is not increasing along the field at (" << p.x << ", " << p.y
         << "); use -G if the orientation is reversed";
      throw ValidationError(os.str());
    }
  }
  return dp;
}

double RelationReport::maxResidual() const {
  double m = 0.0;
  for (const auto& e : entries)
    if (!e.implied) m = std::max(m, e.max_residual);
  return m;
}

const RelationEntry* RelationReport::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

RelationReport verifyRelations(const DerivedPair& dp, const Box& box, int samples, Rng& rng,
                               const std::function<bool(Point2)>& collar) {
  // Residual expressions are assembled once; the commutator uses exact
  // symbolic partials of the derived components rather than stacked finite
  // differences.
  const Expr one = Expr::constant(1.0);
  const Expr r3a = dp.xiF_x * dp.Fx + dp.xiF_y * dp.Fy;
  const Expr r3b = dp.xiF_x * dp.Gx + dp.xiF_y * dp.Gy - one;
  const Expr r3c = dp.xiG_x * dp.Fx + dp.xiG_y * dp.Fy - one;
  const Expr r3d = dp.xiG_x * dp.Gx + dp.xiG_y * dp.Gy;
  const Expr r5 = dp.density * (dp.xiG_x * dp.xiF_y - dp.xiG_y * dp.xiF_x) - one;

  auto lieAlong = [](const Expr& ax, const Expr& ay, const Expr& e) {
    return ax * e.diff(Var::X) + ay * e.diff(Var::Y);
  };
  const Expr r6x = lieAlong(dp.xiF_x, dp.xiF_y, dp.xiG_x) - lieAlong(dp.xiG_x, dp.xiG_y, dp.xiF_x);
  const Expr r6y = lieAlong(dp.xiF_x, dp.xiF_y, dp.xiG_y) - lieAlong(dp.xiG_x, dp.xiG_y, dp.xiF_y);

  // Metric pulled back from the rectified plane.
  auto metric = [&](const Expr& ux, const Expr& uy, const Expr& vx, const Expr& vy) {
    return (dp.Fx * ux + dp.Fy * uy) * (dp.Fx * vx + dp.Fy * vy) +
           (dp.Gx * ux + dp.Gy * uy) * (dp.Gx * vx + dp.Gy * vy);
  };
  const Expr r7a = metric(dp.xiF_x, dp.xiF_y, dp.xiF_x, dp.xiF_y) - one;
  const Expr r7b = metric(dp.xiG_x, dp.xiG_y, dp.xiG_x, dp.xiG_y) - one;
  const Expr r7c = metric(dp.xiF_x, dp.xiF_y, dp.xiG_x, dp.xiG_y);

  RelationReport rep;
  rep.entries = {
      {"3a:LxiF_F", 0, 0, false},   {"3b:LxiF_G-1", 0, 0, false},
      {"3c:LxiG_F-1", 0, 0, false}, {"3d:LxiG_G", 0, 0, false},
      {"5:bracket-1", 0, 0, false}, {"6x:commutator", 0, 0, false},
      {"6y:commutator", 0, 0, false}, {"7a:norm_xiF-1", 0, 0, false},
      {"7b:norm_xiG-1", 0, 0, false}, {"7c:cross", 0, 0, false},
      {"10a:J_xiF-xiG", 0, 0, false}, {"10b:J_xiG+xiF", 0, 0, false},
      {"4:pushforward", 0, 0, true}, {"8:Lie_metric", 0, 0, true},
      {"9:Lie_symplectic", 0, 0, true},
  };
  auto slot = [&](const char* id) -> RelationEntry& {
    for (auto& e : rep.entries)
      if (e.id == id) return e;
    rep.entries.push_back({id, 0, 0, false});
    return rep.entries.back();
  };

  long produced = 0;
  while (produced < samples) {
    const Point2 p = rng.inBox(box);
    ++rep.samples;
    if (collar && collar(p)) {
      ++rep.skipped_collar;
      continue;
    }

    const EvalResult fx = dp.Fx.eval(p), fy = dp.Fy.eval(p), gx = dp.Gx.eval(p),
                     gy = dp.Gy.eval(p), rho = dp.density.eval(p);
    if (!fx.ok() || !fy.ok() || !gx.ok() || !gy.ok() || !rho.ok() || rho.value == 0.0) {
      ++rep.skipped_collar;
      continue;
    }
    ++produced;

    auto record = [&](const char* id, const Expr& e) {
      const EvalResult r = e.eval(p);
      RelationEntry& en = slot(id);
      if (!r.ok()) return;  // isolated evaluation faults count as skipped samples
      en.max_residual = std::max(en.max_residual, std::fabs(r.value));
      ++en.checked;
    };
    record("3a:LxiF_F", r3a);
    record("3b:LxiF_G-1", r3b);
    record("3c:LxiG_F-1", r3c);
    record("3d:LxiG_G", r3d);
    record("5:bracket-1", r5);
    record("6x:commutator", r6x);
    record("6y:commutator", r6y);
    record("7a:norm_xiF-1", r7a);
    record("7b:norm_xiG-1", r7b);
    record("7c:cross", r7c);

    // Complex structure from the compatible metric/symplectic pair:
    // J = M_g^{-1} * (rho * [[0,1],[-1,0]]).
    const double m11 = fx.value * fx.value + gx.value * gx.value;
    const double m12 = fx.value * fy.value + gx.value * gy.value;
    const double m22 = fy.value * fy.value + gy.value * gy.value;
    const double det = m11 * m22 - m12 * m12;
    const EvalResult vfx = dp.xiF_x.eval(p), vfy = dp.xiF_y.eval(p), vgx = dp.xiG_x.eval(p),
                     vgy = dp.xiG_y.eval(p);
    if (det != 0.0 && vfx.ok() && vfy.ok() && vgx.ok() && vgy.ok()) {
      const double i11 = m22 / det, i12 = -m12 / det, i22 = m11 / det;
      auto applyJ = [&](double ux, double uy, double* out) {
        const double ax = rho.value * uy;   // A*u with A = rho*[[0,1],[-1,0]]
        const double ay = -rho.value * ux;
        out[0] = i11 * ax + i12 * ay;
        out[1] = i12 * ax + i22 * ay;
      };
      double j1[2], j2[2];
      applyJ(vfx.value, vfy.value, j1);
      applyJ(vgx.value, vgy.value, j2);
      RelationEntry& ea = slot("10a:J_xiF-xiG");
      ea.max_residual = std::max({ea.max_residual, std::fabs(j1[0] - vgx.value),
                                  std::fabs(j1[1] - vgy.value)});
      ++ea.checked;
      RelationEntry& eb = slot("10b:J_xiG+xiF");
      eb.max_residual = std::max({eb.max_residual, std::fabs(j2[0] + vfx.value),
                                  std::fabs(j2[1] + vfy.value)});
      ++eb.checked;
    }
  }
  return rep;
}

double RectifiedMap::pushforwardResidual(const DerivedPair& dp, Point2 p) const {
  const EvalResult fx = dp.Fx.eval(p), fy = dp.Fy.eval(p), gx = dp.Gx.eval(p),
                   gy = dp.Gy.eval(p);
  const EvalResult vfx = dp.xiF_x.eval(p), vfy = dp.xiF_y.eval(p), vgx = dp.xiG_x.eval(p),
                   vgy = dp.xiG_y.eval(p);
  if (!fx.ok() || !fy.ok() || !gx.ok() || !gy.ok() || !vfx.ok() || !vfy.ok() || !vgx.ok() ||
      !vgy.ok())
    return std::numeric_limits<double>::quiet_NaN();
  // Jacobian [[Fx,Fy],[Gx,Gy]] applied to xi'_F should be (0,1); to xi'_G, (1,0).
  const double a1 = fx.value * vfx.value + fy.value * vfy.value;
  const double a2 = gx.value * vfx.value + gy.value * vfy.value;
  const double b1 = fx.value * vgx.value + fy.value * vgy.value;
  const double b2 = gx.value * vgx.value + gy.value * vgy.value;
  return std::max({std::fabs(a1), std::fabs(a2 - 1.0), std::fabs(b1 - 1.0), std::fabs(b2)});
}

double smoothStep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

PositivityCertificate::PositivityCertificate(const FoliationChart& chart, PositivityOptions opt)
    : chart_(chart), opt_(opt) {
  imin_ = -2 * opt_.depth;
  imax_ = 2 * opt_.depth;
  if (opt_.tmax <= 0.0) opt_.tmax = stride_ * imax_ + 2.0;
  opt_.flow.box = chart.box;

  // Any bijection of (separatrix, window) with the naturals works; windows are
  // enumerated by growing |i| so that shallow truncations keep the windows
  // around the transversals themselves.
  const std::size_t ns = chart_.seps.size();
  weights_.assign(ns, std::vector<double>(static_cast<std::size_t>(imax_ - imin_ + 1), 0.0));
  long n = 0;
  for (int ring = 0; ring <= imax_; ++ring) {
    for (int sign : {+1, -1}) {
      const int i = ring * sign;
      if (i < imin_ || i > imax_) continue;
      if (sign < 0 && ring == 0) continue;
      for (std::size_t s = 0; s < ns; ++s)
        weights_[s][static_cast<std::size_t>(i - imin_)] = std::ldexp(1.0, -static_cast<int>(n++));
    }
  }
}

PositivityCertificate::Sample PositivityCertificate::evaluate(Point2 p) const {
  Sample out;
  const double h = opt_.fd_step;
  for (std::size_t s = 0; s < chart_.seps.size(); ++s) {
    const Transversal* t = chart_.transversalOf(chart_.seps[s].id);
    if (!t) continue;
    const auto cross = findCrossing(chart_.field, p, *t, opt_.tmax, opt_.flow);
    if (!cross) {
      // The leaf of p never meets this transversal; the windows contribute a
      // constant there. Orientation of the constant tail follows G.
      if (opt_.G) {
        const double side = (*opt_.G)(p) - (*opt_.G)(t->anchor);
        if (side > 0)
          for (double w : weights_[s]) out.value += w;
      }
      continue;
    }
    const double tstar = -cross->elapsed;  // time from the transversal to p
    for (int i = imin_; i <= imax_; ++i) {
      const double w = weights_[s][static_cast<std::size_t>(i - imin_)];
      const double phase = tstar - i * stride_;
      out.value += w * smoothStep(phase);
      out.lie += w * (smoothStep(phase + h) - smoothStep(phase - h)) / (2.0 * h);
      if (phase > 0.0 && phase < 1.0) out.covered = true;
    }
  }
  return out;
}

}  // namespace pcoh
