#include "planarcoh/foliation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "planarcoh/numerics.hpp"

namespace pcoh {

SeparatrixDesc SeparatrixDesc::parse(const std::string& text) {
  SeparatrixDesc d;
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.rfind("seed:", 0) == 0) {
    d.kind = Kind::Seed;
    const auto comma = s.find(',', 5);
    if (comma == std::string::npos) throw ValidationError("separatrix seed needs 'seed:x,y'");
    d.seed.x = std::stod(s.substr(5, comma - 5));
    d.seed.y = std::stod(s.substr(comma + 1));
    return d;
  }
  if (s.size() >= 3 && (s[0] == 'x' || s[0] == 'y') && s[1] == '=') {
    d.kind = s[0] == 'y' ? Kind::LineY : Kind::LineX;
    d.value = std::stod(s.substr(2));
    return d;
  }
  throw ValidationError("cannot parse separatrix description '" + text + "'");
}

std::string SeparatrixDesc::str() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::LineY: os << "y=" << value; break;
    case Kind::LineX: os << "x=" << value; break;
    case Kind::Seed: os << "seed:" << seed.x << "," << seed.y; break;
  }
  return os.str();
}

const Separatrix* FoliationChart::findSep(const std::string& id) const {
  for (const auto& s : seps)
    if (s.id == id) return &s;
  return nullptr;
}

const Transversal* FoliationChart::transversalOf(const std::string& sep_id) const {
  auto it = cst.find(sep_id);
  return it == cst.end() ? nullptr : &it->second;
}

namespace {

std::vector<Point2> sepSamples(const Separatrix& s, const PlanarField& field, const Box& box,
                               int n, const FlowOptions& fo) {
  std::vector<Point2> pts;
  if (s.desc.kind == SeparatrixDesc::Kind::LineY) {
    for (int i = 0; i < n; ++i)
      pts.push_back({box.x1 + box.width() * i / (n - 1.0), s.desc.value});
  } else if (s.desc.kind == SeparatrixDesc::Kind::LineX) {
    for (int i = 0; i < n; ++i)
      pts.push_back({s.desc.value, box.y1 + box.height() * i / (n - 1.0)});
  } else {
    const Polyline line = traceLeaf(field, s.desc.seed, box, fo.tol);
    const int stride = std::max<int>(1, static_cast<int>(line.size()) / n);
    for (std::size_t i = 0; i < line.size(); i += static_cast<std::size_t>(stride))
      pts.push_back(line[i].p);
  }
  return pts;
}

// Locates the single intersection of a transversal with a line separatrix by
// sign change of the line coordinate along the curve parameter, refined by
// bisection. Returns the number of crossings seen on the sampled range.
int lineCrossings(const Transversal& t, const SeparatrixDesc& d, double span, int samples,
                  Point2* found) {
  auto side = [&](double tau) -> std::optional<double> {
    const auto p = t.pointAt(tau);
    if (!p || !t.inGuard(*p)) return std::nullopt;
    return d.kind == SeparatrixDesc::Kind::LineY ? p->y - d.value : p->x - d.value;
  };
  int count = 0;
  double prev_tau = -span;
  auto prev = side(prev_tau);
  for (int i = 1; i <= samples; ++i) {
    const double tau = -span + 2.0 * span * i / samples;
    const auto cur = side(tau);
    if (prev && cur && ((*prev < 0 && *cur >= 0) || (*prev > 0 && *cur <= 0))) {
      ++count;
      double lo = prev_tau, hi = tau, flo = *prev;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto fm = side(mid);
        if (!fm) break;
        if ((flo < 0) == (*fm < 0)) {
          lo = mid;
          flo = *fm;
        } else {
          hi = mid;
        }
      }
      if (found) {
        const auto p = t.pointAt(0.5 * (lo + hi));
        if (p) *found = *p;
      }
    }
    if (cur) {
      prev = cur;
      prev_tau = tau;
    }
  }
  return count;
}

}  // namespace

FoliationChart buildChart(const PlanarField& field, std::vector<Separatrix> seps, CST cst,
                          const Box& box, const ChartOptions& opt_in) {
  FoliationChart chart;
  chart.field = field;
  chart.box = box;
  chart.options = opt_in;
  chart.options.flow.box = box;

  const ChartOptions& opt = chart.options;
  const FlowOptions& fo = chart.options.flow;

  // Regularity of the field on the box.
  Point2 worst;
  const double min2 = field.minSquaredNormOnGrid(box, 33, 33, &worst);
  if (!(min2 > 1e-24)) {
    std::ostringstream os;
    os << "field '" << field.name << "' is not regular on the box: |f|^2 = " << min2 << " at ("
       << worst.x << ", " << worst.y << ")";
    throw ValidationError(os.str());
  }

  // Separatrices must be leaves: the field is tangent to the declared curve.
  for (const auto& s : seps) {
    if (s.desc.kind == SeparatrixDesc::Kind::Seed) continue;
    for (const Point2 p : sepSamples(s, field, box, opt.curve_samples, fo)) {
      double v[2];
      if (!field.evalVec(p.x, p.y, v)) continue;
      const double norm = std::hypot(v[0], v[1]);
      const double residual =
          s.desc.kind == SeparatrixDesc::Kind::LineY ? std::fabs(v[1]) : std::fabs(v[0]);
      if (residual > opt.leaf_residual_tol * std::max(1.0, norm)) {
        std::ostringstream os;
        os << "separatrix '" << s.id << "' (" << s.desc.str()
           << ") is not a leaf: normal component " << residual << " at (" << p.x << ", " << p.y
           << ")";
        throw ValidationError(os.str());
      }
    }
  }

  // Adjacency must be declared symmetrically and never reflexively.
  for (const auto& s : seps) {
    for (const auto& other : s.inseparable_from) {
      if (other == s.id)
        throw ValidationError("separatrix '" + s.id + "' declared inseparable from itself");
      const Separatrix* o = nullptr;
      for (const auto& c : seps)
        if (c.id == other) o = &c;
      if (!o) throw ValidationError("separatrix '" + s.id + "' references unknown '" + other + "'");
      if (std::find(o->inseparable_from.begin(), o->inseparable_from.end(), s.id) ==
          o->inseparable_from.end())
        throw ValidationError("inseparability of '" + s.id + "' and '" + other +
                              "' is not declared symmetrically");
    }
  }

  // Transversality and single cut of the own separatrix.
  const double span = std::hypot(box.width(), box.height());
  std::vector<std::pair<std::string, Point2>> junctions;
  for (const auto& s : seps) {
    auto it = cst.find(s.id);
    if (it == cst.end())
      throw ValidationError("CST has no transversal for separatrix '" + s.id + "'");
    const Transversal& t = it->second;
    for (int i = 0; i <= opt.curve_samples; ++i) {
      const double tau = -span + 2.0 * span * i / opt.curve_samples;
      const auto p = t.pointAt(tau);
      if (!p || !t.inGuard(*p) || !box.contains(*p)) continue;
      const auto tan = t.tangentAt(*p);
      double v[2];
      if (!tan || !field.evalVec(p->x, p->y, v)) continue;
      const double norm = std::hypot(v[0], v[1]);
      const double det = tan->x * v[1] - tan->y * v[0];
      if (std::fabs(det) < opt.transversality_tol * norm) {
        std::ostringstream os;
        os << "transversal of '" << s.id << "' is tangent to the field at (" << p->x << ", "
           << p->y << ")";
        throw ValidationError(os.str());
      }
    }

    Point2 junction = t.anchor;
    if (s.desc.kind == SeparatrixDesc::Kind::Seed) {
      const auto c = findCrossing(field, s.desc.seed, t, opt.tmax, fo);
      if (!c)
        throw ValidationError("transversal of '" + s.id + "' does not cut its separatrix");
      junction = c->endpoint;
    } else {
      const int cuts = lineCrossings(t, s.desc, span, 4 * opt.curve_samples, &junction);
      if (cuts != 1) {
        std::ostringstream os;
        os << "transversal of '" << s.id << "' cuts its separatrix " << cuts
           << " times (expected exactly 1)";
        throw ValidationError(os.str());
      }
    }
    junctions.emplace_back(s.id, junction);
  }

  // Empirical coverage: every sampled leaf reaches some transversal, and no
  // traced leaf crosses any transversal more than once. A chart with no
  // separatrices is trivially valid (the globally rectifiable case).
  const int g = cst.empty() ? 0 : opt.coverage_grid;
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const Point2 seed{box.x1 + box.width() * (i + 0.5) / g,
                        box.y1 + box.height() * (j + 0.5) / g};
      std::map<std::string, int> crossings;
      for (const auto& [id, t] : cst) {
        if (t.inGuard(seed) && std::fabs(t.signedValue(seed)) <= 1e-9) crossings[id] = 1;
      }
      for (double dir : {1.0, -1.0}) {
        std::map<std::string, double> prev;
        Point2 prev_p = seed;
        for (const auto& [id, t] : cst) {
          const double v0 = t.signedValue(seed);
          if (std::isfinite(v0)) prev[id] = v0;
        }
        OdeObserver obs = [&](double, const double* y) {
          const Point2 p{y[0], y[1]};
          for (const auto& [id, t] : cst) {
            const double v = t.signedValue(p);
            if (!std::isfinite(v)) {
              prev.erase(id);
              continue;
            }
            auto itp = prev.find(id);
            if (itp != prev.end() &&
                ((itp->second < 0 && v >= 0) || (itp->second > 0 && v <= 0))) {
              // locate the crossing linearly; the guard decides whether the
              // right component of the level set was hit
              const double w = itp->second / (itp->second - v);
              const Point2 c{prev_p.x + w * (p.x - prev_p.x), prev_p.y + w * (p.y - prev_p.y)};
              if (t.inGuard(c)) ++crossings[id];
            }
            prev[id] = v;
          }
          prev_p = p;
        };
        OdeRhs rhs = [&](double, const double* y, double* dy) {
          return field.evalVec(y[0], y[1], dy);
        };
        OdeState st;
        st.n = 2;
        st[0] = seed.x;
        st[1] = seed.y;
        OdeOptions oo;
        oo.rtol = 1e-8;  // coverage is qualitative
        oo.atol = 1e-10;
        // No spatial clipping here: a leaf may meet its transversal far
        // outside the box while still doing so in modest flow time; blow-ups
        // end in a step underflow and simply stop the probe.
        integrateOde(rhs, st, 0.0, dir * opt.tmax, oo, nullptr, &obs);
      }
      int total = 0;
      for (auto& [id, c] : crossings) {
        total += c;
        if (c > 1) {
          std::ostringstream os;
          os << "leaf through (" << seed.x << ", " << seed.y << ") crosses transversal of '"
             << id << "' " << c << " times";
          throw ValidationError(os.str());
        }
      }
      if (total == 0) {
        std::ostringstream os;
        os << "coverage gap: leaf through (" << seed.x << ", " << seed.y
           << ") reaches no transversal";
        throw ValidationError(os.str());
      }
    }
  }

  // Enumerate adjacent pairs from the declared (ordered) inseparable lists.
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < seps.size(); ++i) {
    for (const auto& other : seps[i].inseparable_from) {
      std::size_t j = 0;
      while (j < seps.size() && seps[j].id != other) ++j;
      const std::size_t lo = std::min(i, j), hi = std::max(i, j);
      if (!seen.insert({seps[lo].id, seps[hi].id}).second) continue;

      AdjacentPair pair;
      pair.s1 = seps[lo].id;
      pair.s2 = seps[hi].id;
      pair.id = pair.s1 + "|" + pair.s2;
      if (std::fabs(seps[lo].F_level - seps[hi].F_level) > 1e-12)
        throw ValidationError("pair " + pair.id + ": separatrices sit on different F-levels");
      pair.a = seps[lo].F_level;
      for (auto& [id, p] : junctions) {
        if (id == pair.s1) pair.p1 = p;
        if (id == pair.s2) pair.p2 = p;
      }
      if (seps[lo].desc.kind != SeparatrixDesc::Kind::Seed &&
          seps[lo].desc.kind == seps[hi].desc.kind) {
        const double mid = 0.5 * (seps[lo].desc.value + seps[hi].desc.value);
        pair.region_sample = seps[lo].desc.kind == SeparatrixDesc::Kind::LineY
                                 ? Point2{0.5 * (pair.p1.x + pair.p2.x), mid}
                                 : Point2{mid, 0.5 * (pair.p1.y + pair.p2.y)};
      } else {
        pair.region_sample = {0.5 * (pair.p1.x + pair.p2.x), 0.5 * (pair.p1.y + pair.p2.y)};
      }

      // Inseparability witness: a leaf near the pair crossing both transversals.
      const Transversal* t1 = nullptr;
      const Transversal* t2 = nullptr;
      for (auto& [id, t] : cst) {
        if (id == pair.s1) t1 = &t;
        if (id == pair.s2) t2 = &t;
      }
      const auto w1 = findCrossing(field, pair.region_sample, *t1, opt.tmax, fo);
      const auto w2 = findCrossing(field, pair.region_sample, *t2, opt.tmax, fo);
      if (!w1 || !w2)
        throw ValidationError("pair " + pair.id +
                              ": no leaf witnessing inseparability was found");
      chart.pairs.push_back(std::move(pair));
    }
  }

  chart.seps = std::move(seps);
  chart.cst = std::move(cst);
  return chart;
}

Interval rectifiedInterval(const FoliationChart& chart, const AdjacentPair& pair, const Expr& F,
                           const Expr& G) {
  (void)F;
  Interval iv;
  iv.a = pair.a;

  const FlowOptions& fo = chart.options.flow;
  // G is strictly monotone along every leaf, so each separatrix has two
  // G-limits; the interval ends are the limits facing the other separatrix.
  auto limitToward = [&](Point2 start, double target_g, std::vector<double>& diag)
      -> double {
    const double g0 = G(start);
    // Choose the flow direction along the separatrix in which G moves toward
    // the other separatrix's G-range.
    const FlowResult probe = integrateFlow(chart.field, start, 0.25, fo);
    const double gf = G(probe.endpoint);
    const double dir = (std::fabs(gf - target_g) < std::fabs(g0 - target_g)) ? 1.0 : -1.0;
    double t = 0.5;
    std::vector<double> vals{g0};
    Point2 p = start;
    for (int m = 0; m < 14; ++m) {
      const FlowResult r = integrateFlow(chart.field, p, dir * t, fo);
      if (r.status != OdeStatus::ReachedTime && r.status != OdeStatus::LeftBox) break;
      p = r.endpoint;
      const double gv = G(p);
      if (!std::isfinite(gv)) break;
      vals.push_back(gv);
      if (r.status == OdeStatus::LeftBox) break;
      t *= 2.0;  // geometric schedule in flow time
    }
    diag = vals;
    SeqPolicy pol;
    pol.stab_atol = 1e-9;
    const SeqVerdict v = classifySequence(vals, pol);
    if (v.cls == SeqClass::Finite) return v.limit;
    if (v.cls == SeqClass::Divergent)
      throw ValidationError("pair " + pair.id + ": separating interval is unbounded");
    // Monotone tails that reach the box edge before the extrapolant settles
    // are accepted at their last value.
    return vals.back();
  };

  const double g1 = G(pair.p1), g2 = G(pair.p2);
  const double hi = limitToward(g1 > g2 ? pair.p1 : pair.p2, std::min(g1, g2), iv.diag_s1);
  const double lo = limitToward(g1 > g2 ? pair.p2 : pair.p1, std::max(g1, g2), iv.diag_s2);
  if (lo > hi + 1e-9)
    throw ValidationError("pair " + pair.id + ": rectified interval bounds cross");
  iv.b1 = std::min(lo, hi);
  iv.b2 = std::max(lo, hi);
  return iv;
}

}  // namespace pcoh
