#include "planarcoh/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace pcoh {

std::vector<double> aitken(std::span<const double> seq) {
  std::vector<double> out;
  if (seq.size() < 3) return out;
  out.reserve(seq.size() - 2);
  for (std::size_t i = 0; i + 2 < seq.size(); ++i) {
    const double d1 = seq[i + 1] - seq[i];
    const double d2 = seq[i + 2] - seq[i + 1];
    const double den = d2 - d1;
    if (std::fabs(den) < 1e-300) {
      out.push_back(seq[i + 2]);
    } else {
      out.push_back(seq[i + 2] - d2 * d2 / den);
    }
  }
  return out;
}

SeqVerdict classifySequence(std::span<const double> partials, const SeqPolicy& policy) {
  SeqVerdict v;
  const std::size_t n = partials.size();
  if (n < 4) {
    v.note = "too few schedule points";
    return v;
  }

  // Increment ratios over the tail of the raw sequence.
  std::vector<double> ratios;
  for (std::size_t i = 0; i + 2 < n; ++i) {
    const double d1 = partials[i + 1] - partials[i];
    const double d2 = partials[i + 2] - partials[i + 1];
    if (std::fabs(d1) > 1e-300) ratios.push_back(d2 / d1);
  }
  double tail_ratio = 0.0;
  if (!ratios.empty()) {
    const std::size_t k = std::min<std::size_t>(ratios.size(), 3);
    std::vector<double> tail(ratios.end() - static_cast<long>(k), ratios.end());
    std::sort(tail.begin(), tail.end());
    tail_ratio = tail[tail.size() / 2];
  }
  v.rate = tail_ratio;

  bool monotone_grow = true;
  for (std::size_t i = n - std::min<std::size_t>(n, 4); i + 1 < n; ++i) {
    if (std::fabs(partials[i + 1]) < std::fabs(partials[i]) - 1e-14) monotone_grow = false;
  }

  // Aitken stabilization, once and iterated (the iterated pass absorbs the
  // slow ratio drift of x log(1/x)-type traces).
  auto stable_tail = [&](const std::vector<double>& acc, double* limit) {
    if (acc.size() < static_cast<std::size_t>(policy.tail)) return false;
    const double last = acc.back();
    for (int i = 1; i < policy.tail; ++i) {
      const double prev = acc[acc.size() - 1 - static_cast<std::size_t>(i)];
      const double tol = policy.stab_atol + policy.stab_rtol * std::fabs(last);
      if (!(std::fabs(prev - last) <= tol)) return false;
    }
    if (!std::isfinite(last) || std::fabs(last) >= policy.divergence_threshold) return false;
    *limit = last;
    return true;
  };
  const std::vector<double> acc1 = aitken(partials);
  const std::vector<double> acc2 = aitken(acc1);
  double limit;
  if (stable_tail(acc1, &limit) || stable_tail(acc2, &limit)) {
    v.cls = SeqClass::Finite;
    v.limit = limit;
    return v;
  }

  const bool huge = std::fabs(partials.back()) > policy.divergence_threshold;
  const bool non_contracting = tail_ratio >= policy.divergence_ratio;
  if (monotone_grow && (huge || non_contracting)) {
    v.cls = SeqClass::Divergent;
    v.note = huge ? "partial integrals beyond threshold" : "increments stopped contracting";
    return v;
  }

  // A uniformly contracting tail is a Cauchy sequence even when the
  // extrapolant has not settled to tolerance yet; report the geometric
  // estimate of its limit.
  bool contracting = ratios.size() >= 3;
  for (std::size_t i = ratios.size() - std::min<std::size_t>(ratios.size(), 4);
       i < ratios.size() && contracting; ++i)
    if (!(std::fabs(ratios[i]) <= 0.85)) contracting = false;
  if (contracting) {
    const double d = partials[n - 1] - partials[n - 2];
    const double r = std::clamp(tail_ratio, -0.85, 0.85);
    v.cls = SeqClass::Finite;
    v.limit = partials[n - 1] + d * r / (1 - r);
    v.note = "contracting tail";
    return v;
  }

  v.cls = SeqClass::Inconclusive;
  v.note = "extrapolant did not stabilize";
  return v;
}

namespace {

struct QuadCtx {
  const std::function<std::optional<double>(double)>& f;
  double atol;
  int max_depth;
  bool divergent = false;
  double trouble_at = 0.0;
  bool any_fault_leaf = false;
};

// Values at faulted points are treated as 0 within a leaf interval once the
// interval has been refined to negligible width; a fault that keeps a whole
// refinement branch alive marks the integral divergent.
std::optional<double> evalSafe(QuadCtx& c, double x) { return c.f(x); }

double simpson(double fa, double fm, double fb, double h) { return h / 6.0 * (fa + 4 * fm + fb); }

double recurse(QuadCtx& c, double a, double b, double fa, double fm, double fb, double whole,
               int depth) {
  if (c.divergent) return 0.0;
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const auto flmo = evalSafe(c, lm);
  const auto frmo = evalSafe(c, rm);
  if (!flmo || !frmo) {
    if (depth >= c.max_depth || (b - a) < 1e-14 * (std::fabs(a) + std::fabs(b) + 1.0)) {
      c.any_fault_leaf = true;
      c.divergent = true;
      c.trouble_at = !flmo ? lm : rm;
      return 0.0;
    }
    const double fl2 = flmo.value_or(0.0), fr2 = frmo.value_or(0.0);
    // refine both halves; the faulting half will keep shrinking
    const double left = recurse(c, a, m, fa, flmo ? fl2 : fa, fm, simpson(fa, fm, fm, m - a),
                                depth + 1);
    const double right = recurse(c, m, b, fm, frmo ? fr2 : fb, fb, simpson(fm, fm, fb, b - m),
                                 depth + 1);
    return left + right;
  }
  const double flm = *flmo, frm = *frmo;
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (std::fabs(left + right) > 1e12) {
    c.divergent = true;
    c.trouble_at = m;
    return 0.0;
  }
  if (depth >= c.max_depth) {
    if (std::fabs(delta) > 1e3 * c.atol) {
      c.divergent = true;  // refinement exhausted without convergence
      c.trouble_at = m;
    }
    return left + right + delta / 15.0;
  }
  if (std::fabs(delta) <= 15.0 * c.atol * std::max(1e-6, (b - a)))
    return left + right + delta / 15.0;
  return recurse(c, a, m, fa, flm, fm, left, depth + 1) +
         recurse(c, m, b, fm, frm, fb, right, depth + 1);
}

}  // namespace

QuadResult adaptiveQuad(const std::function<std::optional<double>(double)>& f, double a,
                        double b, double atol, int max_depth) {
  QuadResult r;
  if (a == b) {
    r.converged = true;
    return r;
  }
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  QuadCtx c{f, atol / std::max(1.0, b - a), max_depth, false, 0.0, false};
  const auto fao = f(a), fbo = f(b), fmo = f(0.5 * (a + b));
  // Endpoint faults are nudged inward (integrals up to a singular endpoint
  // appear when probing germ windows).
  double fa = 0, fb = 0, fm = 0;
  if (fao) fa = *fao; else {
    const auto g = f(a + 1e-12 * (b - a));
    if (!g) { r.divergent = true; r.trouble_at = a; return r; }
    fa = *g;
  }
  if (fbo) fb = *fbo; else {
    const auto g = f(b - 1e-12 * (b - a));
    if (!g) { r.divergent = true; r.trouble_at = b; return r; }
    fb = *g;
  }
  if (fmo) fm = *fmo; else {
    c.divergent = true;
    c.trouble_at = 0.5 * (a + b);
  }
  double v = 0.0;
  if (!c.divergent) v = recurse(c, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), 0);
  r.value = sign * v;
  r.divergent = c.divergent;
  r.trouble_at = c.trouble_at;
  r.converged = !c.divergent;
  r.error = atol;
  return r;
}

}  // namespace pcoh
