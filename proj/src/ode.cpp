#include "planarcoh/ode.hpp"

#include <algorithm>
#include <cmath>

namespace pcoh {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

struct Stepper {
  const OdeRhs& rhs;
  int n;
  std::array<double, kMaxOdeDim> k1, k2, k3, k4, k5, k6, k7, tmp;

  // Single trial step from (t, y) with size h. On success fills y1 (5th
  // order), err (per-component difference against the embedded 4th order)
  // and k7 = f(t+h, y1) for FSAL reuse.
  bool step(double t, const double* y, double h, double* y1, double* err) {
    auto stage = [&](double frac, std::initializer_list<std::pair<const double*, double>> comb,
                     double* k) {
      for (int i = 0; i < n; ++i) {
        double s = y[i];
        for (auto& [kk, a] : comb) s += h * a * kk[i];
        tmp[static_cast<std::size_t>(i)] = s;
      }
      return rhs(t + frac * h, tmp.data(), k);
    };
    if (!stage(c2, {{k1.data(), a21}}, k2.data())) return false;
    if (!stage(c3, {{k1.data(), a31}, {k2.data(), a32}}, k3.data())) return false;
    if (!stage(c4, {{k1.data(), a41}, {k2.data(), a42}, {k3.data(), a43}}, k4.data()))
      return false;
    if (!stage(c5, {{k1.data(), a51}, {k2.data(), a52}, {k3.data(), a53}, {k4.data(), a54}},
               k5.data()))
      return false;
    if (!stage(1.0,
               {{k1.data(), a61}, {k2.data(), a62}, {k3.data(), a63}, {k4.data(), a64},
                {k5.data(), a65}},
               k6.data()))
      return false;
    for (int i = 0; i < n; ++i)
      y1[i] = y[i] + h * (b1 * k1[static_cast<std::size_t>(i)] + b3 * k3[static_cast<std::size_t>(i)] +
                          b4 * k4[static_cast<std::size_t>(i)] + b5 * k5[static_cast<std::size_t>(i)] +
                          b6 * k6[static_cast<std::size_t>(i)]);
    if (!rhs(t + h, y1, k7.data())) return false;
    for (int i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double y4 = y[i] + h * (e1 * k1[s] + e3 * k3[s] + e4 * k4[s] + e5 * k5[s] +
                                    e6 * k6[s] + e7 * k7[s]);
      err[i] = y1[i] - y4;
    }
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(y1[i]) || !std::isfinite(err[i])) return false;
    }
    return true;
  }
};

double hermite(double y0, double f0, double y1, double f1, double h, double theta) {
  const double t = theta, u = 1.0 - theta;
  return u * y0 + t * y1 + t * u * ((y0 - y1) * (t - u) + h * (u * f0 - t * f1));
}

}  // namespace

OdeOutcome integrateOde(const OdeRhs& rhs, const OdeState& y0, double t0, double t1,
                        const OdeOptions& opt, const OdeEvent* event,
                        const OdeObserver* observer) {
  OdeOutcome out;
  out.y = y0;
  out.t = t0;
  const int n = y0.n;
  Stepper st{rhs, n, {}, {}, {}, {}, {}, {}, {}, {}};

  if (t1 == t0) return out;
  const double dir = t1 > t0 ? 1.0 : -1.0;

  std::array<double, kMaxOdeDim> y = y0.y, y1{}, err{};
  double t = t0;
  if (!rhs(t, y.data(), st.k1.data())) {
    out.status = OdeStatus::DomainFault;
    return out;
  }

  double h = opt.h0;
  if (h == 0.0) {
    double fs = 0.0, ys = 0.0;
    for (int i = 0; i < n; ++i) {
      fs = std::max(fs, std::fabs(st.k1[static_cast<std::size_t>(i)]));
      ys = std::max(ys, std::fabs(y[static_cast<std::size_t>(i)]));
    }
    h = 0.01 * (ys + 1.0) / (fs + 1.0);
  }
  h = std::min({std::fabs(h), opt.hmax, std::fabs(t1 - t0)}) * dir;

  double prev_err = 1.0;
  double ev_prev = event ? (*event)(t, y.data()) : 0.0;
  int consecutive_rejects = 0;

  auto finish = [&](OdeStatus s) {
    out.status = s;
    out.t = t;
    for (int i = 0; i < n; ++i) out.y[i] = y[static_cast<std::size_t>(i)];
    return out;
  };

  while (dir * (t1 - t) > 1e-14 * (std::fabs(t) + 1.0)) {
    if (out.steps >= opt.max_steps) return finish(OdeStatus::StepLimit);
    if (dir * (t + h) > dir * t1) h = t1 - t;

    const bool ok = st.step(t, y.data(), h, y1.data(), err.data());
    double enorm = 0.0;
    if (ok) {
      for (int i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        const double sc = opt.atol +
                          opt.rtol * std::max(std::fabs(y[s]), std::fabs(y1[s]));
        enorm += (err[s] / sc) * (err[s] / sc);
      }
      enorm = std::sqrt(enorm / n);
    }

    if (!ok || enorm > 1.0) {
      // reject
      const double shrink = ok ? std::max(0.2, 0.9 * std::pow(enorm, -0.2)) : 0.25;
      h *= shrink;
      if (std::fabs(h) < 1e-14 * (std::fabs(t) + 1.0) + 1e-300) {
        if (++consecutive_rejects > 3 || !ok)
          return finish(ok ? OdeStatus::StepUnderflow : OdeStatus::DomainFault);
      }
      if (!ok && std::fabs(h) < 1e-13 * (std::fabs(t) + 1.0) + 1e-300)
        return finish(OdeStatus::DomainFault);
      ++consecutive_rejects;
      continue;
    }
    consecutive_rejects = 0;
    ++out.steps;

    const double t_new = t + h;
    if (event) {
      const double ev_new = (*event)(t_new, y1.data());
      const bool bracket = std::isfinite(ev_prev) && std::isfinite(ev_new) &&
                           ((ev_prev < 0 && ev_new >= 0) || (ev_prev > 0 && ev_new <= 0));
      if (bracket) {
        // Bisection on the Hermite interpolant.
        double lo = 0.0, hi = 1.0;
        std::array<double, kMaxOdeDim> yi{};
        auto evalAt = [&](double theta) {
          for (int i = 0; i < n; ++i) {
            const auto s = static_cast<std::size_t>(i);
            yi[s] = hermite(y[s], st.k1[s], y1[static_cast<std::size_t>(i)], st.k7[s], h, theta);
          }
          return (*event)(t + theta * h, yi.data());
        };
        double flo = ev_prev;
        for (int it = 0; it < 80 && (hi - lo) * std::fabs(h) > 1e-13; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = evalAt(mid);
          if (!std::isfinite(fm)) break;
          if ((flo < 0) == (fm < 0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        double t_ev = t + 0.5 * (lo + hi) * h;

        // Newton polish: re-step the head exactly and use E' = grad(E) . f
        // approximated through a small secant.
        std::array<double, kMaxOdeDim> ye{}, ke{}, edum{};
        for (int polish = 0; polish < 3; ++polish) {
          const double hh = t_ev - t;
          bool sok = true;
          if (std::fabs(hh) > 1e-300) {
            Stepper st2{rhs, n, {}, {}, {}, {}, {}, {}, {}, {}};
            st2.k1 = st.k1;
            sok = st2.step(t, y.data(), hh, ye.data(), edum.data());
          } else {
            for (int i = 0; i < n; ++i) ye[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
          }
          if (!sok) break;
          const double E = (*event)(t_ev, ye.data());
          if (!std::isfinite(E)) break;
          if (!rhs(t_ev, ye.data(), ke.data())) break;
          const double dt_fd = 1e-7 * (std::fabs(h) + 1.0);
          for (int i = 0; i < n; ++i)
            yi[static_cast<std::size_t>(i)] =
                ye[static_cast<std::size_t>(i)] + dt_fd * ke[static_cast<std::size_t>(i)];
          const double E2 = (*event)(t_ev + dt_fd, yi.data());
          const double dE = (E2 - E) / dt_fd;
          if (!std::isfinite(dE) || dE == 0.0) break;
          const double t_next = t_ev - E / dE;
          if (!(std::fabs(t_next - t) <= std::fabs(h) * 1.5)) break;
          t_ev = t_next;
        }
        // Final state at the event.
        const double hh = t_ev - t;
        std::array<double, kMaxOdeDim> yf{};
        if (std::fabs(hh) > 1e-300) {
          Stepper st2{rhs, n, {}, {}, {}, {}, {}, {}, {}, {}};
          st2.k1 = st.k1;
          if (!st2.step(t, y.data(), hh, yf.data(), edum.data())) yf = y1;
        } else {
          yf = y;
        }
        t = t_ev;
        y = yf;
        out.event_residual = std::fabs((*event)(t, y.data()));
        return finish(OdeStatus::Event);
      }
      ev_prev = ev_new;
    }

    t = t_new;
    y = y1;
    st.k1 = st.k7;  // FSAL
    if (observer) (*observer)(t, y.data());

    if (opt.stop_box && !opt.stop_box->contains({y[0], y[1]})) return finish(OdeStatus::LeftBox);
    if (opt.stop_component >= 0 && opt.stop_component < n &&
        std::fabs(y[static_cast<std::size_t>(opt.stop_component)]) > opt.stop_abs)
      return finish(OdeStatus::Stopped);

    // PI controller.
    const double fac = 0.9 * std::pow(enorm > 0 ? enorm : 1e-10, -0.7 / 5.0) *
                       std::pow(prev_err > 0 ? prev_err : 1e-10, 0.4 / 5.0);
    prev_err = enorm > 0 ? enorm : 1e-10;
    h *= std::clamp(fac, 0.2, 5.0);
    if (std::fabs(h) > opt.hmax) h = opt.hmax * dir;
  }
  t = t1;
  return finish(OdeStatus::ReachedTime);
}

}  // namespace pcoh
