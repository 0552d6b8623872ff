#pragma once

#include <array>
#include <functional>

#include "planarcoh/geometry.hpp"

namespace pcoh {

inline constexpr int kMaxOdeDim = 8;

struct OdeState {
  std::array<double, kMaxOdeDim> y{};
  int n = 2;
  double& operator[](int i) { return y[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return y[static_cast<std::size_t>(i)]; }
};

/// Right-hand side; returns false on a domain fault (the step is rejected and,
/// if no step survives, the integration ends with DomainFault).
using OdeRhs = std::function<bool(double t, const double* y, double* dydt)>;

/// Scalar whose sign change marks a crossing. NaN disables detection locally
/// (used for guarded transversal components).
using OdeEvent = std::function<double(double t, const double* y)>;

/// Invoked after every accepted step with (t, state).
using OdeObserver = std::function<void(double t, const double* y)>;

enum class OdeStatus {
  ReachedTime,
  Event,
  LeftBox,
  StepUnderflow,
  DomainFault,
  StepLimit,
  Stopped  // a component magnitude bound was hit
};

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h0 = 0.0;      // 0 = choose automatically
  double hmax = 50.0;
  const Box* stop_box = nullptr;  // applies to components 0,1
  long max_steps = 4000000;
  int stop_component = -1;        // stop when |y[c]| exceeds stop_abs
  double stop_abs = 0.0;
};

struct OdeOutcome {
  OdeStatus status = OdeStatus::ReachedTime;
  double t = 0.0;
  OdeState y;
  double event_residual = 0.0;
  long steps = 0;
};

/// Embedded Dormand-Prince 5(4) pair with PI step-size control. Events are
/// bracketed by sign change over an accepted step, localized by bisection on
/// the cubic Hermite interpolant to 1e-12 in t, then polished with Newton
/// steps that re-integrate the step head.
OdeOutcome integrateOde(const OdeRhs& rhs, const OdeState& y0, double t0, double t1,
                        const OdeOptions& opt, const OdeEvent* event = nullptr,
                        const OdeObserver* observer = nullptr);

}  // namespace pcoh
