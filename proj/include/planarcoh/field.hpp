#pragma once

#include <optional>
#include <string>
#include <vector>

#include "planarcoh/expr.hpp"
#include "planarcoh/geometry.hpp"
#include "planarcoh/ode.hpp"

namespace pcoh {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluatable planar vector field with cached exact partials of both
/// components. Assumed regular (no zeros) on the working box; this is
/// checked, not trusted.
struct PlanarField {
  Expr fx, fy;
  std::string name;
  Expr fx_x, fx_y, fy_x, fy_y;

  static PlanarField make(Expr fx, Expr fy, std::string name = "field");
  static PlanarField parse(const std::string& fx_src, const std::string& fy_src,
                           std::string name = "field");

  bool evalVec(double x, double y, double out[2]) const;

  /// Symbolic Lie derivative of a scalar: fx * de/dx + fy * de/dy.
  Expr lieDerivative(const Expr& e) const;

  /// Minimum of fx^2 + fy^2 over an nx-by-ny sampling grid.
  double minSquaredNormOnGrid(const Box& box, int nx, int ny, Point2* worst = nullptr) const;
};

/// A curve everywhere transversal to the foliation, represented through a
/// defining function: the curve is a connected component of {defining = level}
/// selected by the anchor point (and optionally a guard box).
struct Transversal {
  enum class Kind { VerticalSegment, HorizontalSegment, LevelSet };

  Kind kind = Kind::LevelSet;
  Expr defining;       // segments use x or y as the defining function
  double level = 0.0;
  Point2 anchor;       // on the curve; parameter origin
  std::optional<Box> guard;
  int orientation = +1;
  // Sign of the Lie derivative of the defining function along the field when
  // it is uniform over the working box (0 = unknown). A nonzero tag lets
  // crossing searches skip directions in which the signed value moves away
  // from zero, which would otherwise chase leaves across half the plane.
  int flow_monotone = 0;

  static Transversal verticalSegment(double x, Point2 anchor_hint = {});
  static Transversal horizontalSegment(double y, Point2 anchor_hint = {});
  static Transversal levelSet(Expr defining, double level, Point2 anchor,
                              std::optional<Box> guard = std::nullopt);

  double signedValue(Point2 p) const { return defining(p) - level; }
  bool inGuard(Point2 p) const { return !guard || guard->contains(p, 1e-9); }

  /// Point at (approximate) arclength tau from the anchor, following the
  /// level curve; tau > 0 follows the rotated gradient times orientation.
  std::optional<Point2> pointAt(double tau) const;

  /// Unit tangent of the curve at p (rotated, normalized gradient).
  std::optional<Point2> tangentAt(Point2 p) const;
};

struct FlowResult {
  Point2 endpoint;
  double elapsed = 0.0;
  OdeStatus status = OdeStatus::ReachedTime;
  double event_residual = 0.0;
  double integral = 0.0;  // accumulated integrand, when one was attached
  long steps = 0;
};

struct FlowOptions {
  double tol = 1e-10;
  Box box;                       // hard stop for trajectories
  double box_inflate = 10.0;     // integration happens on box.inflated(this)
  double hmax = 50.0;
  // Bail out once the attached path integral exceeds this magnitude: a probe
  // whose running integral left this range is divergent-scale and chasing its
  // crossing further only burns steps in amplified roundoff.
  double acc_limit = 1e12;
  Box integrationBox() const { return box.inflated(box_inflate); }
};

/// Endpoint of the flow after time t (adaptive local error <= tol per step).
FlowResult integrateFlow(const PlanarField& f, Point2 p0, double t, const FlowOptions& opt,
                         const Expr* integrand = nullptr, const Expr* weight = nullptr);

/// Flows from p0 (forward when tmax > 0, backward when tmax < 0) until the
/// target transversal is crossed; the crossing is localized to
/// |defining - level| below roughly 1e-10. status Event on success.
FlowResult flowToCrossing(const PlanarField& f, Point2 p0, const Transversal& target,
                          double tmax, const FlowOptions& opt,
                          const Expr* integrand = nullptr, const Expr* weight = nullptr);

/// Searches forward then backward; `prefer` (+1/-1) picks which direction is
/// tried first (a hint, not a constraint).
std::optional<FlowResult> findCrossing(const PlanarField& f, Point2 p0,
                                       const Transversal& target, double tmax,
                                       const FlowOptions& opt,
                                       const Expr* integrand = nullptr,
                                       const Expr* weight = nullptr, int prefer = 0);

struct PolylinePoint {
  double t;
  Point2 p;
};
using Polyline = std::vector<PolylinePoint>;

/// Forward and backward arcs through p0 until the box is left (or the time
/// budget runs out); points are spaced at most max_spatial_step apart.
Polyline traceLeaf(const PlanarField& f, Point2 p0, const Box& box, double tmax = 1e4,
                   double tol = 1e-10, double max_spatial_step = 0.05);

}  // namespace pcoh
