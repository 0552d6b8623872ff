#pragma once

#include <map>
#include <optional>

#include "planarcoh/hamiltonian.hpp"
#include "planarcoh/numerics.hpp"

namespace pcoh {

/// Parametrization of the integrals along leaves. Field uses the field's own
/// time (the classical gap; constants diverge together with the crossing
/// time). Hamiltonian reparametrizes by G, the unit-speed time of the
/// normalized kernel field; this is the parametrization under which the
/// solver and the germ functionals operate.
enum class TimeParam { Field, Hamiltonian };

struct GapSchedule {
  int steps = 12;
  double d0 = 0.5;       // first offset along the transversal
  double shrink = 0.5;   // geometric factor per schedule point
  double tmax = 1e4;
  double tol = 1e-10;
  TimeParam time = TimeParam::Field;
  SeqPolicy policy;
};

struct GapResult {
  SeqClass cls = SeqClass::Inconclusive;
  double value = 0.0;
  double rate = 0.0;
  int order = 0;
  std::string pair_id;
  TimeParam time = TimeParam::Field;
  std::vector<double> partials;
  Point2 p1, p2;
  std::string note;
};

/// Limit of the integral of the k-th Lie derivative of g along the normalized
/// G-field, integrated along leaves from the transversal of pair.s1 to the
/// transversal of pair.s2, over a geometric schedule of start points
/// approaching the junction on the s1 side of the separating region.
GapResult gapBetween(const FoliationChart& chart, const DerivedPair& dp, const Expr& g,
                     const AdjacentPair& pair, int k, const GapSchedule& schedule);

struct PairOrderResult {
  std::string pair_id;
  int k = 0;
  GapResult gap;
};

struct SolvabilityVerdict {
  int solvable_to_order = -1;  // largest r with all gaps finite for k <= r
  bool inconclusive = false;   // some ladder stopped without a clean verdict
  std::vector<PairOrderResult> table;
  TimeParam time = TimeParam::Hamiltonian;
};

/// Schedule for diagnosis: the verdict concerns the equation driven by the
/// normalized kernel field, whose gaps live in the G-parametrization.
inline GapSchedule diagnoseSchedule() {
  GapSchedule s;
  s.time = TimeParam::Hamiltonian;
  return s;
}

/// Runs the gap ladder for every adjacent pair and k = 0..kmax. The verdict is
/// always "solvable to order r": a finite kmax can certify no more.
SolvabilityVerdict diagnose(const FoliationChart& chart, const DerivedPair& dp, const Expr& g,
                            int kmax, GapSchedule schedule = diagnoseSchedule());

struct GridSpec {
  Box box;
  int nx = 81, ny = 81;
};

enum class CellStatus : unsigned char { Ok = 0, Unreachable = 1, ExtensionBlocked = 2, Fault = 3 };

struct StitchRecord {
  std::string sep_id;    // transversal that was seeded by continuation
  std::string pair_id;   // pair across which the solution was continued
  SeqClass cls = SeqClass::Inconclusive;
  double limit = 0.0;
  double data_mismatch = 0.0;  // |user initial - continuation| at the junction
  bool performed = false;
};

struct SolutionGrid {
  GridSpec grid;
  std::vector<double> xs, ys;       // flattened row-major: (iy, ix)
  std::vector<double> f, residual;
  std::vector<CellStatus> status;
  std::vector<StitchRecord> stitches;
  bool extension_failure = false;
  std::string failure_pair;

  double maxResidual() const;
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid.nx) +
           static_cast<std::size_t>(ix);
  }
};

struct SolveOptions {
  TimeParam time = TimeParam::Hamiltonian;
  double tol = 1e-10;
  double tmax = 1e4;
  GapSchedule stitch_schedule;  // limits used when continuing across a pair
  bool force = false;
};

/// Method of characteristics: every grid point is flowed to the transversal
/// that owns its leaf (stitching order = declaration order), f accumulates the
/// integral of g in the requested time parametrization, initial data comes
/// from the per-separatrix expressions (default 0 on the first transversal).
/// Across an adjacent pair the data on the next transversal is the continuous
/// extension of the already-built solution, realized as the extrapolated limit
/// at the junction; a divergent limit is an extension failure reported with
/// the offending pair.
SolutionGrid solveGrid(const FoliationChart& chart, const DerivedPair& dp, const Expr& g,
                       const GridSpec& grid, const std::map<std::string, Expr>& initial,
                       const SolveOptions& opt);

// --- rectified-plane machinery -------------------------------------------

struct GermInterval {
  double a = 0.0;
  double b1 = 0.0, b2 = 0.0;
  double c1 = 0.0, c2 = 0.0;  // chart bounds: c1 < b1 <= b2 < c2
  int approach = -1;          // region side: -1 means x' < a
};

/// Assembles the separating interval of a pair together with the normal-chart
/// bounds taken from the CST junctions.
GermInterval germInterval(const FoliationChart& chart, const DerivedPair& dp,
                          const AdjacentPair& pair);

/// One germ-functional sample: integral of ghat(x', .) across the interval
/// widened by eps. Requires 0 < eps < min(c2-b2, b1-c1).
QuadResult germH(const Expr& ghat, const GermInterval& iv, double eps, double xprime,
                 double atol = 1e-10);

struct OrderRung {
  int k = 0;
  SeqClass cls = SeqClass::Inconclusive;
  double limit = 0.0;
  std::vector<double> h_trace;
};

struct RegularityReport {
  int max_order = -1;  // -1: already order 0 fails
  bool inconclusive_halt = false;
  std::vector<OrderRung> rungs;
};

/// Regularity ladder: order k passes when the germ functional of the k-th
/// x'-derivative of ghat extends finitely to the separatrix level. Exact
/// symbolic partials are used for expression integrands. The ladder is
/// monotone by construction: it stops at the first failure.
RegularityReport estimateOrder(const Expr& ghat, const GermInterval& iv, int rmax, double eps,
                               int steps = 12, double x0 = 0.5);

/// Sampler variant: derivatives of the trace h(x') are formed by 5-point
/// stencils (the functional commutes with d/dx').
RegularityReport estimateOrderSampled(
    const std::function<std::optional<double>(double, double)>& ghat, const GermInterval& iv,
    int rmax, double eps, int steps = 12, double x0 = 0.5);

struct RectRegion {
  double x1 = -1.0, x2 = 0.0;  // x' range of the chart
  double c1 = -1.0, c2 = 1.0;  // y' range
  double a = 0.0;              // separatrix level bounding the excluded rectangle
  int approach = -1;           // plain side of a
  std::optional<std::pair<double, double>> excluded_y;  // [b1,b2] beyond a
};

/// Antiderivative in y' of ghat on a normal chart: f(x',y') = integral from a
/// per-chart baseline. Quadrature refuses to cross the excluded rectangle.
class RectifiedSolution {
 public:
  RectifiedSolution(Expr ghat, RectRegion region, std::optional<double> baseline = std::nullopt);
  std::optional<double> value(double xp, double yp, std::string* why = nullptr) const;
  double baselineY() const { return y0_; }

 private:
  Expr ghat_;
  RectRegion region_;
  double y0_;
};

}  // namespace pcoh
