#pragma once

#include <map>
#include <string>
#include <vector>

#include "planarcoh/field.hpp"

namespace pcoh {

/// Analytic description of a separatrix: a straight line x=c / y=c, or a leaf
/// identified by a seed point. Separatrices are declared, not discovered; the
/// built-in model registry supplies them and user fields must list theirs.
struct SeparatrixDesc {
  enum class Kind { LineY, LineX, Seed };
  Kind kind = Kind::LineY;
  double value = 0.0;
  Point2 seed;

  static SeparatrixDesc parse(const std::string& text);
  std::string str() const;
};

struct Separatrix {
  std::string id;
  SeparatrixDesc desc;
  double F_level = 0.0;  // value of the kernel generator on this leaf
  std::vector<std::string> inseparable_from;  // ordered
};

/// Complete set of transversals: one transversal per separatrix.
using CST = std::map<std::string, Transversal>;

struct AdjacentPair {
  std::string id;
  std::string s1, s2;      // s1 precedes s2 in declaration order
  double a = 0.0;          // shared F-level
  Point2 p1, p2;           // transversal-separatrix junctions
  Point2 region_sample;    // a point inside the separating canonical region
};

struct ChartOptions {
  int curve_samples = 64;
  int coverage_grid = 7;   // coverage_grid^2 leaf seeds
  double tmax = 1e3;
  double transversality_tol = 1e-6;
  double leaf_residual_tol = 1e-10;
  FlowOptions flow;
};

struct FoliationChart {
  PlanarField field;
  Box box;
  std::vector<Separatrix> seps;  // declaration order = chain/stitching order
  CST cst;
  std::vector<AdjacentPair> pairs;
  ChartOptions options;

  const Separatrix* findSep(const std::string& id) const;
  const Transversal* transversalOf(const std::string& sep_id) const;
};

/// Validates the declared data and assembles the chart: transversality and
/// single-crossing per transversal, separatrices tangent to the field,
/// empirical coverage of the box by the CST, adjacency symmetric and
/// irreflexive, and one inseparability witness per adjacent pair.
/// Violations throw ValidationError with the offending location.
FoliationChart buildChart(const PlanarField& field, std::vector<Separatrix> seps, CST cst,
                          const Box& box, const ChartOptions& opt = {});

struct Interval {
  double a = 0.0;
  double b1 = 0.0, b2 = 0.0;
  std::vector<double> diag_s1, diag_s2;  // extrapolation traces
};

/// Vertical interval {a} x [b1,b2] separating the images of the two
/// separatrices of a pair in the rectified plane. The bounds are the limits of
/// G along each separatrix toward the shared end, located by flowing along the
/// separatrix leaves and extrapolating. A pair may legitimately collapse to a
/// single point (b1 == b2).
Interval rectifiedInterval(const FoliationChart& chart, const AdjacentPair& pair,
                           const Expr& F, const Expr& G);

}  // namespace pcoh
