#pragma once

#include <array>
#include <functional>

#include "planarcoh/foliation.hpp"

namespace pcoh {

/// F generates the kernel of the Lie derivative along the field (its level
/// sets are the leaves); G is a Hamiltonian whose level sets are everywhere
/// transversal to them. dF may vanish on the listed degenerate separatrices.
struct HamiltonianPair {
  Expr F, G;
  std::vector<std::string> degenerate_ids;
  double collar_halfwidth = 0.05;
};

/// Everything derived symbolically from (F, G): the area density of
/// dF ^ dG against dx ^ dy, and the commuting pair of Hamiltonian fields
/// normalized by that density. Evaluators report a domain fault wherever the
/// density vanishes.
struct DerivedPair {
  Expr F, G;
  Expr Fx, Fy, Gx, Gy;
  Expr density;            // Fx*Gy - Fy*Gx
  Expr xiF_x, xiF_y;       // (-Fy, Fx) / density
  Expr xiG_x, xiG_y;       // (Gy, -Gx) / density

  /// Symbolic Lie derivative along the normalized G-field (used for the
  /// higher-order gap integrands).
  Expr lieXiG(const Expr& e) const;
  Expr lieXiF(const Expr& e) const;
};

/// Light sample validation (kernel property of F, transversality of G along
/// the field) and the symbolic derivation. Throws ValidationError when F is
/// not constant along the field or G is not increasing along it.
DerivedPair derivePair(const PlanarField& field, const HamiltonianPair& ham,
                       const Box& box, Rng& rng, int samples = 200,
                       const std::function<bool(Point2)>& collar = nullptr);

/// Collar predicate around the degenerate separatrices of a pair.
std::function<bool(Point2)> degeneracyCollar(const std::vector<Separatrix>& seps,
                                             const HamiltonianPair& ham);

struct RelationEntry {
  std::string id;
  double max_residual = 0.0;
  long checked = 0;
  bool implied = false;
};

struct RelationReport {
  std::vector<RelationEntry> entries;
  long samples = 0;
  long skipped_collar = 0;
  double maxResidual() const;
  const RelationEntry* find(const std::string& id) const;
};

/// Samples the normalization, bracket, commutator, orthonormality and
/// complex-structure identities of the derived pair at random points of the
/// box, skipping a collar around degenerate loci. The tensor-derivative
/// identities follow from these and are reported as implied.
RelationReport verifyRelations(const DerivedPair& dp, const Box& box, int samples, Rng& rng,
                               const std::function<bool(Point2)>& collar = nullptr);

/// (x, y) -> (F, G) and the graph embedding (x, y) -> (x, y, F, G).
struct RectifiedMap {
  Expr F, G;
  Point2 forward(Point2 p) const { return {F(p), G(p)}; }
  std::array<double, 4> embed(Point2 p) const { return {p.x, p.y, F(p), G(p)}; }

  /// Residual of the rectification property at p: the Jacobian of the forward
  /// map sends the normalized F-field to (0,1) and the G-field to (1,0).
  double pushforwardResidual(const DerivedPair& dp, Point2 p) const;
};

/// Smooth monotone step: 0 for t <= 0, 1 for t >= 1, strictly increasing
/// between; all derivatives vanish at both ends.
double smoothStep(double t);

struct PositivityOptions {
  int depth = 8;          // windows kept per separatrix: |i| <= 2*depth at stride 1/2
  double tmax = 0.0;      // 0 = derived from depth
  double fd_step = 1e-5;  // directional difference along the flow
  FlowOptions flow;
  const Expr* G = nullptr;  // used only to orient constant tails of the sum
};

/// Truncation of the transversally-Hamiltonian certificate: a sum of weighted
/// smooth steps of flow time past each transversal. Wherever some retained
/// window covers the point, the Lie derivative of the sum along the field is
/// strictly positive.
class PositivityCertificate {
 public:
  PositivityCertificate(const FoliationChart& chart, PositivityOptions opt);

  struct Sample {
    bool covered = false;
    double value = 0.0;
    double lie = 0.0;
  };
  Sample evaluate(Point2 p) const;

 private:
  const FoliationChart& chart_;
  PositivityOptions opt_;
  double stride_ = 0.5;
  int imin_, imax_;
  std::vector<std::vector<double>> weights_;  // [sep][i - imin]
};

}  // namespace pcoh
