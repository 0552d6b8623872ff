#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pcoh {

enum class SeqClass { Finite, Divergent, Inconclusive };

struct SeqVerdict {
  SeqClass cls = SeqClass::Inconclusive;
  double limit = 0.0;   // Aitken extrapolant when Finite
  double rate = 0.0;    // fitted ratio of successive increments
  std::string note;
};

/// Aitken delta-squared acceleration of a partial sequence.
std::vector<double> aitken(std::span<const double> seq);

struct SeqPolicy {
  double stab_atol = 1e-7;   // accepted change of the extrapolant over the tail
  double stab_rtol = 1e-7;
  double divergence_threshold = 1e6;   // |partial| beyond this, growing: divergent
  double divergence_ratio = 0.90;      // increment ratio at/above this: divergent
  int tail = 3;
};

/// Classifies the limit of a sequence of partial values produced along a
/// geometric approach schedule. Finite when the Aitken extrapolant settles;
/// divergent when the increments stop contracting (ratio near/above one) while
/// the partials grow monotonically, or when they blow past the threshold;
/// inconclusive otherwise, never silently coerced.
SeqVerdict classifySequence(std::span<const double> partials, const SeqPolicy& policy = {});

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
  bool divergent = false;       // non-integrable behaviour inside the range
  double trouble_at = 0.0;      // location of the offending point, when divergent
};

/// Adaptive Simpson quadrature with domain-fault awareness: the integrand may
/// return nullopt (domain violation); a fault that persists under refinement,
/// or an estimate beyond 1e12, marks the integral divergent at that point.
QuadResult adaptiveQuad(const std::function<std::optional<double>(double)>& f, double a,
                        double b, double atol = 1e-10, int max_depth = 48);

}  // namespace pcoh
