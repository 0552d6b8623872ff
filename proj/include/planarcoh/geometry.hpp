#pragma once

#include <cmath>
#include <random>

namespace pcoh {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Axis-aligned working box. All "global" statements are asserted on a box;
/// flow integrations may use an inflated copy so that trajectories can make
/// excursions outside the plotting window without being cut off.
struct Box {
  double x1 = -6.0, x2 = 6.0;
  double y1 = -6.0, y2 = 6.0;

  bool contains(Point2 p, double pad = 0.0) const {
    return p.x >= x1 - pad && p.x <= x2 + pad && p.y >= y1 - pad && p.y <= y2 + pad;
  }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  Point2 center() const { return {0.5 * (x1 + x2), 0.5 * (y1 + y2)}; }
  Box inflated(double factor) const {
    const double cx = 0.5 * (x1 + x2), cy = 0.5 * (y1 + y2);
    const double hw = 0.5 * width() * factor, hh = 0.5 * height() * factor;
    return {cx - hw, cx + hw, cy - hh, cy + hh};
  }
};

/// Deterministic sampling helper; every randomized check in the library takes
/// one of these so results are reproducible under a --seed flag.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x5eedULL) : eng_(seed) {}

  double uniform(double a, double b) {
    std::uniform_real_distribution<double> d(a, b);
    return d(eng_);
  }
  Point2 inBox(const Box& b) { return {uniform(b.x1, b.x2), uniform(b.y1, b.y2)}; }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace pcoh
