#pragma once

#include <cmath>
#include <limits>

namespace fabconf {

/// A prediction interval [lower, upper]. Bounds may be infinite when the
/// conformal rank k is zero. `achieved_level` is 1 - k/(n+1) for conformal
/// methods and the nominal level for parametric ones.
struct PredictionInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double nominal_alpha = 0.0;
  double achieved_level = 1.0;
  int k = 0;  // conformal rank; 0 for parametric intervals

  bool degenerate() const noexcept { return lower == upper; }
  bool bounded() const noexcept { return std::isfinite(lower) && std::isfinite(upper); }
  double width() const noexcept { return upper - lower; }
  bool contains(double y) const noexcept { return lower <= y && y <= upper; }
};

/// Conformal rank k = floor(alpha (n+1)). A 1e-9 slack absorbs the rounding
/// of alpha = l/(n+1) so that such rates map to exactly l.
inline int conformal_rank(double alpha, std::size_t n) {
  return static_cast<int>(std::floor(alpha * static_cast<double>(n + 1) + 1e-9));
}

}  // namespace fabconf
