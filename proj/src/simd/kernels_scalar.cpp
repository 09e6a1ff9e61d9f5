#include <cmath>

#include "fabconf/simd/kernels.hpp"

namespace fabconf::simd::scalar {

void count_conforming(std::span<const double> sample, CenterForm center,
                      std::span<const double> grid, std::span<std::int32_t> counts) {
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double y = grid[g];
    const double m = (center.offset + y) * center.weight;
    const double dy = std::fabs(y - m);
    std::int32_t c = 1;
    for (double s : sample) c += std::fabs(s - m) >= dy ? 1 : 0;
    counts[g] = c;
  }
}

void reflect(std::span<const double> y, ReflectForm form, std::span<double> out) {
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = (form.twice_offset - form.span_coef * y[i]) / form.denom;
}

}  // namespace fabconf::simd::scalar
