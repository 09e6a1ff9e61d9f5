#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace fabconf::simd {

enum class Level { Scalar, Avx2 };

std::string_view to_string(Level level) noexcept;

/// Best level supported by the running CPU (and compiled in).
Level detected_level() noexcept;

/// Level used by the dispatching entry points below. Defaults to
/// detected_level(); tests may force Scalar. Requesting a level the CPU
/// cannot run falls back to Scalar.
Level active_level() noexcept;
void set_active_level(Level level) noexcept;

/// Candidate-dependent center m(y) = (offset + y) * weight.
///
/// For the augmented FAB measure offset = prec*mu + sum(y_i) and
/// weight = 1/(prec + n + 1); the DTA measure is the prec = 0 case. Under
/// either measure the augmented-bag scores satisfy c_i <= c_{n+1} exactly
/// when |y_i - m(y)| >= |y - m(y)|.
struct CenterForm {
  double offset;
  double weight;
};

/// counts[g] = 1 + #{i : |sample[i] - m(grid[g])| >= |grid[g] - m(grid[g])|}.
/// counts.size() must equal grid.size().
void count_conforming(std::span<const double> sample, CenterForm center,
                      std::span<const double> grid, std::span<std::int32_t> counts);

/// out[i] = (twice_offset - span_coef * y[i]) / denom. This is the FAB
/// reflection map g written over a common denominator.
struct ReflectForm {
  double twice_offset;
  double span_coef;
  double denom;
};

void reflect(std::span<const double> y, ReflectForm form, std::span<double> out);

/// Per-level entry points, exposed for equivalence tests.
namespace scalar {
void count_conforming(std::span<const double> sample, CenterForm center,
                      std::span<const double> grid, std::span<std::int32_t> counts);
void reflect(std::span<const double> y, ReflectForm form, std::span<double> out);
}  // namespace scalar

namespace avx2 {
/// Only callable when detected_level() == Level::Avx2.
void count_conforming(std::span<const double> sample, CenterForm center,
                      std::span<const double> grid, std::span<std::int32_t> counts);
void reflect(std::span<const double> y, ReflectForm form, std::span<double> out);
}  // namespace avx2

}  // namespace fabconf::simd
