#include <atomic>
#include <cassert>

#include "fabconf/simd/kernels.hpp"

namespace fabconf::simd {

namespace {

Level probe() noexcept {
#if defined(FABCONF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Level::Avx2;
#endif
  return Level::Scalar;
}

std::atomic<Level>& active() noexcept {
  static std::atomic<Level> level{detected_level()};
  return level;
}

}  // namespace

std::string_view to_string(Level level) noexcept {
  switch (level) {
    case Level::Avx2:
      return "avx2";
    case Level::Scalar:
      break;
  }
  return "scalar";
}

Level detected_level() noexcept {
  static const Level level = probe();
  return level;
}

Level active_level() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_level(Level level) noexcept {
  if (level == Level::Avx2 && detected_level() != Level::Avx2) level = Level::Scalar;
  active().store(level, std::memory_order_relaxed);
}

void count_conforming(std::span<const double> sample, CenterForm center,
                      std::span<const double> grid, std::span<std::int32_t> counts) {
  assert(counts.size() == grid.size());
#if defined(FABCONF_HAVE_AVX2)
  if (active_level() == Level::Avx2) return avx2::count_conforming(sample, center, grid, counts);
#endif
  scalar::count_conforming(sample, center, grid, counts);
}

void reflect(std::span<const double> y, ReflectForm form, std::span<double> out) {
  assert(out.size() == y.size());
#if defined(FABCONF_HAVE_AVX2)
  if (active_level() == Level::Avx2) return avx2::reflect(y, form, out);
#endif
  scalar::reflect(y, form, out);
}

}  // namespace fabconf::simd
