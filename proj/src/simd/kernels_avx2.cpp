#include <immintrin.h>

#include "fabconf/simd/kernels.hpp"

namespace fabconf::simd::avx2 {

namespace {

inline __m256d abs_pd(__m256d v) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  return _mm256_andnot_pd(sign, v);
}

}  // namespace

void count_conforming(std::span<const double> sample, CenterForm center,
                      std::span<const double> grid, std::span<std::int32_t> counts) {
  const __m256d offset = _mm256_set1_pd(center.offset);
  const __m256d weight = _mm256_set1_pd(center.weight);
  const std::size_t n_grid = grid.size();
  std::size_t g = 0;
  for (; g + 4 <= n_grid; g += 4) {
    const __m256d y = _mm256_loadu_pd(grid.data() + g);
    const __m256d m = _mm256_mul_pd(_mm256_add_pd(offset, y), weight);
    const __m256d dy = abs_pd(_mm256_sub_pd(y, m));
    // Accumulate -1 per satisfied lane (all-ones mask is -1 as int64).
    __m256i acc = _mm256_setzero_si256();
    for (double s : sample) {
      const __m256d ds = abs_pd(_mm256_sub_pd(_mm256_set1_pd(s), m));
      const __m256d ge = _mm256_cmp_pd(ds, dy, _CMP_GE_OQ);
      acc = _mm256_sub_epi64(acc, _mm256_castpd_si256(ge));
    }
    alignas(32) std::int64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
    for (int l = 0; l < 4; ++l) counts[g + l] = 1 + static_cast<std::int32_t>(lanes[l]);
  }
  if (g < n_grid)
    scalar::count_conforming(sample, center, grid.subspan(g), counts.subspan(g));
}

void reflect(std::span<const double> y, ReflectForm form, std::span<double> out) {
  const __m256d twice = _mm256_set1_pd(form.twice_offset);
  const __m256d coef = _mm256_set1_pd(form.span_coef);
  const __m256d denom = _mm256_set1_pd(form.denom);
  const std::size_t n = y.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(y.data() + i);
    const __m256d r = _mm256_div_pd(_mm256_sub_pd(twice, _mm256_mul_pd(coef, v)), denom);
    _mm256_storeu_pd(out.data() + i, r);
  }
  if (i < n) scalar::reflect(y.subspan(i), form, out.subspan(i));
}

}  // namespace fabconf::simd::avx2
