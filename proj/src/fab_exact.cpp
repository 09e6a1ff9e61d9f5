#include "fabconf/fab_exact.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "fabconf/error.hpp"
#include "fabconf/simd/kernels.hpp"

namespace fabconf {

namespace {

simd::ReflectForm reflect_form(double sample_sum, std::size_t n, double mu, double precision) {
  const double nd = static_cast<double>(n);
  const double denom = precision + nd - 1.0;
  if (!(denom > 0.0))
    throw InvalidArgument("reflection map needs n >= 2 under a diffuse prior");
  return simd::ReflectForm{2.0 * (precision * mu + sample_sum), precision + nd + 1.0, denom};
}

void check_sample(std::span<const double> sample) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  for (double y : sample)
    if (std::isnan(y)) throw InvalidArgument("sample contains NaN");
}

}  // namespace

double g_map(double y_i, double sample_sum, std::size_t n, double mu, double precision) {
  if (n < 1) throw InvalidArgument("g_map: n must be >= 1");
  const auto form = reflect_form(sample_sum, n, mu, precision);
  return (form.twice_offset - form.span_coef * y_i) / form.denom;
}

std::vector<double> reflect_sample(std::span<const double> sample,
                                   const WorkingModelParams& params) {
  check_sample(sample);
  const auto form = reflect_form(compensated_sum(sample), sample.size(), params.mu(),
                                 params.precision());
  std::vector<double> out(sample.size());
  simd::reflect(sample, form, out);
  return out;
}

std::vector<SubRegion> sub_regions(std::span<const double> sample,
                                   const WorkingModelParams& params) {
  const std::vector<double> g = reflect_sample(sample, params);
  std::vector<SubRegion> regions(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i)
    regions[i] = SubRegion{i, std::min(sample[i], g[i]), std::max(sample[i], g[i])};
  return regions;
}

PredictionInterval fab_interval_rank(std::span<const double> sample,
                                     const WorkingModelParams& params, int k) {
  check_sample(sample);
  const std::size_t n = sample.size();
  if (k < 0 || static_cast<std::size_t>(k) > n) throw InvalidArgument("rank k must lie in [0, n]");

  PredictionInterval out;
  out.k = k;
  out.achieved_level = 1.0 - static_cast<double>(k) / static_cast<double>(n + 1);
  out.nominal_alpha = static_cast<double>(k) / static_cast<double>(n + 1);
  if (k == 0) return out;

  std::vector<double> v(2 * n);
  std::copy(sample.begin(), sample.end(), v.begin());
  const auto form = reflect_form(compensated_sum(sample), n, params.mu(), params.precision());
  simd::reflect(sample, form, std::span<double>(v).subspan(n));

  // Order statistics v_(k) and v_(2n-k+1), 1-based.
  const auto lo_it = v.begin() + (k - 1);
  std::nth_element(v.begin(), lo_it, v.end());
  out.lower = *lo_it;
  const auto hi_it = v.begin() + static_cast<std::ptrdiff_t>(2 * n - static_cast<std::size_t>(k));
  std::nth_element(lo_it + 1, hi_it, v.end());
  out.upper = *hi_it;
  assert(out.lower <= out.upper);
  return out;
}

PredictionInterval fab_interval(std::span<const double> sample, const WorkingModelParams& params,
                                double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  check_sample(sample);
  auto out = fab_interval_rank(sample, params, conformal_rank(alpha, sample.size()));
  out.nominal_alpha = alpha;
  return out;
}

}  // namespace fabconf
