#include "fabconf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fabconf/error.hpp"
#include "fabconf/quantiles.hpp"
#include "fabconf/working_model.hpp"

namespace fabconf {

double dta_g(double y_i, double sample_sum, std::size_t n) {
  if (n < 2) throw InvalidArgument("dta_g: n must be >= 2");
  const double nd = static_cast<double>(n);
  return (2.0 * sample_sum - (nd + 1.0) * y_i) / (nd - 1.0);
}

PredictionInterval dta_interval_rank(std::span<const double> sample, int k) {
  const std::size_t n = sample.size();
  if (n < 2) throw InvalidArgument("dta_interval: n must be >= 2");
  if (k < 0 || static_cast<std::size_t>(k) > n) throw InvalidArgument("rank k must lie in [0, n]");
  for (double y : sample)
    if (std::isnan(y)) throw InvalidArgument("sample contains NaN");

  PredictionInterval out;
  out.k = k;
  out.nominal_alpha = static_cast<double>(k) / static_cast<double>(n + 1);
  out.achieved_level = 1.0 - out.nominal_alpha;
  if (k == 0) return out;

  const double sum = compensated_sum(sample);
  std::vector<double> v(sample.begin(), sample.end());
  v.reserve(2 * n);
  for (double y : sample) v.push_back(dta_g(y, sum, n));
  std::sort(v.begin(), v.end());
  out.lower = v[static_cast<std::size_t>(k) - 1];
  out.upper = v[2 * n - static_cast<std::size_t>(k)];
  return out;
}

PredictionInterval dta_interval(std::span<const double> sample, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (sample.size() < 2) throw InvalidArgument("dta_interval: n must be >= 2");
  auto out = dta_interval_rank(sample, conformal_rank(alpha, sample.size()));
  out.nominal_alpha = alpha;
  return out;
}

namespace {

struct Spread {
  double sigma2;
  double quantile;
};

Spread spread_for(std::span<const double> sample, const VarianceMode& mode, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const std::size_t n = sample.size();
  if (mode.is_known()) {
    if (n < 1) throw InvalidArgument("empty sample");
    if (!(*mode.known_sigma2 > 0.0)) throw InvalidArgument("known sigma2 must be > 0");
    return {*mode.known_sigma2, normal_quantile(1.0 - alpha / 2.0)};
  }
  if (n < 2) throw InvalidArgument("estimated variance needs n >= 2");
  const double mean = compensated_sum(sample) / static_cast<double>(n);
  double ss = 0.0;
  for (double y : sample) ss += (y - mean) * (y - mean);
  return {ss / static_cast<double>(n - 1),
          student_t_quantile(1.0 - alpha / 2.0, static_cast<double>(n - 1))};
}

PredictionInterval symmetric(double center, double half, double alpha) {
  PredictionInterval out;
  out.lower = center - half;
  out.upper = center + half;
  out.nominal_alpha = alpha;
  out.achieved_level = 1.0 - alpha;
  out.k = 0;
  return out;
}

}  // namespace

PredictionInterval pivot_interval(std::span<const double> sample, const PivotSpec& spec) {
  const Spread s = spread_for(sample, spec.variance, spec.alpha);
  const double n = static_cast<double>(sample.size());
  const double mean = compensated_sum(sample) / n;
  return symmetric(mean, s.quantile * std::sqrt(s.sigma2 * (1.0 + 1.0 / n)), spec.alpha);
}

PredictionInterval eb_interval(std::span<const double> sample, const EBSpec& spec) {
  if (!(spec.tau2 > 0.0)) throw InvalidArgument("eb_interval: tau2 must be > 0");
  const Spread s = spread_for(sample, spec.variance, spec.alpha);
  const double n = static_cast<double>(sample.size());
  const double mean = compensated_sum(sample) / n;
  const double post_prec = 1.0 / spec.tau2 + n / s.sigma2;
  const double center = (spec.mu / spec.tau2 + mean * n / s.sigma2) / post_prec;
  return symmetric(center, s.quantile * std::sqrt(1.0 / post_prec + s.sigma2), spec.alpha);
}

}  // namespace fabconf
