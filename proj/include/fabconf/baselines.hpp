#pragma once

#include <optional>
#include <span>

#include "fabconf/interval.hpp"

namespace fabconf {

/// Second root of |y_i - m| = |x - m| with m the mean of the augmented bag:
/// (2S - (n+1) y_i) / (n - 1). Throws InvalidArgument for n < 2.
double dta_g(double y_i, double sample_sum, std::size_t n);

/// Exact distance-to-average conformal interval (order statistics of
/// {y_i} and {dta_g(y_i)} at k and 2n-k+1). Requires n >= 2.
PredictionInterval dta_interval(std::span<const double> sample, double alpha);

/// Same, with the conformal rank given directly (0 <= k <= n).
PredictionInterval dta_interval_rank(std::span<const double> sample, int k);

/// Known variance uses z quantiles; estimated variance uses the unbiased
/// sample variance and t quantiles with n-1 degrees of freedom.
struct VarianceMode {
  std::optional<double> known_sigma2;

  static VarianceMode known(double sigma2) { return VarianceMode{sigma2}; }
  static VarianceMode estimated() { return VarianceMode{std::nullopt}; }
  bool is_known() const noexcept { return known_sigma2.has_value(); }
};

struct PivotSpec {
  VarianceMode variance;
  double alpha;
};

/// Empirical-Bayes parametric interval. `tau2` is the prior variance of the
/// area mean itself (not a ratio to sigma2).
struct EBSpec {
  double mu;
  double tau2;
  VarianceMode variance;
  double alpha;
};

/// ybar +/- q_{1-alpha/2} sqrt(sigma2 (1 + 1/n)).
PredictionInterval pivot_interval(std::span<const double> sample, const PivotSpec& spec);

/// theta~ +/- q_{1-alpha/2} sqrt((1/tau2 + n/sigma2)^-1 + sigma2),
/// theta~ = (mu/tau2 + ybar n/sigma2)/(1/tau2 + n/sigma2).
PredictionInterval eb_interval(std::span<const double> sample, const EBSpec& spec);

}  // namespace fabconf
