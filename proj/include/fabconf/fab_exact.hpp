#pragma once

#include <span>
#include <vector>

#include "fabconf/interval.hpp"
#include "fabconf/working_model.hpp"

namespace fabconf {

/// Reflection of y_i whose fixed point is the shrinkage estimator theta~:
///
///   g(y_i) = [2 (mu/tau2 + S)(1/tau2 + n + 1)^-1 - y_i] / [1 - 2 (1/tau2 + n + 1)^-1]
///
/// evaluated over the common denominator (1/tau2 + n + 1) as
/// (2 (prec mu + S) - (prec + n + 1) y_i) / (prec + n - 1). With prec = 0 this
/// is the distance-to-average reflection (2S - (n+1) y_i)/(n-1), operation
/// for operation. Requires prec + n - 1 > 0.
double g_map(double y_i, double sample_sum, std::size_t n, double mu, double precision);

/// g applied to every element of `sample`.
std::vector<double> reflect_sample(std::span<const double> sample, const WorkingModelParams& params);

/// Sub-region of acceptance S_i = [min(y_i, g(y_i)), max(y_i, g(y_i))].
struct SubRegion {
  std::size_t index;
  double lo;
  double hi;
};

std::vector<SubRegion> sub_regions(std::span<const double> sample, const WorkingModelParams& params);

/// Exact FAB conformal interval: the k-th and (2n-k+1)-th order statistics
/// of v = (y_1..y_n, g(y_1)..g(y_n)), k = floor(alpha (n+1)); the whole line
/// when k = 0. Independent of the working model's (a, b).
///
/// Throws InvalidArgument for an empty sample, NaN data, alpha outside (0,1),
/// or a diffuse prior with n < 2.
PredictionInterval fab_interval(std::span<const double> sample, const WorkingModelParams& params,
                                double alpha);

/// Same, with the conformal rank given directly (0 <= k <= n).
PredictionInterval fab_interval_rank(std::span<const double> sample,
                                     const WorkingModelParams& params, int k);

}  // namespace fabconf
