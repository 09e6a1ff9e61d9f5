#pragma once

#include <span>

namespace fabconf {

/// Hyperparameters of the normal working model
///
///   Y_1..Y_n | theta, s2 ~ N(theta, s2)
///   theta | s2          ~ N(mu, tau2 * s2)
///   1 / s2              ~ Gamma(a/2, rate b/2)
///
/// The prior on theta is stored as a precision (1/tau2) so the diffuse
/// limit tau2 -> infinity is the explicit value precision == 0.
class WorkingModelParams {
 public:
  /// Throws InvalidArgument unless tau2 > 0, a > 0, b > 0 and mu finite.
  WorkingModelParams(double mu, double tau2, double a = 1.0, double b = 1.0);

  /// Build from a prior precision 1/tau2 >= 0. precision == 0 is the
  /// diffuse prior; mu is then irrelevant to every downstream quantity.
  static WorkingModelParams from_precision(double mu, double precision, double a = 1.0,
                                           double b = 1.0);
  static WorkingModelParams diffuse(double a = 1.0, double b = 1.0) {
    return from_precision(0.0, 0.0, a, b);
  }

  double mu() const noexcept { return mu_; }
  double precision() const noexcept { return precision_; }
  /// 1 / precision; +inf for the diffuse prior.
  double tau2() const noexcept;
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  bool is_diffuse() const noexcept { return precision_ == 0.0; }

 private:
  struct FromPrecision {};
  WorkingModelParams(FromPrecision, double mu, double precision, double a, double b);

  double mu_;
  double precision_;
  double a_;
  double b_;
};

/// Parameter block of the posterior predictive t density given a sample.
///   tau2_theta = 1 / (1/tau2 + n)
///   mu_theta   = (mu/tau2 + sum y) tau2_theta
///   a_sigma    = a + n
///   b_sigma    = b + y'y + mu^2/tau2 - mu_theta^2 / tau2_theta
///   scale      = (b_sigma / a_sigma)(1 + tau2_theta)
/// The density is Student-t with a_sigma degrees of freedom, location
/// mu_theta and squared scale `scale`.
struct PosteriorPredictive {
  double a_sigma;
  double mu_theta;
  double tau2_theta;
  double b_sigma;
  double scale;
};

/// Throws InvalidArgument("empty sample") for n == 0.
PosteriorPredictive posterior_params(std::span<const double> sample,
                                     const WorkingModelParams& params);

double predictive_log_density(double y, const PosteriorPredictive& pp) noexcept;
double predictive_density(double y, const PosteriorPredictive& pp) noexcept;

/// Shrinkage estimator (mu/tau2 + sum y)/(1/tau2 + n). Reduces to the
/// sample mean for the diffuse prior.
double posterior_mean_theta(std::span<const double> sample, const WorkingModelParams& params);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values) noexcept;

}  // namespace fabconf
