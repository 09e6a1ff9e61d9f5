#pragma once

namespace fabconf {

/// Standard normal CDF.
double normal_cdf(double x) noexcept;

/// Inverse standard normal CDF, |error| < 1e-10 on (0,1).
/// Throws InvalidArgument outside (0,1).
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t CDF with `df` > 0 degrees of freedom.
double student_t_cdf(double t, double df);

/// Inverse Student-t CDF. Throws InvalidArgument for p outside (0,1) or df <= 0.
double student_t_quantile(double p, double df);

}  // namespace fabconf
