#include "fabconf/working_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "fabconf/error.hpp"

namespace fabconf {

namespace {

void check_hyper(double mu, double a, double b) {
  if (!std::isfinite(mu)) throw InvalidArgument("working model: mu must be finite");
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("working model: a must be > 0");
  if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("working model: b must be > 0");
}

}  // namespace

WorkingModelParams::WorkingModelParams(double mu, double tau2, double a, double b)
    : mu_(mu), precision_(0.0), a_(a), b_(b) {
  check_hyper(mu, a, b);
  if (!(tau2 > 0.0) || !std::isfinite(tau2))
    throw InvalidArgument("working model: tau2 must be finite and > 0");
  precision_ = 1.0 / tau2;
}

WorkingModelParams::WorkingModelParams(FromPrecision, double mu, double precision, double a,
                                       double b)
    : mu_(mu), precision_(precision), a_(a), b_(b) {
  check_hyper(mu, a, b);
  if (!(precision >= 0.0) || !std::isfinite(precision))
    throw InvalidArgument("working model: precision must be finite and >= 0");
}

WorkingModelParams WorkingModelParams::from_precision(double mu, double precision, double a,
                                                      double b) {
  return WorkingModelParams(FromPrecision{}, mu, precision, a, b);
}

double WorkingModelParams::tau2() const noexcept {
  return precision_ == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / precision_;
}

double compensated_sum(std::span<const double> values) noexcept {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

PosteriorPredictive posterior_params(std::span<const double> sample,
                                     const WorkingModelParams& params) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  for (double y : sample)
    if (!std::isfinite(y)) throw InvalidArgument("sample contains a non-finite value");
  const double n = static_cast<double>(sample.size());
  const double prec = params.precision();

  const double total = compensated_sum(sample);
  const double mean = total / n;

  // Residual sum of squares about the sample mean, compensated.
  double ss = 0.0;
  double comp = 0.0;
  for (double y : sample) {
    const double d = y - mean;
    const double term = d * d;
    const double t = ss + term;
    comp += (ss >= term) ? (ss - t) + term : (term - t) + ss;
    ss = t;
  }
  ss += comp;

  PosteriorPredictive pp{};
  pp.tau2_theta = 1.0 / (prec + n);
  pp.mu_theta = (prec * params.mu() + total) * pp.tau2_theta;
  pp.a_sigma = params.a() + n;
  // b + y'y + mu^2 prec - mu_theta^2 (prec + n), rearranged without cancellation.
  const double dev = mean - params.mu();
  const double shrink = prec == 0.0 ? 0.0 : (n * prec / (n + prec)) * dev * dev;
  pp.b_sigma = params.b() + ss + shrink;
  pp.scale = (pp.b_sigma / pp.a_sigma) * (1.0 + pp.tau2_theta);
  return pp;
}

double predictive_log_density(double y, const PosteriorPredictive& pp) noexcept {
  const double df = pp.a_sigma;
  const double z2 = (y - pp.mu_theta) * (y - pp.mu_theta) / pp.scale;
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * std::numbers::pi * pp.scale) -
         0.5 * (df + 1.0) * std::log1p(z2 / df);
}

double predictive_density(double y, const PosteriorPredictive& pp) noexcept {
  return std::exp(predictive_log_density(y, pp));
}

double posterior_mean_theta(std::span<const double> sample, const WorkingModelParams& params) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  const double n = static_cast<double>(sample.size());
  const double prec = params.precision();
  return (prec * params.mu() + compensated_sum(sample)) / (prec + n);
}

}  // namespace fabconf
