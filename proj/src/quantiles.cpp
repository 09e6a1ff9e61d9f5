#include "fabconf/quantiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fabconf/error.hpp"

namespace fabconf {

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation, relative error about 1.15e-9.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Continued fraction for I_x(a,b) (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  return h;
}

// Stirling remainder lgamma(x) - [(x - 1/2) log x - x + log(2 pi)/2], for x >= 10.
double stirling_tail(double x) {
  const double r = 1.0 / (x * x);
  return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / x;
}

// lgamma(a + b) - lgamma(a) - lgamma(b) without cancelling two huge lgamma values.
double log_gamma_ratio(double a, double b) {
  const double big = std::max(a, b), small = std::min(a, b);
  if (big < 1000.0) return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double s = big + small;
  return (big - 0.5) * std::log1p(small / big) + small * std::log(s) - small +
         stirling_tail(s) - stirling_tail(big) - std::lgamma(small);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  double x = acklam(p);
  // Newton refinement on whichever tail probability is smaller.
  for (int it = 0; it < 2; ++it) {
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    if (p < 0.5)
      x -= (normal_cdf(x) - p) / pdf;
    else
      x += (0.5 * std::erfc(x / std::numbers::sqrt2) - (1.0 - p)) / pdf;
  }
  return x;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = log_gamma_ratio(a, b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw InvalidArgument("student_t_cdf: df must be > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

namespace {

double student_t_pdf(double t, double df) {
  return std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                  0.5 * std::log(df * std::numbers::pi) -
                  0.5 * (df + 1.0) * std::log1p(t * t / df));
}

// Tail probability P(T > t) for t >= 0, accurate in the far tail.
double upper_tail(double t, double df) {
  return 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

}  // namespace

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile: p must lie in (0, 1)");
  if (!(df > 0.0)) throw InvalidArgument("student_t_quantile: df must be > 0");
  if (p == 0.5) return 0.0;
  const double sign = p < 0.5 ? -1.0 : 1.0;
  const double q = p < 0.5 ? p : 1.0 - p;  // upper-tail target, q < 0.5

  // Bracket t in [0, hi] with upper_tail(hi) <= q.
  double lo = 0.0;
  double hi = 1.0;
  while (upper_tail(hi, df) > q) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return sign * std::numeric_limits<double>::infinity();
  }
  // Normal approximation as a starting point, clamped into the bracket.
  double t = -normal_quantile(q);
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);

  for (int it = 0; it < 200; ++it) {
    const double f = upper_tail(t, df) - q;  // decreasing in t
    if (f > 0.0)
      lo = t;
    else
      hi = t;
    const double step = f / student_t_pdf(t, df);
    double next = t + step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - t) <= 1e-15 * std::max(1.0, std::fabs(t))) {
      t = next;
      break;
    }
    t = next;
  }
  return sign * t;
}

}  // namespace fabconf
