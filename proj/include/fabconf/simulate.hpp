#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fabconf/rng.hpp"

namespace fabconf {

enum class Method { Fab, Dta, PivotZ, PivotT, Eb };
enum class Population { Normal, PointMassMixture };

std::string_view to_string(Method m) noexcept;
std::string_view to_string(Population p) noexcept;
/// Accepts FAB, DTA, PIVOT_Z, PIVOT_T, EB (case-insensitive, '-' or '_').
Method parse_method(std::string_view text);
/// Accepts normal, mixture.
Population parse_population(std::string_view text);

/// iid draws from N(theta, 1) or from the two-point mixture with mass 1/2
/// at theta - 1 and theta + 1 (mean theta, variance 1).
std::vector<double> sample_population(Population pop, double theta, std::size_t n, CounterRng& rng);
double draw_population(Population pop, double theta, CounterRng& rng);

struct SimConfig {
  std::vector<Method> methods{Method::Fab, Method::Dta};
  std::vector<std::size_t> n_list{3};
  double alpha = 0.25;
  /// Population means theta (absolute values, not offsets from mu).
  std::vector<double> theta_grid{0.0};
  double mu = 0.0;
  std::vector<double> tau2_list{0.5};
  std::size_t replications = 25000;
  std::uint64_t seed = 1;
  Population population = Population::Normal;
  /// Known sampling variance used by PIVOT_Z and EB.
  double sigma2 = 1.0;
  unsigned threads = 0;

  /// Throws InvalidArgument on R < 1, alpha outside (0,1), tau2 <= 0, an
  /// empty list, or n below a method's minimum.
  void validate() const;
};

struct SimRow {
  std::string method;
  std::size_t n = 0;
  double theta_minus_mu = 0.0;  // NaN for Bayes-risk rows (theta is drawn)
  double tau2 = 0.0;
  double mean_width = 0.0;  // over bounded intervals only
  double width_se = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  std::size_t inf_width_count = 0;
  std::uint64_t seed = 0;
  double mean_lower = 0.0;
  double lower_se = 0.0;
  double mean_upper = 0.0;
  double upper_se = 0.0;
};

struct SimReport {
  std::vector<SimRow> rows;

  /// First row matching (method, n, tau2, theta_minus_mu); NaN offsets match NaN.
  const SimRow& find(std::string_view method, std::size_t n, double tau2,
                     double theta_minus_mu) const;
};

/// Monte Carlo expected width and coverage per (method, n, tau2, theta)
/// cell. Coverage draws Y_{n+1} from the same population.
SimReport expected_width(const SimConfig& config);
SimReport coverage_experiment(const SimConfig& config);

/// theta ~ N(mu, tau2), Y | theta ~ N(theta, 1). Rows for FAB, DTA and the
/// ratio "FAB/DTA" of mean widths (width_se by the delta method on the
/// paired replications). theta_minus_mu is NaN.
SimReport bayes_risk_ratio(const std::vector<std::size_t>& n_list,
                           const std::vector<double>& tau2_grid, double alpha,
                           std::size_t replications, std::uint64_t seed, double mu = 0.0,
                           unsigned threads = 0);

/// Mean FAB and DTA endpoints per theta under N(theta, 1).
SimReport bounds_profile(const std::vector<double>& theta_grid, std::size_t n, double mu,
                         double tau2, double alpha, std::size_t replications, std::uint64_t seed,
                         unsigned threads = 0);

/// method,n,theta_minus_mu,tau2,mean_width,width_se,coverage,coverage_se,inf_width_count,seed
void write_report_csv(std::ostream& out, const SimReport& report);
/// method,n,theta,mu,tau2,mean_lower,lower_se,mean_upper,upper_se,seed
void write_bounds_csv(std::ostream& out, const SimReport& report, double mu);

}  // namespace fabconf
