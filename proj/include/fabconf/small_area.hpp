#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fabconf/interval.hpp"

namespace fabconf {

struct Centroid {
  double x;
  double y;
};

struct Area {
  std::string id;
  std::vector<double> samples;
  /// Covariate row; the first entry is the intercept 1.
  std::vector<double> covariates;
  Centroid centroid;
};

/// Per-area samples, covariates and centroids with derived summaries.
class AreaTable {
 public:
  /// Requires J >= 2 areas with equal-length covariate rows whose first
  /// entry is 1. Throws InvalidArgument otherwise.
  explicit AreaTable(std::vector<Area> areas);

  std::size_t size() const noexcept { return areas_.size(); }
  std::size_t covariate_count() const noexcept { return areas_.front().covariates.size(); }
  const Area& area(std::size_t j) const { return areas_.at(j); }
  const std::vector<Area>& areas() const noexcept { return areas_; }

  std::size_t n(std::size_t j) const { return areas_.at(j).samples.size(); }
  /// Sample mean; NaN for an area without samples.
  double mean(std::size_t j) const;
  /// Sum of squared deviations about the mean (not divided by n-1).
  double sum_squares(std::size_t j) const;

  Eigen::MatrixXd design() const;
  std::vector<Centroid> centroids() const;

  /// Copy with non-intercept covariate columns centered and scaled to unit
  /// sample standard deviation. Constant columns are left untouched.
  AreaTable standardized() const;

 private:
  std::vector<Area> areas_;
};

/// Spatial Fay-Herriot mean model: theta ~ N(X beta, eta2 G(rho)) with
/// G(rho) = [(I - rho W)(I - rho W')]^-1.
struct SpatialSpec {
  Eigen::MatrixXd W;
  double rho;
  double eta2;
  Eigen::VectorXd beta;

  /// W rows sum to 1 within 1e-12 with zero diagonal, |rho| < 1, eta2 > 0,
  /// beta length matches `p` when given.
  void validate(std::optional<Eigen::Index> p = std::nullopt) const;
};

/// Row-standardized squared-exponential weights exp(-|c_l - c_k|^2) with a
/// zero diagonal. Throws InvalidArgument("isolated area") when a row
/// underflows to zero before normalization.
Eigen::MatrixXd sq_exp_weights(std::span<const Centroid> centroids);

/// G = [(I - rho W)(I - rho W')]^-1. Throws NumericalError when I - rho W is
/// singular, InvalidArgument when |rho| >= 1.
Eigen::MatrixXd sar_covariance(double rho, const Eigen::MatrixXd& W);

// -- Variance hyperparameters ---------------------------------------------

/// Within-area sum of squares s2 = sum (y - ybar)^2 and sample size n.
struct AreaSpread {
  double s2;
  std::size_t n;
};

struct VarianceHyper {
  double a;
  double b;
  double log_likelihood;
};

/// Sum over areas of the log marginal kernel of s2 given (a, b):
///   lgamma((a+n-1)/2) + (a/2) log(b/2) - lgamma(a/2) - ((a+n-1)/2) log((b+s2)/2)
double spread_log_likelihood(double a, double b, std::span<const AreaSpread> spreads);

/// Maximum marginal likelihood (a, b) by simplex search in log space,
/// initialized by moments of s2/(n-1). Requires >= 2 areas with n >= 2;
/// areas with n < 2 are ignored. Throws ConvergenceError on non-convergence.
VarianceHyper estimate_ab(std::span<const AreaSpread> spreads);

/// Empirical-Bayes variance point estimates under 1/sigma2 ~ Gamma(a/2, b/2).
///
/// Observed areas use the posterior mode (b + s2)/(a + n + 1); a held-out
/// area uses the prior mode b/(a + 2). The source expressions for these were
/// written as (b + s2)(a + (n - 1) + 1) and b/(a + 1), which do not match
/// the stated inverse-gamma convention; the modes above do.
double eb_variance_observed(const VarianceHyper& hyper, const AreaSpread& spread);
double eb_variance_held_out(const VarianceHyper& hyper);

struct EBVariances {
  std::vector<double> observed;
  double held_out;
};
EBVariances eb_variances(const VarianceHyper& hyper, std::span<const AreaSpread> spreads);

// -- Mean model -------------------------------------------------------------

struct MeanModelFit {
  Eigen::VectorXd beta;
  double eta2;
  double rho;
  /// Empirical-Bayes (BLUP) estimates of theta for the fitted areas.
  Eigen::VectorXd theta;
  double log_likelihood;
};

/// Gaussian log likelihood of the direct estimates
///   ybar ~ N(X beta, eta2 G(rho)[K,K] + diag(sampling_var))
/// where G is built from the full W and K = `included` (rows of ybar, X and
/// sampling_var follow the order of `included`).
double mean_model_log_likelihood(const Eigen::VectorXd& ybar, const Eigen::VectorXd& sampling_var,
                                 const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                                 std::span<const Eigen::Index> included,
                                 const Eigen::VectorXd& beta, double eta2, double rho);

/// Maximum likelihood (beta, eta2, rho) with beta profiled by GLS, log eta2
/// profiled by a 1-D search and rho searched over [-0.99, 0.99]; then theta
/// by BLUP shrinkage. Requires K >= p + 2. Throws RankDeficientError when X
/// lacks full column rank and NumericalError when no rho candidate yields a
/// positive-definite covariance.
MeanModelFit fit_mean_model(const Eigen::VectorXd& ybar, const Eigen::VectorXd& sampling_var,
                            const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                            std::span<const Eigen::Index> included);

// -- Per-area conformal parameters -------------------------------------------

struct AreaConformalParams {
  double mu;
  double tau2;
  double sigma2_hat;
};

/// Conditional mean and variance ratio of theta_j given theta_{-j} under
/// V = eta2 G(rho):
///   mu_j   = x_j' beta + V[j,-j] V[-j,-j]^-1 (theta_{-j} - X_{-j} beta)
///   tau2_j = (V[j,j] - V[j,-j] V[-j,-j]^-1 V[-j,j]) / sigma2_j
/// `theta_minus_j` lists the other areas in increasing index order. `X` and
/// `W` cover all J areas.
AreaConformalParams conditional_params(std::size_t j, const Eigen::VectorXd& beta, double eta2,
                                       double rho, const Eigen::VectorXd& theta_minus_j,
                                       const Eigen::MatrixXd& W, const Eigen::MatrixXd& X,
                                       double sigma2_j);

// -- Pipeline ---------------------------------------------------------------

/// Per-area error rate: a fixed alpha, or alpha_j = floor((n_j+1)/3)/(n_j+1)
/// which makes alpha_j (n_j+1) an integer.
struct AlphaMode {
  enum class Kind { Fixed, ExactCoverage };
  Kind kind = Kind::ExactCoverage;
  double alpha = 0.0;

  static AlphaMode fixed(double alpha) { return {Kind::Fixed, alpha}; }
  static AlphaMode exact_coverage() { return {Kind::ExactCoverage, 0.0}; }

  /// Conformal rank k for a sample of size n.
  int rank(std::size_t n) const;
  double alpha_for(std::size_t n) const;
};

/// Conformal parameters for area j fitted on every other area only.
struct LooFit {
  VarianceHyper hyper;
  MeanModelFit mean_model;
  AreaConformalParams params;
};
LooFit loo_conformal_params(const AreaTable& table, std::size_t j, const Eigen::MatrixXd& W);

struct AreaResult {
  std::size_t index;
  std::string id;
  std::size_t n;
  double alpha;
  PredictionInterval fab;
  PredictionInterval dta;
  std::optional<AreaConformalParams> params;
  /// True when the fit failed and `fab` repeats the DTA interval.
  bool fallback = false;
  std::string message;
};

struct PipelineOptions {
  unsigned threads = 0;  // 0: default_thread_count()
};

/// Leave-one-area-out FAB and DTA intervals for every area with n_j >= 2.
/// Areas with fewer samples are omitted from the result. Requires J >= 3;
/// throws RankDeficientError if the full design lacks full column rank.
std::vector<AreaResult> area_pipeline(const AreaTable& table, const AlphaMode& alpha_mode,
                                      const PipelineOptions& options = {});

}  // namespace fabconf
