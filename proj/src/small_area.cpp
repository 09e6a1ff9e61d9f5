#include "fabconf/small_area.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

#include "fabconf/baselines.hpp"
#include "fabconf/error.hpp"
#include "fabconf/fab_exact.hpp"
#include "fabconf/optimize.hpp"
#include "fabconf/parallel.hpp"
#include "fabconf/working_model.hpp"

namespace fabconf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRhoBound = 0.99;

Eigen::MatrixXd select(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows,
                       std::span<const Eigen::Index> cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = m(rows[r], cols[c]);
  return out;
}

Eigen::Index column_rank(const Eigen::MatrixXd& X) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  return qr.rank();
}

/// Cholesky with at most one diagonal jitter retry.
Eigen::LLT<Eigen::MatrixXd> factor_pd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = 1e-10 * std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd bumped = m;
  bumped.diagonal().array() += jitter;
  llt.compute(bumped);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": matrix is not positive definite");
  std::clog << "fabconf: " << what << ": added diagonal jitter " << jitter << '\n';
  return llt;
}

}  // namespace

// -- AreaTable ----------------------------------------------------------------

AreaTable::AreaTable(std::vector<Area> areas) : areas_(std::move(areas)) {
  if (areas_.size() < 2) throw InvalidArgument("area table: need at least 2 areas");
  const std::size_t p = areas_.front().covariates.size();
  if (p == 0) throw InvalidArgument("area table: covariate row must include the intercept");
  for (const auto& a : areas_) {
    if (a.covariates.size() != p)
      throw InvalidArgument("area table: covariate rows differ in length (area " + a.id + ")");
    if (a.covariates.front() != 1.0)
      throw InvalidArgument("area table: first covariate must be the intercept 1 (area " + a.id + ")");
    if (a.samples.empty()) throw InvalidArgument("area table: area " + a.id + " has no samples");
    for (double y : a.samples)
      if (!std::isfinite(y)) throw InvalidArgument("area table: non-finite sample in area " + a.id);
  }
}

double AreaTable::mean(std::size_t j) const {
  const auto& s = areas_.at(j).samples;
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return compensated_sum(s) / static_cast<double>(s.size());
}

double AreaTable::sum_squares(std::size_t j) const {
  const auto& s = areas_.at(j).samples;
  const double m = mean(j);
  std::vector<double> sq(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) sq[i] = (s[i] - m) * (s[i] - m);
  return compensated_sum(sq);
}

Eigen::MatrixXd AreaTable::design() const {
  const auto J = static_cast<Eigen::Index>(size());
  const auto p = static_cast<Eigen::Index>(covariate_count());
  Eigen::MatrixXd X(J, p);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index c = 0; c < p; ++c) X(j, c) = areas_[j].covariates[c];
  return X;
}

std::vector<Centroid> AreaTable::centroids() const {
  std::vector<Centroid> out;
  out.reserve(size());
  for (const auto& a : areas_) out.push_back(a.centroid);
  return out;
}

AreaTable AreaTable::standardized() const {
  std::vector<Area> copy = areas_;
  const std::size_t p = covariate_count();
  const double J = static_cast<double>(size());
  for (std::size_t c = 1; c < p; ++c) {
    double mean = 0.0;
    for (const auto& a : copy) mean += a.covariates[c];
    mean /= J;
    double ss = 0.0;
    for (const auto& a : copy) ss += (a.covariates[c] - mean) * (a.covariates[c] - mean);
    const double sd = std::sqrt(ss / (J - 1.0));
    if (!(sd > 0.0)) continue;
    for (auto& a : copy) a.covariates[c] = (a.covariates[c] - mean) / sd;
  }
  return AreaTable(std::move(copy));
}

// -- Spatial structure -------------------------------------------------------

void SpatialSpec::validate(std::optional<Eigen::Index> p) const {
  if (W.rows() != W.cols() || W.rows() < 2) throw InvalidArgument("spatial: W must be square, J >= 2");
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    if (W(r, r) != 0.0) throw InvalidArgument("spatial: W diagonal must be zero");
    if (std::fabs(W.row(r).sum() - 1.0) > 1e-12) throw InvalidArgument("spatial: W rows must sum to 1");
  }
  if (!(std::fabs(rho) < 1.0)) throw InvalidArgument("spatial: |rho| must be < 1");
  if (!(eta2 > 0.0)) throw InvalidArgument("spatial: eta2 must be > 0");
  if (p && beta.size() != *p) throw InvalidArgument("spatial: beta length does not match covariates");
}

Eigen::MatrixXd sq_exp_weights(std::span<const Centroid> centroids) {
  const auto J = static_cast<Eigen::Index>(centroids.size());
  if (J < 2) throw InvalidArgument("sq_exp_weights: need at least 2 areas");
  bool distinct = false;
  for (Eigen::Index l = 1; l < J && !distinct; ++l)
    distinct = centroids[l].x != centroids[0].x || centroids[l].y != centroids[0].y;
  if (!distinct) throw InvalidArgument("sq_exp_weights: need at least two distinct centroids");

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(J, J);
  for (Eigen::Index l = 0; l < J; ++l) {
    for (Eigen::Index k = 0; k < J; ++k) {
      if (k == l) continue;
      const double dx = centroids[l].x - centroids[k].x;
      const double dy = centroids[l].y - centroids[k].y;
      W(l, k) = std::exp(-(dx * dx + dy * dy));
    }
    const double total = W.row(l).sum();
    if (!(total > 0.0)) throw InvalidArgument("isolated area");
    W.row(l) /= total;
  }
  return W;
}

Eigen::MatrixXd sar_covariance(double rho, const Eigen::MatrixXd& W) {
  if (!(std::fabs(rho) < 1.0)) throw InvalidArgument("sar_covariance: |rho| must be < 1");
  const Eigen::Index J = W.rows();
  if (rho == 0.0) return Eigen::MatrixXd::Identity(J, J);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(J, J) - rho * W;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) throw NumericalError("sar_covariance: I - rho W is singular");
  const Eigen::MatrixXd C = lu.inverse();
  // G = (A A')^-1 = A^-T A^-1 = C' C
  Eigen::MatrixXd G = C.transpose() * C;
  return 0.5 * (G + G.transpose());
}

// -- Variance hyperparameters ------------------------------------------------

double spread_log_likelihood(double a, double b, std::span<const AreaSpread> spreads) {
  if (!(a > 0.0 && b > 0.0)) return kNegInf;
  double ll = 0.0;
  const double lg_half_a = std::lgamma(0.5 * a);
  const double log_half_b = std::log(0.5 * b);
  for (const auto& s : spreads) {
    if (s.n < 2) continue;
    const double shape = 0.5 * (a + static_cast<double>(s.n) - 1.0);
    ll += std::lgamma(shape) + 0.5 * a * log_half_b - lg_half_a -
          shape * std::log(0.5 * (b + s.s2));
  }
  return ll;
}

VarianceHyper estimate_ab(std::span<const AreaSpread> spreads) {
  std::vector<double> unit;
  for (const auto& s : spreads)
    if (s.n >= 2) unit.push_back(s.s2 / static_cast<double>(s.n - 1));
  if (unit.size() < 2) throw InvalidArgument("estimate_ab: need at least 2 areas with n >= 2");

  const double m = compensated_sum(unit) / static_cast<double>(unit.size());
  double var = 0.0;
  for (double u : unit) var += (u - m) * (u - m);
  var /= static_cast<double>(unit.size() - 1);
  double a0 = var > 0.0 ? 4.0 + 2.0 * m * m / var : 1000.0;
  a0 = std::clamp(a0, 2.5, 1000.0);
  const double b0 = std::max(m, 1e-8) * (a0 - 2.0);

  // Search over (log a, log(b/a)): the likelihood ridge runs along a with b/a
  // fixed when the spreads look homoscedastic. Beyond kMaxLogA the prior is
  // numerically a point mass and the objective is held flat there.
  const double kMaxLogA = std::log(1e6);
  constexpr double kLogBound = 25.0;
  auto log_a = [&](double x0) { return std::min(x0, kMaxLogA); };
  auto objective = [&](const std::vector<double>& x) {
    if (x[0] < -kLogBound || x[0] > kLogBound || std::fabs(x[1]) > kLogBound)
      return std::numeric_limits<double>::infinity();
    const double la = log_a(x[0]);
    return -spread_log_likelihood(std::exp(la), std::exp(la + x[1]), spreads);
  };
  optimize::NelderMeadOptions opts;
  opts.f_tolerance = 1e-10;
  opts.x_tolerance = 1e-7;
  const auto best = optimize::nelder_mead(
      objective, {std::log(a0), std::log(b0 / a0)}, opts);
  const double la = log_a(best.x[0]);
  return VarianceHyper{std::exp(la), std::exp(la + best.x[1]), -best.value};
}

double eb_variance_observed(const VarianceHyper& hyper, const AreaSpread& spread) {
  return (hyper.b + spread.s2) / (hyper.a + static_cast<double>(spread.n) + 1.0);
}

double eb_variance_held_out(const VarianceHyper& hyper) { return hyper.b / (hyper.a + 2.0); }

EBVariances eb_variances(const VarianceHyper& hyper, std::span<const AreaSpread> spreads) {
  EBVariances out{{}, eb_variance_held_out(hyper)};
  out.observed.reserve(spreads.size());
  for (const auto& s : spreads) out.observed.push_back(eb_variance_observed(hyper, s));
  return out;
}

// -- Mean model ----------------------------------------------------------------

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

/// Likelihood in the eigenbasis of D^-1/2 G_KK D^-1/2 for one rho; each
/// eta2 evaluation is then O(K p^2).
class RhoProfile {
 public:
  RhoProfile(const Eigen::VectorXd& ybar, const Eigen::VectorXd& sampling_var,
             const Eigen::MatrixXd& X, const Eigen::MatrixXd& G_kk) {
    const Eigen::VectorXd inv_sd = sampling_var.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd M = inv_sd.asDiagonal() * G_kk * inv_sd.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    if (eig.info() != Eigen::Success) throw NumericalError("mean model: eigendecomposition failed");
    lambda_ = eig.eigenvalues().cwiseMax(0.0);
    if (!(eig.eigenvalues().minCoeff() > -1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff())))
      throw NumericalError("mean model: spatial covariance is not positive definite");
    yt_ = eig.eigenvectors().transpose() * inv_sd.asDiagonal() * ybar;
    Xt_ = eig.eigenvectors().transpose() * inv_sd.asDiagonal() * X;
    log_det_d_ = sampling_var.array().log().sum();
  }

  double log_likelihood(double eta2, Eigen::VectorXd* beta_out = nullptr) const {
    const Eigen::ArrayXd w = (eta2 * lambda_.array() + 1.0).inverse();
    const Eigen::MatrixXd A = Xt_.transpose() * w.matrix().asDiagonal() * Xt_;
    const Eigen::VectorXd c = Xt_.transpose() * (w * yt_.array()).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const Eigen::VectorXd beta = ldlt.solve(c);
    const Eigen::ArrayXd r = (yt_ - Xt_ * beta).array();
    const double quad = (w * r * r).sum();
    const double log_det = log_det_d_ - w.log().sum();
    if (beta_out) *beta_out = beta;
    return -0.5 * (log_det + quad + static_cast<double>(yt_.size()) * kLog2Pi);
  }

 private:
  Eigen::VectorXd lambda_;
  Eigen::VectorXd yt_;
  Eigen::MatrixXd Xt_;
  double log_det_d_ = 0.0;
};

struct Profiled {
  double log_likelihood;
  double log_eta2;
};

/// Coarse scan over [lo, hi] followed by Brent on the bracket around the
/// best scan point. Maximizes f.
template <typename F>
optimize::ScalarMinimum scan_then_brent(F&& f, double lo, double hi, int scan_points,
                                        double tolerance) {
  double best_x = lo;
  double best_v = std::numeric_limits<double>::infinity();
  int best_i = 0;
  const double step = (hi - lo) / (scan_points - 1);
  for (int i = 0; i < scan_points; ++i) {
    const double x = lo + step * i;
    const double v = -f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
      best_i = i;
    }
  }
  if (!std::isfinite(best_v)) return {best_x, best_v, scan_points};
  const double a = best_i == 0 ? lo : lo + step * (best_i - 1);
  const double b = best_i == scan_points - 1 ? hi : lo + step * (best_i + 1);
  auto refined = optimize::brent_minimize([&](double x) { return -f(x); }, a, b, tolerance);
  if (refined.value > best_v) refined = {best_x, best_v, refined.evaluations};
  refined.evaluations += scan_points;
  return refined;
}

}  // namespace

double mean_model_log_likelihood(const Eigen::VectorXd& ybar, const Eigen::VectorXd& sampling_var,
                                 const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                                 std::span<const Eigen::Index> included,
                                 const Eigen::VectorXd& beta, double eta2, double rho) {
  const Eigen::MatrixXd G = sar_covariance(rho, W);
  Eigen::MatrixXd S = eta2 * select(G, included, included);
  S.diagonal() += sampling_var;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) return kNegInf;
  const Eigen::VectorXd r = ybar - X * beta;
  const Eigen::VectorXd z = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (log_det + z.squaredNorm() + static_cast<double>(r.size()) * kLog2Pi);
}

MeanModelFit fit_mean_model(const Eigen::VectorXd& ybar, const Eigen::VectorXd& sampling_var,
                            const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                            std::span<const Eigen::Index> included) {
  const auto K = static_cast<Eigen::Index>(included.size());
  const Eigen::Index p = X.cols();
  if (ybar.size() != K || sampling_var.size() != K || X.rows() != K)
    throw InvalidArgument("fit_mean_model: inputs must have one row per included area");
  if (K < p + 2) throw InvalidArgument("fit_mean_model: need at least p + 2 areas");
  if ((sampling_var.array() <= 0.0).any())
    throw InvalidArgument("fit_mean_model: sampling variances must be > 0");
  if (column_rank(X) < p) throw RankDeficientError("covariate matrix is rank deficient");

  const double ybar_mean = ybar.mean();
  const double ybar_var = (ybar.array() - ybar_mean).square().sum() / static_cast<double>(K - 1);
  const double scale = std::max({ybar_var, sampling_var.mean(), 1e-12});
  const double log_lo = std::log(1e-8 * scale);
  const double log_hi = std::log(1e3 * scale);

  auto profile_rho = [&](double rho) -> Profiled {
    try {
      const Eigen::MatrixXd G = sar_covariance(rho, W);
      const RhoProfile prof(ybar, sampling_var, X, select(G, included, included));
      const auto best = scan_then_brent(
          [&](double u) { return prof.log_likelihood(std::exp(u)); }, log_lo, log_hi, 12, 1e-7);
      return {-best.value, best.x};
    } catch (const NumericalError&) {
      return {kNegInf, 0.0};
    }
  };

  const auto rho_best = scan_then_brent(
      [&](double rho) { return profile_rho(rho).log_likelihood; }, -kRhoBound, kRhoBound, 7, 1e-5);
  if (!std::isfinite(rho_best.value))
    throw NumericalError("fit_mean_model: covariance not positive definite at any rho");

  MeanModelFit fit;
  fit.rho = rho_best.x;
  const Profiled at = profile_rho(fit.rho);
  fit.eta2 = std::exp(at.log_eta2);
  fit.log_likelihood = at.log_likelihood;

  const Eigen::MatrixXd G_kk = select(sar_covariance(fit.rho, W), included, included);
  Eigen::MatrixXd S = fit.eta2 * G_kk;
  S.diagonal() += sampling_var;
  const auto llt = factor_pd(S, "fit_mean_model");
  const Eigen::MatrixXd SiX = llt.solve(X);
  fit.beta = (X.transpose() * SiX).ldlt().solve(SiX.transpose() * ybar);
  const Eigen::VectorXd resid = ybar - X * fit.beta;
  fit.theta = X * fit.beta + fit.eta2 * G_kk * llt.solve(resid);
  return fit;
}

AreaConformalParams conditional_params(std::size_t j, const Eigen::VectorXd& beta, double eta2,
                                       double rho, const Eigen::VectorXd& theta_minus_j,
                                       const Eigen::MatrixXd& W, const Eigen::MatrixXd& X,
                                       double sigma2_j) {
  const Eigen::Index J = W.rows();
  const auto jj = static_cast<Eigen::Index>(j);
  if (jj >= J) throw InvalidArgument("conditional_params: area index out of range");
  if (theta_minus_j.size() != J - 1 || X.rows() != J || beta.size() != X.cols())
    throw InvalidArgument("conditional_params: dimension mismatch");
  if (!(sigma2_j > 0.0)) throw InvalidArgument("conditional_params: sigma2_j must be > 0");
  if (!(eta2 > 0.0)) throw NumericalError("conditional_params: V[-j,-j] is singular (eta2 = 0)");

  std::vector<Eigen::Index> others;
  others.reserve(static_cast<std::size_t>(J - 1));
  for (Eigen::Index k = 0; k < J; ++k)
    if (k != jj) others.push_back(k);
  const std::array<Eigen::Index, 1> self{jj};

  const Eigen::MatrixXd V = eta2 * sar_covariance(rho, W);
  const Eigen::MatrixXd V_oo = select(V, others, others);
  const Eigen::VectorXd v_jo = select(V, self, others).transpose();
  const auto llt = factor_pd(V_oo, "conditional_params");

  Eigen::VectorXd resid = theta_minus_j;
  for (Eigen::Index r = 0; r < J - 1; ++r) resid(r) -= X.row(others[r]).dot(beta);
  const Eigen::VectorXd gain = llt.solve(v_jo);

  AreaConformalParams out;
  out.mu = X.row(jj).dot(beta) + gain.dot(resid);
  const double cond_var = V(jj, jj) - gain.dot(v_jo);
  if (!(cond_var > 0.0)) throw NumericalError("conditional_params: non-positive conditional variance");
  out.tau2 = cond_var / sigma2_j;
  out.sigma2_hat = sigma2_j;
  return out;
}

// -- Pipeline ------------------------------------------------------------------

int AlphaMode::rank(std::size_t n) const {
  if (kind == Kind::ExactCoverage) return static_cast<int>((n + 1) / 3);
  return conformal_rank(alpha, n);
}

double AlphaMode::alpha_for(std::size_t n) const {
  if (kind == Kind::ExactCoverage)
    return static_cast<double>((n + 1) / 3) / static_cast<double>(n + 1);
  return alpha;
}

LooFit loo_conformal_params(const AreaTable& table, std::size_t j, const Eigen::MatrixXd& W) {
  const std::size_t J = table.size();
  std::vector<Eigen::Index> others;
  std::vector<AreaSpread> spreads;
  for (std::size_t k = 0; k < J; ++k) {
    if (k == j) continue;
    others.push_back(static_cast<Eigen::Index>(k));
    spreads.push_back({table.n(k) >= 2 ? table.sum_squares(k) : 0.0, table.n(k)});
  }

  LooFit out;
  out.hyper = estimate_ab(spreads);

  const auto K = static_cast<Eigen::Index>(others.size());
  const Eigen::MatrixXd X = table.design();
  Eigen::VectorXd ybar(K), sv(K);
  Eigen::MatrixXd X_k(K, X.cols());
  for (Eigen::Index r = 0; r < K; ++r) {
    const auto k = static_cast<std::size_t>(others[r]);
    ybar(r) = table.mean(k);
    sv(r) = eb_variance_observed(out.hyper, spreads[r]) / static_cast<double>(table.n(k));
    X_k.row(r) = X.row(others[r]);
  }
  out.mean_model = fit_mean_model(ybar, sv, X_k, W, others);
  out.params = conditional_params(j, out.mean_model.beta, out.mean_model.eta2,
                                  out.mean_model.rho, out.mean_model.theta, W, X,
                                  eb_variance_held_out(out.hyper));
  return out;
}

std::vector<AreaResult> area_pipeline(const AreaTable& table, const AlphaMode& alpha_mode,
                                      const PipelineOptions& options) {
  if (table.size() < 3) throw InvalidArgument("area_pipeline: need at least 3 areas");
  if (alpha_mode.kind == AlphaMode::Kind::Fixed && !(alpha_mode.alpha > 0.0 && alpha_mode.alpha < 1.0))
    throw InvalidArgument("alpha must lie in (0, 1)");
  const Eigen::MatrixXd X = table.design();
  if (column_rank(X) < X.cols()) throw RankDeficientError("covariate matrix is rank deficient");
  const Eigen::MatrixXd W = sq_exp_weights(table.centroids());

  std::vector<std::size_t> targets;
  for (std::size_t j = 0; j < table.size(); ++j)
    if (table.n(j) >= 2) targets.push_back(j);

  std::vector<AreaResult> results(targets.size());
  parallel_for(
      targets.size(),
      [&](std::size_t t) {
        const std::size_t j = targets[t];
        const auto& area = table.area(j);
        AreaResult& r = results[t];
        r.index = j;
        r.id = area.id;
        r.n = area.samples.size();
        r.alpha = alpha_mode.alpha_for(r.n);
        const int k = alpha_mode.rank(r.n);
        r.dta = dta_interval_rank(area.samples, k);
        r.dta.nominal_alpha = r.alpha;
        try {
          const LooFit fit = loo_conformal_params(table, j, W);
          r.params = fit.params;
          const WorkingModelParams wm(fit.params.mu, fit.params.tau2, fit.hyper.a, fit.hyper.b);
          r.fab = fab_interval_rank(area.samples, wm, k);
          r.fab.nominal_alpha = r.alpha;
        } catch (const std::exception& e) {
          r.fallback = true;
          r.message = e.what();
          r.fab = r.dta;
        }
      },
      options.threads);
  return results;
}

}  // namespace fabconf
