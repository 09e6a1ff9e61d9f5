#include "fabconf/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fabconf/error.hpp"

namespace fabconf {

void GeneratorSpec::validate() const {
  if (areas < 2) throw InvalidArgument("generator: need at least 2 areas");
  if (n_min < 1 || n_max < n_min) throw InvalidArgument("generator: need 1 <= n_min <= n_max");
  if (beta.empty()) throw InvalidArgument("generator: beta must include the intercept");
  if (!(eta2 > 0.0)) throw InvalidArgument("generator: eta2 must be > 0");
  if (!(std::fabs(rho) < 1.0)) throw InvalidArgument("generator: |rho| must be < 1");
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("generator: a, b must be > 0");
  if (!(extent > 0.0)) throw InvalidArgument("generator: extent must be > 0");
}

AreaTruth draw_truth(const GeneratorSpec& spec) {
  spec.validate();
  const auto J = static_cast<Eigen::Index>(spec.areas);
  const auto p = static_cast<Eigen::Index>(spec.beta.size());
  CounterRng rng(spec.seed, 0, 0);
  std::uniform_real_distribution<double> unif(0.0, spec.extent);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size_dist(spec.n_min, spec.n_max);
  std::gamma_distribution<double> precision(0.5 * spec.a, 2.0 / spec.b);

  AreaTruth t;
  t.centroids.resize(spec.areas);
  for (auto& c : t.centroids) c = {unif(rng), unif(rng)};
  t.X.resize(J, p);
  for (Eigen::Index j = 0; j < J; ++j) {
    t.X(j, 0) = 1.0;
    for (Eigen::Index c = 1; c < p; ++c) t.X(j, c) = normal(rng);
  }
  t.W = sq_exp_weights(t.centroids);
  const Eigen::MatrixXd G = sar_covariance(spec.rho, t.W);
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalError("generator: G is not positive definite");
  Eigen::VectorXd z(J);
  for (Eigen::Index j = 0; j < J; ++j) z(j) = normal(rng);
  const Eigen::Map<const Eigen::VectorXd> beta(spec.beta.data(), p);
  const Eigen::VectorXd Lz = llt.matrixL() * z;
  t.theta = t.X * beta + std::sqrt(spec.eta2) * Lz;

  t.sigma2.resize(spec.areas);
  t.sizes.resize(spec.areas);
  for (std::size_t j = 0; j < spec.areas; ++j) {
    t.sigma2[j] = 1.0 / precision(rng);
    t.sizes[j] = size_dist(rng);
  }
  return t;
}

AreaTable draw_samples(const AreaTruth& truth, std::uint64_t seed, std::uint64_t stream,
                       std::vector<double>* next) {
  const std::size_t J = truth.sizes.size();
  std::vector<Area> areas(J);
  if (next) next->assign(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    CounterRng rng(seed, stream, j);
    std::normal_distribution<double> normal(truth.theta(static_cast<Eigen::Index>(j)),
                                            std::sqrt(truth.sigma2[j]));
    Area& a = areas[j];
    a.id = "A" + std::to_string(j + 1);
    a.samples.resize(truth.sizes[j]);
    for (auto& y : a.samples) y = normal(rng);
    if (next) (*next)[j] = normal(rng);
    a.covariates.assign(truth.X.row(static_cast<Eigen::Index>(j)).begin(),
                        truth.X.row(static_cast<Eigen::Index>(j)).end());
    a.centroid = truth.centroids[j];
  }
  return AreaTable(std::move(areas));
}

AreaTable generate_areas(const GeneratorSpec& spec, AreaTruth* truth_out) {
  AreaTruth truth = draw_truth(spec);
  AreaTable table = draw_samples(truth, spec.seed, 1);
  if (truth_out) *truth_out = std::move(truth);
  return table;
}

}  // namespace fabconf
