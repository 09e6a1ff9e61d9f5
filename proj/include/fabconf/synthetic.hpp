#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fabconf/rng.hpp"
#include "fabconf/small_area.hpp"

namespace fabconf {

/// Parameters of the spatial Fay-Herriot generator:
///   sigma2_j ~ IG(a/2, b/2), theta ~ N(X beta, eta2 G(rho)),
///   y_ij ~ N(theta_j, sigma2_j), independently across areas.
/// Centroids are uniform on [0, extent]^2; covariates beyond the intercept
/// are iid N(0, 1); n_j is uniform on [n_min, n_max].
struct GeneratorSpec {
  std::size_t areas = 50;
  std::size_t n_min = 3;
  std::size_t n_max = 10;
  std::vector<double> beta{0.0, 1.0};
  double eta2 = 0.5;
  double rho = 0.7;
  double a = 10.0;
  double b = 8.0;
  double extent = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Everything except the within-area samples.
struct AreaTruth {
  std::vector<Centroid> centroids;
  Eigen::MatrixXd X;  // with intercept column
  Eigen::MatrixXd W;
  Eigen::VectorXd theta;
  std::vector<double> sigma2;
  std::vector<std::size_t> sizes;
};

AreaTruth draw_truth(const GeneratorSpec& spec);

/// Samples for every area given the truth, from the stream keyed by
/// (seed, stream). Also returns one extra draw per area in `next` when
/// requested, for coverage checks.
AreaTable draw_samples(const AreaTruth& truth, std::uint64_t seed, std::uint64_t stream,
                       std::vector<double>* next = nullptr);

/// draw_truth followed by draw_samples(truth, spec.seed, 1).
AreaTable generate_areas(const GeneratorSpec& spec, AreaTruth* truth_out = nullptr);

}  // namespace fabconf
