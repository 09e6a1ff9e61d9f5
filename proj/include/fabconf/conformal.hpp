#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fabconf/simd/kernels.hpp"
#include "fabconf/working_model.hpp"

namespace fabconf {

/// Scores how well `point` conforms to `bag`; larger means more conforming.
///
/// With augmented() == false the conformal scores are the classical
/// c_i = C(bag \ {y_i}, y_i). With augmented() == true they are
/// c_i = C(full bag, y_i), the equivalent form used for exact computation.
class ConformityMeasure {
 public:
  virtual ~ConformityMeasure() = default;

  virtual double score(std::span<const double> bag, double point) const = 0;
  virtual bool augmented() const noexcept = 0;

  /// Measures whose augmented scores are a decreasing function of the
  /// distance to a candidate-dependent center return that center here,
  /// enabling the vectorized counting kernel. Default: none.
  virtual std::optional<simd::CenterForm> center_form(std::span<const double> sample) const {
    (void)sample;
    return std::nullopt;
  }
};

/// Posterior predictive (log) density of the normal working model.
class FabMeasure final : public ConformityMeasure {
 public:
  FabMeasure(WorkingModelParams params, bool augmented) : params_(params), augmented_(augmented) {}

  double score(std::span<const double> bag, double point) const override;
  bool augmented() const noexcept override { return augmented_; }
  std::optional<simd::CenterForm> center_form(std::span<const double> sample) const override;

  const WorkingModelParams& params() const noexcept { return params_; }

 private:
  WorkingModelParams params_;
  bool augmented_;
};

/// Distance to the average: score = -|point - mean(bag)|.
class DtaMeasure final : public ConformityMeasure {
 public:
  explicit DtaMeasure(bool augmented) : augmented_(augmented) {}

  double score(std::span<const double> bag, double point) const override;
  bool augmented() const noexcept override { return augmented_; }
  std::optional<simd::CenterForm> center_form(std::span<const double> sample) const override;

 private:
  bool augmented_;
};

/// Conformity scores c_1..c_{n+1} for candidate `y` (index n is the candidate).
std::vector<double> conformity_scores(std::span<const double> sample, double y,
                                      const ConformityMeasure& measure);

/// #{i = 1..n+1 : c_i <= c_{n+1}}. Always >= 1.
int conforming_count(std::span<const double> sample, double y, const ConformityMeasure& measure,
                     double tie_tolerance = 0.0);

/// p_y = conforming_count / (n+1). Throws InvalidArgument for an empty sample.
double conformal_pvalue(std::span<const double> sample, double y, const ConformityMeasure& measure);

/// Uniform evaluation grid lo, lo + resolution, ..., with
/// floor((hi - lo)/resolution) + 1 points.
struct GridSpec {
  double lo;
  double hi;
  double resolution;

  std::size_t size() const;
  double point(std::size_t i) const noexcept { return lo + static_cast<double>(i) * resolution; }
  std::vector<double> points() const;

  /// [min - 5 range, max + 5 range] with `points` points; range = max - min,
  /// or 1 for a constant sample.
  static GridSpec around(std::span<const double> sample, std::size_t points = 4001);

  /// As above with min, max and range taken over the sample together with
  /// `anchor` (typically the prior mean). A far-off prior mean pulls the FAB
  /// region beyond the sample-only span; with the anchor included every
  /// reflection g(y_i) lies inside the grid.
  static GridSpec around(std::span<const double> sample, double anchor, std::size_t points = 4001);
};

struct GridOptions {
  /// Ties |c_i - c_{n+1}| <= tol * max(1, |c_{n+1}|) count as <=. Zero is the
  /// exact comparison. A nonzero tolerance disables the vectorized kernel.
  double tie_tolerance = 0.0;
  /// Use the center-distance kernel when the measure provides one.
  bool use_kernel = true;
};

struct GridRegion {
  double grid_lo;
  double grid_hi;
  double resolution;
  std::vector<std::uint8_t> accepted;
  /// Contiguous accepted runs as closed [first, last] grid-point intervals.
  std::vector<std::pair<double, double>> intervals;
};

/// Conformal counts f(y) at every grid point.
std::vector<int> step_profile(std::span<const double> sample, const ConformityMeasure& measure,
                              const GridSpec& grid, const GridOptions& options = {});

/// Grid points with count > k, k = floor(alpha (n+1)).
GridRegion grid_region(std::span<const double> sample, const ConformityMeasure& measure,
                       double alpha, const GridSpec& grid, const GridOptions& options = {});

}  // namespace fabconf
