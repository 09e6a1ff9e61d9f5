#include "fabconf/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "fabconf/error.hpp"
#include "fabconf/interval.hpp"

namespace fabconf {

double FabMeasure::score(std::span<const double> bag, double point) const {
  return predictive_log_density(point, posterior_params(bag, params_));
}

std::optional<simd::CenterForm> FabMeasure::center_form(std::span<const double> sample) const {
  if (!augmented_) return std::nullopt;
  const double n = static_cast<double>(sample.size());
  const double prec = params_.precision();
  return simd::CenterForm{prec * params_.mu() + compensated_sum(sample), 1.0 / (prec + n + 1.0)};
}

double DtaMeasure::score(std::span<const double> bag, double point) const {
  if (bag.empty()) throw InvalidArgument("empty sample");
  const double mean = compensated_sum(bag) / static_cast<double>(bag.size());
  return -std::fabs(point - mean);
}

std::optional<simd::CenterForm> DtaMeasure::center_form(std::span<const double> sample) const {
  if (!augmented_) return std::nullopt;
  const double n = static_cast<double>(sample.size());
  return simd::CenterForm{compensated_sum(sample), 1.0 / (n + 1.0)};
}

std::vector<double> conformity_scores(std::span<const double> sample, double y,
                                      const ConformityMeasure& measure) {
  const std::size_t n = sample.size();
  std::vector<double> bag(sample.begin(), sample.end());
  bag.push_back(y);
  std::vector<double> scores(n + 1);
  if (measure.augmented()) {
    for (std::size_t i = 0; i <= n; ++i) scores[i] = measure.score(bag, bag[i]);
    return scores;
  }
  std::vector<double> rest(n);
  for (std::size_t i = 0; i <= n; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j <= n; ++j)
      if (j != i) rest[w++] = bag[j];
    scores[i] = measure.score(rest, bag[i]);
  }
  return scores;
}

namespace {

int count_le(std::span<const double> scores, double tol) {
  const double last = scores.back();
  const double slack = tol * std::max(1.0, std::fabs(last));
  int count = 0;
  for (double c : scores) count += (c <= last || (tol > 0.0 && std::fabs(c - last) <= slack));
  return count;
}

}  // namespace

int conforming_count(std::span<const double> sample, double y, const ConformityMeasure& measure,
                     double tie_tolerance) {
  return count_le(conformity_scores(sample, y, measure), tie_tolerance);
}

double conformal_pvalue(std::span<const double> sample, double y,
                        const ConformityMeasure& measure) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  return static_cast<double>(conforming_count(sample, y, measure)) /
         static_cast<double>(sample.size() + 1);
}

std::size_t GridSpec::size() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw InvalidArgument("grid: need finite lo < hi");
  if (!(resolution > 0.0) || !std::isfinite(resolution))
    throw InvalidArgument("grid: resolution must be > 0");
  return static_cast<std::size_t>(std::floor((hi - lo) / resolution + 1e-9)) + 1;
}

std::vector<double> GridSpec::points() const {
  std::vector<double> pts(size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = point(i);
  return pts;
}

namespace {

GridSpec padded_grid(double mn, double mx, std::size_t points) {
  if (points < 2) throw InvalidArgument("grid: need at least two points");
  double range = mx - mn;
  if (!(range > 0.0)) range = 1.0;
  const double lo = mn - 5.0 * range;
  const double hi = mx + 5.0 * range;
  return GridSpec{lo, hi, (hi - lo) / static_cast<double>(points - 1)};
}

}  // namespace

GridSpec GridSpec::around(std::span<const double> sample, std::size_t points) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
  return padded_grid(*mn, *mx, points);
}

GridSpec GridSpec::around(std::span<const double> sample, double anchor, std::size_t points) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
  return padded_grid(std::min(*mn, anchor), std::max(*mx, anchor), points);
}

std::vector<int> step_profile(std::span<const double> sample, const ConformityMeasure& measure,
                              const GridSpec& grid, const GridOptions& options) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  const std::vector<double> pts = grid.points();
  std::vector<int> counts(pts.size());

  const auto center = options.use_kernel && options.tie_tolerance == 0.0
                          ? measure.center_form(sample)
                          : std::nullopt;
  if (center) {
    std::vector<std::int32_t> raw(pts.size());
    simd::count_conforming(sample, *center, pts, raw);
    std::copy(raw.begin(), raw.end(), counts.begin());
    return counts;
  }
  for (std::size_t g = 0; g < pts.size(); ++g)
    counts[g] = conforming_count(sample, pts[g], measure, options.tie_tolerance);
  return counts;
}

GridRegion grid_region(std::span<const double> sample, const ConformityMeasure& measure,
                       double alpha, const GridSpec& grid, const GridOptions& options) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const std::vector<int> counts = step_profile(sample, measure, grid, options);
  const int k = conformal_rank(alpha, sample.size());

  GridRegion region{grid.lo, grid.hi, grid.resolution, {}, {}};
  region.accepted.resize(counts.size());
  for (std::size_t g = 0; g < counts.size(); ++g) region.accepted[g] = counts[g] > k;

  std::size_t g = 0;
  while (g < counts.size()) {
    if (!region.accepted[g]) {
      ++g;
      continue;
    }
    const std::size_t start = g;
    while (g + 1 < counts.size() && region.accepted[g + 1]) ++g;
    region.intervals.emplace_back(grid.point(start), grid.point(g));
    ++g;
  }
  return region;
}

}  // namespace fabconf
