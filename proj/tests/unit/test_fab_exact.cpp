#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "fabconf/baselines.hpp"
#include "fabconf/conformal.hpp"
#include "fabconf/error.hpp"
#include "fabconf/fab_exact.hpp"

using namespace fabconf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double center = 0.0) {
  std::normal_distribution<double> normal(center, 1.0);
  std::vector<double> y(n);
  for (auto& v : y) v = normal(rng);
  return y;
}

double sum(const std::vector<double>& y) {
  double s = 0.0;
  for (double v : y) s += v;
  return s;
}

}  // namespace

TEST_CASE("g map basics", "[fab_exact]") {
  CHECK(g_map(0.0, 0.0, 3, 0.0, 1.0) == 0.0);

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto y = draw(rng, 1 + trial % 8);
    const WorkingModelParams p(std::uniform_real_distribution<double>(-3, 3)(rng), 0.1 + trial % 5);
    const double t = posterior_mean_theta(y, p);
    CHECK_THAT(g_map(t, sum(y), y.size(), p.mu(), p.precision()), WithinAbs(t, 1e-12 * std::max(1.0, std::abs(t))));
    // g is an involution-like reflection: it swaps sides of the fixed point.
    const double gy = g_map(y[0], sum(y), y.size(), p.mu(), p.precision());
    CHECK((y[0] - t) * (gy - t) <= 0.0);
  }
}

TEST_CASE("g map at zero precision is the DTA map", "[fab_exact]") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto y = draw(rng, 2 + trial % 8);
    for (double v : y) CHECK(same_bits(g_map(v, sum(y), y.size(), 5.0, 0.0), dta_g(v, sum(y), y.size())));
  }
}

TEST_CASE("reflected sample matches element-wise g", "[fab_exact]") {
  const std::vector<double> y{0.4, -1.3, 2.2, 0.9, 1.1, -0.2, 3.3, 0.0, 0.7};
  const WorkingModelParams p(0.5, 0.8);
  const auto g = reflect_sample(y, p);
  REQUIRE(g.size() == y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(same_bits(g[i], g_map(y[i], compensated_sum(y), y.size(), p.mu(), p.precision())));
}

TEST_CASE("all-zero sample gives a point interval", "[fab_exact]") {
  const std::vector<double> y{0.0, 0.0, 0.0};
  const auto iv = fab_interval(y, WorkingModelParams(0.0, 1.0), 0.25);
  CHECK(iv.k == 1);
  CHECK(iv.lower == 0.0);
  CHECK(iv.upper == 0.0);
  CHECK(iv.degenerate());
  CHECK(iv.achieved_level == 0.75);
}

TEST_CASE("n = 4, alpha = 0.2 takes the first and eighth order statistics", "[fab_exact]") {
  const std::vector<double> y{-0.8, 0.1, 0.9, 2.3};
  const WorkingModelParams p(0.5, 0.6);
  auto v = reflect_sample(y, p);
  v.insert(v.end(), y.begin(), y.end());
  std::sort(v.begin(), v.end());
  const auto iv = fab_interval(y, p, 0.2);
  CHECK(iv.k == 1);
  CHECK(iv.lower == v[0]);
  CHECK(iv.upper == v[7]);
  CHECK_THAT(iv.achieved_level, WithinRel(0.8, 1e-15));
}

TEST_CASE("order statistics at general k", "[fab_exact]") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto y = draw(rng, 3 + trial % 10);
    const WorkingModelParams p(0.1 * trial - 2.5, 0.5);
    auto v = reflect_sample(y, p);
    v.insert(v.end(), y.begin(), y.end());
    std::sort(v.begin(), v.end());
    const int n = static_cast<int>(y.size());
    for (int k = 1; k <= n; ++k) {
      const auto iv = fab_interval_rank(y, p, k);
      CHECK(iv.lower == v[k - 1]);
      CHECK(iv.upper == v[2 * n - k]);
    }
  }
}

TEST_CASE("k = 0 yields the real line", "[fab_exact]") {
  const std::vector<double> y{0.5, 1.5, 2.5};
  const auto iv = fab_interval(y, WorkingModelParams(0.0, 1.0), 0.1);
  CHECK(iv.k == 0);
  CHECK(std::isinf(iv.lower));
  CHECK(iv.lower < 0);
  CHECK(std::isinf(iv.upper));
  CHECK(iv.achieved_level == 1.0);
  CHECK_FALSE(iv.bounded());
}

TEST_CASE("alpha outside (0, 1) is rejected", "[fab_exact]") {
  const std::vector<double> y{0.5, 1.5};
  const WorkingModelParams p(0.0, 1.0);
  CHECK_THROWS_AS(fab_interval(y, p, 0.0), InvalidArgument);
  CHECK_THROWS_AS(fab_interval(y, p, 1.0), InvalidArgument);
  CHECK_THROWS_AS(fab_interval(y, p, -0.3), InvalidArgument);
  CHECK_THROWS_AS(fab_interval(y, p, std::nan("")), InvalidArgument);
  const std::vector<double> empty;
  CHECK_THROWS_AS(fab_interval(empty, p, 0.5), InvalidArgument);
}

TEST_CASE("exact interval agrees with the grid oracle", "[fab_exact]") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  const double tau2s[] = {0.1, 0.5, 2.0, 10.0};
  int bounded = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const WorkingModelParams p(unif(rng), tau2s[trial % 4]);
    const auto y = draw(rng, 2 + trial % 7, p.mu() + unif(rng));
    const double alpha = trial % 3 == 0 ? 0.5 : 0.25;
    const auto iv = fab_interval(y, p, alpha);
    if (!iv.bounded()) continue;
    ++bounded;
    const auto grid = GridSpec::around(y, p.mu());
    const auto region = grid_region(y, FabMeasure(p, true), alpha, grid);
    REQUIRE(region.intervals.size() == 1);
    CHECK(std::abs(region.intervals[0].first - iv.lower) <= grid.resolution);
    CHECK(std::abs(region.intervals[0].second - iv.upper) <= grid.resolution);
  }
  CHECK(bounded > 150);
}

TEST_CASE("interval properties", "[fab_exact]") {
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto y = draw(rng, n, unif(rng));
    const WorkingModelParams p(unif(rng), 0.05 + std::abs(unif(rng)), 1.0, 1.0);
    const double alpha = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const auto iv = fab_interval(y, p, alpha);
    CHECK(iv.lower <= iv.upper);
    CHECK(iv.achieved_level >= 1.0 - alpha - 1e-12);
    if (iv.k >= 1) CHECK(iv.contains(posterior_mean_theta(y, p)));

    // (a, b) independence
    const auto other = fab_interval(y, WorkingModelParams(p.mu(), p.tau2(), 9.0, 0.02), alpha);
    CHECK(same_bits(iv.lower, other.lower));
    CHECK(same_bits(iv.upper, other.upper));

    if (iv.k < 1) continue;
    // location equivariance
    const double c = 5.0 * unif(rng);
    std::vector<double> shifted;
    for (double v : y) shifted.push_back(v + c);
    const auto moved = fab_interval(shifted, WorkingModelParams(p.mu() + c, p.tau2()), alpha);
    CHECK_THAT(moved.lower, WithinAbs(iv.lower + c, 1e-12 * (1.0 + std::abs(iv.lower + c)) * 10));
    CHECK_THAT(moved.upper, WithinAbs(iv.upper + c, 1e-12 * (1.0 + std::abs(iv.upper + c)) * 10));

    // scale equivariance
    const double lambda = 0.1 + std::abs(unif(rng));
    std::vector<double> scaled;
    for (double v : y) scaled.push_back(lambda * v);
    const auto stretched = fab_interval(scaled, WorkingModelParams(lambda * p.mu(), p.tau2()), alpha);
    const double span = std::max({1.0, std::abs(iv.lower), std::abs(iv.upper)}) * lambda;
    CHECK(std::abs(stretched.lower - lambda * iv.lower) <= 1e-12 * span * 10);
    CHECK(std::abs(stretched.upper - lambda * iv.upper) <= 1e-12 * span * 10);

    // permutation invariance
    auto perm = y;
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto permuted = fab_interval(perm, p, alpha);
    CHECK(std::abs(permuted.lower - iv.lower) <= 1e-13 * (1.0 + std::abs(iv.lower)));
    CHECK(std::abs(permuted.upper - iv.upper) <= 1e-13 * (1.0 + std::abs(iv.upper)));
  }
}

TEST_CASE("zero precision reproduces DTA exactly", "[fab_exact]") {
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 500; ++trial) {
    const auto y = draw(rng, 2 + trial % 11, 0.1 * trial);
    const double alpha = 0.05 + 0.9 * (trial % 17) / 16.0;
    const auto fab = fab_interval(y, WorkingModelParams::diffuse(), alpha);
    const auto dta = dta_interval(y, alpha);
    CHECK(same_bits(fab.lower, dta.lower));
    CHECK(same_bits(fab.upper, dta.upper));
    CHECK(fab.k == dta.k);
  }
}

TEST_CASE("sub-regions", "[fab_exact]") {
  const std::vector<double> sym{-1.0, 1.0};
  const auto s = sub_regions(sym, WorkingModelParams(0.0, 1.0));
  REQUIRE(s.size() == 2);
  CHECK(s[0].lo == -s[1].hi);
  CHECK(s[0].hi == -s[1].lo);

  const std::vector<double> same{2.0, 2.0, 2.0};
  for (const auto& r : sub_regions(same, WorkingModelParams(2.0, 0.5))) {
    CHECK(r.lo == 2.0);
    CHECK(r.hi == 2.0);
  }
}

TEST_CASE("sub-regions contain the posterior mean and bound the score comparison", "[fab_exact]") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto y = draw(rng, 2 + trial % 6, 1.0);
    const WorkingModelParams p(-0.5 + 0.05 * trial, 0.3 + trial % 3, 2.0, 1.5);
    const double t = posterior_mean_theta(y, p);
    const FabMeasure measure(p, true);
    for (const auto& r : sub_regions(y, p)) {
      CHECK(r.lo <= t + 1e-12);
      CHECK(r.hi >= t - 1e-12);
      const double width = r.hi - r.lo;
      for (int k = 0; k < 8; ++k) {
        const double inside = r.lo + width * (0.02 + 0.96 * unif(rng));
        const double outside = unif(rng) < 0.5 ? r.lo - width * (0.02 + unif(rng))
                                               : r.hi + width * (0.02 + unif(rng));
        const auto in_scores = conformity_scores(y, inside, measure);
        const auto out_scores = conformity_scores(y, outside, measure);
        CHECK(in_scores[r.index] <= in_scores.back());
        CHECK(out_scores[r.index] > out_scores.back());
      }
    }
  }
}
