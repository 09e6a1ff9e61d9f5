#include "fabconf/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fabconf/error.hpp"

namespace fabconf::optimize {

namespace {

double finite_or_inf(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

Minimum nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                    std::vector<double> start, const NelderMeadOptions& options) {
  const std::size_t dim = start.size();
  std::vector<std::vector<double>> pts(dim + 1, start);
  std::vector<double> vals(dim + 1);
  for (std::size_t i = 0; i < dim; ++i) pts[i + 1][i] += options.initial_step;
  for (std::size_t i = 0; i <= dim; ++i) vals[i] = finite_or_inf(f(pts[i]));

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim), trial(dim), trial2(dim);
  auto eval = [&](const std::vector<double>& x) { return finite_or_inf(f(x)); };
  auto along = [&](double t, std::vector<double>& out, std::size_t worst) {
    for (std::size_t d = 0; d < dim; ++d)
      out[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[dim - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= dim; ++i)
      for (std::size_t d = 0; d < dim; ++d)
        diameter = std::max(diameter, std::fabs(pts[i][d] - pts[best][d]));
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(spread) &&
        spread <= options.f_tolerance * (1.0 + std::fabs(vals[best])) &&
        diameter <= options.x_tolerance * (1.0 + std::fabs(pts[best][0])))
      return {pts[best], vals[best], iter};

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i : order)
      if (i != worst)
        for (std::size_t d = 0; d < dim; ++d) centroid[d] += pts[i][d] / static_cast<double>(dim);

    along(-1.0, trial, worst);
    const double fr = eval(trial);
    if (fr < vals[best]) {
      along(-2.0, trial2, worst);
      const double fe = eval(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    along(outside ? -0.5 : 0.5, trial2, worst);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < dim; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  throw ConvergenceError("nelder_mead: iteration limit reached", pts[best], vals[best]);
}

ScalarMinimum brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                             double tolerance, int max_evaluations) {
  constexpr double golden = 0.3819660112501051;
  constexpr double eps = 1e-12;
  double a = lo;
  double b = hi;
  double x = a + golden * (b - a);
  double w = x;
  double v = x;
  double fx = finite_or_inf(f(x));
  double fw = fx;
  double fv = fx;
  double d = 0.0;
  double e = 0.0;
  int evals = 1;

  while (evals < max_evaluations) {
    const double mid = 0.5 * (a + b);
    const double tol1 = eps * std::fabs(x) + tolerance / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - mid) <= tol2 - 0.5 * (b - a)) break;

    bool golden_step = true;
    if (std::fabs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double e_prev = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = x < mid ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x < mid ? b : a) - x;
      d = golden * e;
    }
    const double u = std::fabs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = finite_or_inf(f(u));
    ++evals;
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, fx, evals};
}

}  // namespace fabconf::optimize
