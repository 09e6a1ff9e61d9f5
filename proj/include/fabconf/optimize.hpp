#pragma once

#include <functional>
#include <vector>

namespace fabconf::optimize {

struct NelderMeadOptions {
  double initial_step = 0.5;
  double f_tolerance = 1e-12;  // on the spread of simplex values
  double x_tolerance = 1e-10;  // on the simplex diameter
  int max_iterations = 5000;
};

struct Minimum {
  std::vector<double> x;
  double value;
  int iterations;
};

/// Derivative-free simplex minimization. Throws ConvergenceError carrying
/// the best vertex when max_iterations is exhausted. Non-finite objective
/// values are treated as +inf.
Minimum nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                    std::vector<double> start, const NelderMeadOptions& options = {});

struct ScalarMinimum {
  double x;
  double value;
  int evaluations;
};

/// Brent's minimizer on [lo, hi]: golden-section steps accelerated by
/// parabolic interpolation. Converges to a local minimum within `tolerance`.
ScalarMinimum brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                             double tolerance = 1e-8, int max_evaluations = 200);

}  // namespace fabconf::optimize
