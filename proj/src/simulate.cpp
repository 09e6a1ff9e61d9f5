#include "fabconf/simulate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "fabconf/baselines.hpp"
#include "fabconf/error.hpp"
#include "fabconf/fab_exact.hpp"
#include "fabconf/format.hpp"
#include "fabconf/parallel.hpp"
#include "fabconf/working_model.hpp"

namespace fabconf {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::Fab: return "FAB";
    case Method::Dta: return "DTA";
    case Method::PivotZ: return "PIVOT_Z";
    case Method::PivotT: return "PIVOT_T";
    case Method::Eb: return "EB";
  }
  return "?";
}

std::string_view to_string(Population p) noexcept {
  return p == Population::Normal ? "normal" : "mixture";
}

namespace {

std::string normalize(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

Method parse_method(std::string_view text) {
  const std::string t = normalize(text);
  for (Method m : {Method::Fab, Method::Dta, Method::PivotZ, Method::PivotT, Method::Eb})
    if (t == to_string(m)) return m;
  throw InvalidArgument("unknown method '" + std::string(text) + "'");
}

Population parse_population(std::string_view text) {
  const std::string t = normalize(text);
  if (t == "NORMAL") return Population::Normal;
  if (t == "MIXTURE" || t == "POINT_MASS_MIXTURE") return Population::PointMassMixture;
  throw InvalidArgument("unknown population '" + std::string(text) + "'");
}

double draw_population(Population pop, double theta, CounterRng& rng) {
  if (pop == Population::PointMassMixture) return rng.uniform() < 0.5 ? theta - 1.0 : theta + 1.0;
  std::normal_distribution<double> normal(theta, 1.0);
  return normal(rng);
}

std::vector<double> sample_population(Population pop, double theta, std::size_t n,
                                      CounterRng& rng) {
  std::vector<double> out(n);
  if (pop == Population::PointMassMixture) {
    for (auto& y : out) y = draw_population(pop, theta, rng);
    return out;
  }
  std::normal_distribution<double> normal(theta, 1.0);
  for (auto& y : out) y = normal(rng);
  return out;
}

void SimConfig::validate() const {
  if (replications < 1) throw InvalidArgument("simulation: replications must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (methods.empty() || n_list.empty() || theta_grid.empty() || tau2_list.empty())
    throw InvalidArgument("simulation: method, n, theta and tau2 lists must be non-empty");
  for (double t : tau2_list)
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("simulation: tau2 must be > 0");
  if (!(sigma2 > 0.0)) throw InvalidArgument("simulation: sigma2 must be > 0");
  for (std::size_t n : n_list) {
    if (n < 1) throw InvalidArgument("simulation: n must be >= 1");
    for (Method m : methods)
      if (n < 2 && m != Method::Fab && m != Method::PivotZ && m != Method::Eb)
        throw InvalidArgument("simulation: method " + std::string(to_string(m)) + " needs n >= 2");
  }
}

const SimRow& SimReport::find(std::string_view method, std::size_t n, double tau2,
                              double theta_minus_mu) const {
  for (const auto& r : rows) {
    const bool offset_match = (std::isnan(theta_minus_mu) && std::isnan(r.theta_minus_mu)) ||
                              std::fabs(r.theta_minus_mu - theta_minus_mu) < 1e-12;
    if (r.method == method && r.n == n && std::fabs(r.tau2 - tau2) < 1e-12 && offset_match)
      return r;
  }
  throw InvalidArgument("simulation report: no matching row");
}

namespace {

/// Running mean / standard error with compensated accumulation, fed in a
/// fixed order.
class Moments {
 public:
  void add(double x) {
    kahan(sum_, sum_c_, x);
    kahan(sq_, sq_c_, x * x);
    ++count_;
  }
  std::size_t count() const { return count_; }
  double mean() const { return count_ ? (sum_ + sum_c_) / static_cast<double>(count_) : kNaN; }
  double se() const {
    if (count_ < 2) return kNaN;
    const double n = static_cast<double>(count_);
    const double m = mean();
    const double var = std::max(0.0, ((sq_ + sq_c_) - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }

 private:
  static void kahan(double& sum, double& c, double x) {
    const double t = sum + x;
    c += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double sum_ = 0.0, sum_c_ = 0.0, sq_ = 0.0, sq_c_ = 0.0;
  std::size_t count_ = 0;
};

struct Outcome {
  double lower;
  double upper;
  bool covered;
};

struct CellSpec {
  std::size_t n;
  double tau2;
  double theta;       // fixed population mean, unless draw_theta
  bool draw_theta;    // theta ~ N(mu, tau2) per replication
  std::uint64_t cell; // RNG stream key
};

struct CommonSpec {
  std::vector<Method> methods;
  double alpha;
  double mu;
  double sigma2;
  Population population;
  std::size_t replications;
  std::uint64_t seed;
  unsigned threads;
};

PredictionInterval interval_for(Method m, std::span<const double> y, const CommonSpec& c,
                                double tau2) {
  switch (m) {
    case Method::Fab: return fab_interval(y, WorkingModelParams(c.mu, tau2), c.alpha);
    case Method::Dta: return dta_interval(y, c.alpha);
    case Method::PivotZ: return pivot_interval(y, {VarianceMode::known(c.sigma2), c.alpha});
    case Method::PivotT: return pivot_interval(y, {VarianceMode::estimated(), c.alpha});
    case Method::Eb:
      return eb_interval(y, {c.mu, tau2 * c.sigma2, VarianceMode::known(c.sigma2), c.alpha});
  }
  throw InvalidArgument("unknown method");
}

/// outcomes[m][r] for method m, replication r.
std::vector<std::vector<Outcome>> run_cell(const CommonSpec& c, const CellSpec& cell) {
  const std::size_t M = c.methods.size();
  std::vector<std::vector<Outcome>> out(M, std::vector<Outcome>(c.replications));
  parallel_for(
      c.replications,
      [&](std::size_t r) {
        CounterRng rng(c.seed, cell.cell, r);
        double theta = cell.theta;
        if (cell.draw_theta) {
          std::normal_distribution<double> prior(c.mu, std::sqrt(cell.tau2));
          theta = prior(rng);
        }
        const std::vector<double> y = sample_population(c.population, theta, cell.n, rng);
        const double next = draw_population(c.population, theta, rng);
        for (std::size_t m = 0; m < M; ++m) {
          const auto iv = interval_for(c.methods[m], y, c, cell.tau2);
          out[m][r] = Outcome{iv.lower, iv.upper, iv.contains(next)};
        }
      },
      c.threads);
  return out;
}

SimRow summarize(Method m, const CommonSpec& c, const CellSpec& cell,
                 const std::vector<Outcome>& outcomes) {
  Moments width, cover, lower, upper;
  std::size_t inf_count = 0;
  for (const auto& o : outcomes) {
    cover.add(o.covered ? 1.0 : 0.0);
    if (std::isfinite(o.lower) && std::isfinite(o.upper)) {
      width.add(o.upper - o.lower);
      lower.add(o.lower);
      upper.add(o.upper);
    } else {
      ++inf_count;
    }
  }
  SimRow row;
  row.method = std::string(to_string(m));
  row.n = cell.n;
  row.theta_minus_mu = cell.draw_theta ? kNaN : cell.theta - c.mu;
  row.tau2 = cell.tau2;
  row.mean_width = width.mean();
  row.width_se = width.se();
  row.coverage = cover.mean();
  row.coverage_se = cover.se();
  row.inf_width_count = inf_count;
  row.seed = c.seed;
  row.mean_lower = lower.mean();
  row.lower_se = lower.se();
  row.mean_upper = upper.mean();
  row.upper_se = upper.se();
  return row;
}

CommonSpec common_from(const SimConfig& config) {
  config.validate();
  return CommonSpec{config.methods,    config.alpha,        config.mu,   config.sigma2,
                    config.population, config.replications, config.seed, config.threads};
}

SimReport run_fixed_theta_grid(const SimConfig& config) {
  const CommonSpec c = common_from(config);
  SimReport report;
  std::uint64_t cell_index = 0;
  for (std::size_t n : config.n_list)
    for (double tau2 : config.tau2_list)
      for (double theta : config.theta_grid) {
        const CellSpec cell{n, tau2, theta, false, cell_index++};
        const auto outcomes = run_cell(c, cell);
        for (std::size_t m = 0; m < c.methods.size(); ++m)
          report.rows.push_back(summarize(c.methods[m], c, cell, outcomes[m]));
      }
  return report;
}

}  // namespace

SimReport expected_width(const SimConfig& config) { return run_fixed_theta_grid(config); }

SimReport coverage_experiment(const SimConfig& config) { return run_fixed_theta_grid(config); }

SimReport bayes_risk_ratio(const std::vector<std::size_t>& n_list,
                           const std::vector<double>& tau2_grid, double alpha,
                           std::size_t replications, std::uint64_t seed, double mu,
                           unsigned threads) {
  SimConfig config;
  config.methods = {Method::Fab, Method::Dta};
  config.n_list = n_list;
  config.tau2_list = tau2_grid;
  config.alpha = alpha;
  config.replications = replications;
  config.seed = seed;
  config.mu = mu;
  config.threads = threads;
  const CommonSpec c = common_from(config);

  SimReport report;
  std::uint64_t cell_index = 0;
  for (std::size_t n : n_list)
    for (double tau2 : tau2_grid) {
      const CellSpec cell{n, tau2, mu, true, cell_index++};
      const auto outcomes = run_cell(c, cell);
      const SimRow fab = summarize(Method::Fab, c, cell, outcomes[0]);
      const SimRow dta = summarize(Method::Dta, c, cell, outcomes[1]);

      SimRow ratio = fab;
      ratio.method = "FAB/DTA";
      ratio.mean_width = fab.mean_width / dta.mean_width;
      Moments resid;
      for (std::size_t r = 0; r < replications; ++r) {
        const auto& f = outcomes[0][r];
        const auto& d = outcomes[1][r];
        if (std::isfinite(f.upper - f.lower) && std::isfinite(d.upper - d.lower))
          resid.add((f.upper - f.lower) - ratio.mean_width * (d.upper - d.lower));
      }
      ratio.width_se = resid.se() / dta.mean_width;
      ratio.coverage = kNaN;
      ratio.coverage_se = kNaN;
      ratio.mean_lower = ratio.lower_se = ratio.mean_upper = ratio.upper_se = kNaN;
      report.rows.push_back(fab);
      report.rows.push_back(dta);
      report.rows.push_back(ratio);
    }
  return report;
}

SimReport bounds_profile(const std::vector<double>& theta_grid, std::size_t n, double mu,
                         double tau2, double alpha, std::size_t replications, std::uint64_t seed,
                         unsigned threads) {
  SimConfig config;
  config.methods = {Method::Fab, Method::Dta};
  config.n_list = {n};
  config.theta_grid = theta_grid;
  config.tau2_list = {tau2};
  config.mu = mu;
  config.alpha = alpha;
  config.replications = replications;
  config.seed = seed;
  config.threads = threads;
  return run_fixed_theta_grid(config);
}

void write_report_csv(std::ostream& out, const SimReport& report) {
  out << "method,n,theta_minus_mu,tau2,mean_width,width_se,coverage,coverage_se,inf_width_count,seed\n";
  for (const auto& r : report.rows)
    out << r.method << ',' << r.n << ',' << format_number(r.theta_minus_mu) << ','
        << format_number(r.tau2) << ',' << format_number(r.mean_width) << ','
        << format_number(r.width_se) << ',' << format_number(r.coverage) << ','
        << format_number(r.coverage_se) << ',' << r.inf_width_count << ',' << r.seed << '\n';
}

void write_bounds_csv(std::ostream& out, const SimReport& report, double mu) {
  out << "method,n,theta,mu,tau2,mean_lower,lower_se,mean_upper,upper_se,seed\n";
  for (const auto& r : report.rows)
    out << r.method << ',' << r.n << ',' << format_number(r.theta_minus_mu + mu) << ','
        << format_number(mu) << ',' << format_number(r.tau2) << ','
        << format_number(r.mean_lower) << ',' << format_number(r.lower_se) << ','
        << format_number(r.mean_upper) << ',' << format_number(r.upper_se) << ',' << r.seed
        << '\n';
}

}  // namespace fabconf
