#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "cli/csv.hpp"
#include "fabconf/baselines.hpp"
#include "fabconf/error.hpp"
#include "fabconf/fab_exact.hpp"
#include "fabconf/format.hpp"
#include "fabconf/simulate.hpp"
#include "fabconf/small_area.hpp"
#include "fabconf/synthetic.hpp"
#include "fabconf/working_model.hpp"

namespace fabconf::cli {

namespace {

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

/// Finite numbers bare with 17 significant digits, infinities as strings.
std::string json_number(double v) {
  const std::string s = format_number(v);
  return std::isfinite(v) ? s : json_string(s);
}

/// Opens `path` for writing, or returns stdout's stream for "" / "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot open '" + path + "' for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

// -- predict -----------------------------------------------------------------

struct PredictArgs {
  std::string input;
  std::string method = "fab";
  double alpha = 0.25;
  double mu = 0.0;
  std::optional<double> tau2;
  std::optional<double> precision;
  double a = 1.0;
  double b = 1.0;
  std::optional<double> sigma2;
};

int run_predict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
  const CsvTable csv = read_csv_file(args.input);
  const std::size_t col = csv.column("value");
  std::vector<double> sample(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) sample[r] = csv.number(r, col);
  if (sample.empty()) throw CsvError(0, "no values in '" + args.input + "'");

  if (args.tau2 && args.precision) throw CLI::ValidationError("--tau2 and --precision are exclusive");
  const auto model = [&] {
    if (args.precision) return WorkingModelParams::from_precision(args.mu, *args.precision, args.a, args.b);
    return WorkingModelParams(args.mu, args.tau2.value_or(1.0), args.a, args.b);
  };
  const std::string method = args.method;
  const double n = static_cast<double>(sample.size());
  const double mean = compensated_sum(sample) / n;

  PredictionInterval iv;
  double center = mean;
  if (method == "fab") {
    const auto params = model();
    iv = fab_interval(sample, params, args.alpha);
    center = posterior_mean_theta(sample, params);
  } else if (method == "dta") {
    iv = dta_interval(sample, args.alpha);
  } else if (method == "pivot-z" || method == "pivot-t") {
    const VarianceMode mode =
        method == "pivot-z" ? VarianceMode::known(args.sigma2.value_or(1.0)) : VarianceMode::estimated();
    iv = pivot_interval(sample, {mode, args.alpha});
  } else if (method == "eb") {
    const double tau2 = args.tau2.value_or(1.0);
    const VarianceMode mode =
        args.sigma2 ? VarianceMode::known(*args.sigma2) : VarianceMode::estimated();
    iv = eb_interval(sample, {args.mu, tau2, mode, args.alpha});
    center = 0.5 * (iv.lower + iv.upper);
  } else {
    throw CLI::ValidationError("unknown method '" + method + "'");
  }

  std::string warning;
  if (!iv.bounded()) {
    warning = "alpha*(n+1) < 1: the conformal region is the whole real line";
    err << "warning: " << warning << '\n';
  }
  out << "{\"method\":" << json_string(method) << ",\"n\":" << sample.size()
      << ",\"k\":" << iv.k << ",\"achieved_level\":" << json_number(iv.achieved_level)
      << ",\"lower\":" << json_number(iv.lower) << ",\"upper\":" << json_number(iv.upper)
      << ",\"theta_tilde\":" << json_number(center)
      << ",\"degenerate\":" << (iv.degenerate() ? "true" : "false");
  if (!warning.empty()) out << ",\"warning\":" << json_string(warning);
  out << "}\n";
  return kOk;
}

// -- small-area --------------------------------------------------------------

struct SmallAreaArgs {
  std::string areas;
  std::string samples;
  std::string alpha_mode = "exact";
  double alpha = 0.25;
  std::string method = "both";
  bool standardize = false;
  std::string output;
  unsigned threads = 0;
};

AreaTable load_areas(const std::string& areas_path, const std::string& samples_path,
                     std::ostream& err) {
  const CsvTable areas_csv = read_csv_file(areas_path);
  const std::size_t id_col = areas_csv.column("area_id");
  const std::size_t cx_col = areas_csv.column("cx");
  const std::size_t cy_col = areas_csv.column("cy");
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < areas_csv.header.size(); ++c)
    if (c != id_col && c != cx_col && c != cy_col) cov_cols.push_back(c);

  std::vector<Area> areas;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < areas_csv.rows.size(); ++r) {
    Area a;
    a.id = areas_csv.rows[r][id_col];
    if (!index.emplace(a.id, areas.size()).second)
      throw CsvError(areas_csv.row_lines[r], "duplicate area id '" + a.id + "'");
    a.centroid = {areas_csv.number(r, cx_col), areas_csv.number(r, cy_col)};
    a.covariates.push_back(1.0);
    for (std::size_t c : cov_cols) a.covariates.push_back(areas_csv.number(r, c));
    areas.push_back(std::move(a));
  }

  const CsvTable samples_csv = read_csv_file(samples_path);
  const std::size_t sid = samples_csv.column("area_id");
  const std::size_t val = samples_csv.column("value");
  for (std::size_t r = 0; r < samples_csv.rows.size(); ++r) {
    const auto it = index.find(samples_csv.rows[r][sid]);
    if (it == index.end())
      throw CsvError(samples_csv.row_lines[r], "unknown area id '" + samples_csv.rows[r][sid] + "'");
    areas[it->second].samples.push_back(samples_csv.number(r, val));
  }

  std::vector<Area> kept;
  for (auto& a : areas) {
    if (a.samples.empty())
      err << "warning: area " << a.id << " has no samples and is excluded\n";
    else
      kept.push_back(std::move(a));
  }
  return AreaTable(std::move(kept));
}

int run_small_area(const SmallAreaArgs& args, std::ostream& out, std::ostream& err) {
  AreaTable table = load_areas(args.areas, args.samples, err);
  if (args.standardize) table = table.standardized();
  if (args.method != "fab" && args.method != "dta" && args.method != "both")
    throw CLI::ValidationError("--method must be fab, dta or both");

  AlphaMode mode = AlphaMode::exact_coverage();
  if (args.alpha_mode == "fixed")
    mode = AlphaMode::fixed(args.alpha);
  else if (args.alpha_mode != "exact")
    throw CLI::ValidationError("--alpha-mode must be exact or fixed");

  const auto results = area_pipeline(table, mode, PipelineOptions{args.threads});
  for (std::size_t j = 0; j < table.size(); ++j)
    if (table.n(j) < 2)
      err << "warning: area " << table.area(j).id << " has a single observation; no interval reported\n";

  Sink sink(args.output, out);
  std::ostream& o = sink.get();
  o << "area_id,n,alpha_j,method,lower,upper,mu_j,tau2_j,fallback_flag\n";
  for (const auto& r : results) {
    const std::string mu = r.params ? format_number(r.params->mu) : "nan";
    const std::string tau2 = r.params ? format_number(r.params->tau2) : "nan";
    auto row = [&](const char* name, const PredictionInterval& iv) {
      o << r.id << ',' << r.n << ',' << format_number(r.alpha) << ',' << name << ','
        << format_number(iv.lower) << ',' << format_number(iv.upper) << ',' << mu << ','
        << tau2 << ',' << (r.fallback ? 1 : 0) << '\n';
    };
    if (args.method != "dta") row("FAB", r.fab);
    if (args.method != "fab") row("DTA", r.dta);
    if (r.fallback) err << "warning: area " << r.id << " fell back to DTA: " << r.message << '\n';
  }
  return kOk;
}

// -- gen-data ------------------------------------------------------------------

struct GenArgs {
  GeneratorSpec spec;
  std::string areas_out = "areas.csv";
  std::string samples_out = "samples.csv";
  std::string truth_out = "truth.json";
};

int run_gen_data(GenArgs args, std::ostream& out) {
  AreaTruth truth;
  const AreaTable table = generate_areas(args.spec, &truth);
  {
    std::ofstream f(args.areas_out);
    if (!f) throw std::runtime_error("cannot open '" + args.areas_out + "' for writing");
    f << "area_id,cx,cy";
    for (std::size_t c = 1; c < table.covariate_count(); ++c) f << ",cov" << c;
    f << '\n';
    for (const auto& a : table.areas()) {
      f << a.id << ',' << format_number(a.centroid.x) << ',' << format_number(a.centroid.y);
      for (std::size_t c = 1; c < a.covariates.size(); ++c) f << ',' << format_number(a.covariates[c]);
      f << '\n';
    }
  }
  {
    std::ofstream f(args.samples_out);
    if (!f) throw std::runtime_error("cannot open '" + args.samples_out + "' for writing");
    f << "area_id,value\n";
    for (const auto& a : table.areas())
      for (double y : a.samples) f << a.id << ',' << format_number(y) << '\n';
  }
  {
    std::ofstream f(args.truth_out);
    if (!f) throw std::runtime_error("cannot open '" + args.truth_out + "' for writing");
    const auto& s = args.spec;
    auto list = [&](auto begin, auto end) {
      std::string text = "[";
      for (auto it = begin; it != end; ++it) text += (it == begin ? "" : ",") + json_number(*it);
      return text + "]";
    };
    f << "{\"J\":" << s.areas << ",\"n_min\":" << s.n_min << ",\"n_max\":" << s.n_max
      << ",\"beta\":" << list(s.beta.begin(), s.beta.end()) << ",\"eta2\":" << json_number(s.eta2)
      << ",\"rho\":" << json_number(s.rho) << ",\"a\":" << json_number(s.a)
      << ",\"b\":" << json_number(s.b) << ",\"extent\":" << json_number(s.extent)
      << ",\"seed\":" << s.seed << ",\"area_ids\":[";
    for (std::size_t j = 0; j < table.size(); ++j)
      f << (j ? "," : "") << json_string(table.area(j).id);
    f << "],\"theta\":" << list(truth.theta.begin(), truth.theta.end())
      << ",\"sigma2\":" << list(truth.sigma2.begin(), truth.sigma2.end()) << "}\n";
  }
  out << "wrote " << table.size() << " areas to " << args.areas_out << ", " << args.samples_out
      << ", " << args.truth_out << '\n';
  return kOk;
}

// -- simulate ----------------------------------------------------------------

struct SimArgs {
  std::string experiment = "width";
  std::vector<std::string> methods{"FAB", "DTA"};
  std::vector<std::size_t> n{3};
  double alpha = 0.25;
  std::vector<double> theta{0.0};
  double mu = 0.0;
  std::vector<double> tau2{0.5};
  std::size_t reps = 25000;
  std::uint64_t seed = 1;
  std::string population = "normal";
  double sigma2 = 1.0;
  unsigned threads = 0;
  std::string output;
};

int run_simulate(const SimArgs& args, std::ostream& out) {
  SimConfig config;
  config.methods.clear();
  for (const auto& m : args.methods) config.methods.push_back(parse_method(m));
  config.n_list = args.n;
  config.alpha = args.alpha;
  config.theta_grid = args.theta;
  config.mu = args.mu;
  config.tau2_list = args.tau2;
  config.replications = args.reps;
  config.seed = args.seed;
  config.population = parse_population(args.population);
  config.sigma2 = args.sigma2;
  config.threads = args.threads;
  config.validate();

  Sink sink(args.output, out);
  if (args.experiment == "width" || args.experiment == "coverage") {
    write_report_csv(sink.get(), args.experiment == "width" ? expected_width(config)
                                                            : coverage_experiment(config));
  } else if (args.experiment == "bayes-risk") {
    write_report_csv(sink.get(), bayes_risk_ratio(args.n, args.tau2, args.alpha, args.reps,
                                                  args.seed, args.mu, args.threads));
  } else if (args.experiment == "bounds") {
    if (args.n.size() != 1 || args.tau2.size() != 1)
      throw CLI::ValidationError("bounds experiment takes a single --n and --tau2");
    write_bounds_csv(sink.get(),
                     bounds_profile(args.theta, args.n.front(), args.mu, args.tau2.front(),
                                    args.alpha, args.reps, args.seed, args.threads),
                     args.mu);
  } else {
    throw CLI::ValidationError("--experiment must be width, coverage, bayes-risk or bounds");
  }
  return kOk;
}


std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

/// Splices `simulate --config FILE` into explicit flags. Flags already present on the
/// command line win over the file.
std::vector<std::string> expand_simulate_config(const std::vector<std::string>& args) {
  if (args.size() < 2 || args[1] != "simulate") return args;
  std::vector<std::string> result;
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      result.push_back(args[i]);
    }
  }
  if (!path) return args;

  std::ifstream in(*path);
  if (!in) throw CsvError(0, "cannot open config file '" + *path + "'");
  auto given = [&](const std::string& flag) {
    return std::any_of(result.begin(), result.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find_first_of("#;")));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CsvError(line_no, *path + ": expected key=value");
    const std::string flag = "--" + trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (given(flag)) continue;
    result.push_back(flag);
    result.push_back(value);
  }
  return result;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact FAB conformal prediction intervals", "fabconf"};
  app.require_subcommand(1);

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "FAB (or baseline) interval for one sample");
  p->add_option("--input", predict.input, "CSV with a 'value' column")->required();
  p->add_option("--method", predict.method, "fab | dta | pivot-z | pivot-t | eb")->capture_default_str();
  p->add_option("--alpha", predict.alpha, "error rate in (0,1)")->capture_default_str();
  p->add_option("--mu", predict.mu, "prior mean")->capture_default_str();
  p->add_option("--tau2", predict.tau2, "prior variance ratio (default 1)");
  p->add_option("--precision", predict.precision, "prior precision 1/tau2; 0 is diffuse");
  p->add_option("--a", predict.a, "inverse-gamma shape (x2)")->capture_default_str();
  p->add_option("--b", predict.b, "inverse-gamma rate (x2)")->capture_default_str();
  p->add_option("--sigma2", predict.sigma2, "known variance for pivot-z / eb");

  SmallAreaArgs sa;
  auto* s = app.add_subcommand("small-area", "Leave-one-area-out FAB intervals per area");
  s->add_option("--areas", sa.areas, "areas.csv: area_id,cx,cy,cov1..covp")->required();
  s->add_option("--samples", sa.samples, "samples.csv: area_id,value")->required();
  s->add_option("--alpha-mode", sa.alpha_mode, "exact | fixed")->capture_default_str();
  s->add_option("--alpha", sa.alpha, "error rate for --alpha-mode fixed")->capture_default_str();
  s->add_option("--method", sa.method, "fab | dta | both")->capture_default_str();
  s->add_flag("--standardize", sa.standardize, "center and scale covariates");
  s->add_option("--output", sa.output, "output CSV (default stdout)");
  s->add_option("--threads", sa.threads, "worker threads (default FABCONF_THREADS or all cores)");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Synthetic areas from the spatial Fay-Herriot model");
  g->add_option("--J", gen.spec.areas, "number of areas")->capture_default_str();
  g->add_option("--n-min", gen.spec.n_min)->capture_default_str();
  g->add_option("--n-max", gen.spec.n_max)->capture_default_str();
  g->add_option("--beta", gen.spec.beta, "coefficients, intercept first")->delimiter(',');
  g->add_option("--eta2", gen.spec.eta2)->capture_default_str();
  g->add_option("--rho", gen.spec.rho)->capture_default_str();
  g->add_option("--a", gen.spec.a)->capture_default_str();
  g->add_option("--b", gen.spec.b)->capture_default_str();
  g->add_option("--extent", gen.spec.extent, "centroids uniform on [0, extent]^2")->capture_default_str();
  g->add_option("--seed", gen.spec.seed)->capture_default_str();
  g->add_option("--areas-out", gen.areas_out)->capture_default_str();
  g->add_option("--samples-out", gen.samples_out)->capture_default_str();
  g->add_option("--truth-out", gen.truth_out)->capture_default_str();

  SimArgs sim;
  auto* m = app.add_subcommand("simulate", "Monte Carlo width / coverage experiments");
  std::string config_path;
  m->add_option("--config", config_path, "key=value file with defaults for these flags");
  m->add_option("--experiment", sim.experiment, "width | coverage | bayes-risk | bounds")->capture_default_str();
  m->add_option("--methods", sim.methods, "FAB,DTA,PIVOT_Z,PIVOT_T,EB")->delimiter(',');
  m->add_option("--n", sim.n, "sample sizes")->delimiter(',');
  m->add_option("--alpha", sim.alpha)->capture_default_str();
  m->add_option("--theta", sim.theta, "population means")->delimiter(',');
  m->add_option("--mu", sim.mu)->capture_default_str();
  m->add_option("--tau2", sim.tau2)->delimiter(',');
  m->add_option("--reps", sim.reps)->capture_default_str();
  m->add_option("--seed", sim.seed)->capture_default_str();
  m->add_option("--population", sim.population, "normal | mixture")->capture_default_str();
  m->add_option("--sigma2", sim.sigma2, "known variance for PIVOT_Z / EB")->capture_default_str();
  m->add_option("--threads", sim.threads);
  m->add_option("--output", sim.output, "output CSV (default stdout)");

  std::vector<std::string> expanded;
  try {
    expanded = expand_simulate_config(args);
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  }
  std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream sink_out;
    app.exit(e, sink_out, err);
    return kUsage;
  }

  try {
    if (*p) return run_predict(predict, out, err);
    if (*s) return run_small_area(sa, out, err);
    if (*g) return run_gen_data(gen, out);
    if (*m) return run_simulate(sim, out);
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const RankDeficientError& e) {
    err << "error: " << e.what() << '\n';
    return kRankDeficient;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace fabconf::cli
