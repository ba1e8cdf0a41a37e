// Command-line front end: fit / diagnose / tune / simulate over study-count
// CSV files. Exit status contract: 0 success, 1 usage or input error,
// 2 numerical failure (including non-convergence, which still writes its
// report so the run can be inspected).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtadpd/baseline.hpp"
#include "dtadpd/csv.hpp"
#include "dtadpd/diagnostics.hpp"
#include "dtadpd/dpd.hpp"
#include "dtadpd/error.hpp"
#include "dtadpd/inference.hpp"
#include "dtadpd/model.hpp"
#include "dtadpd/rng.hpp"
#include "dtadpd/simulation.hpp"
#include "dtadpd/stats.hpp"
#include "dtadpd/tuning.hpp"

using json = nlohmann::json;
using namespace dtadpd;

namespace {

constexpr int kSchemaVersion = 1;

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Human tables get 6 significant digits, machine files full precision.
std::string fmt6(double v) { return fmt(v, "%.6g"); }

struct CommonOpts {
  std::string input;
  std::string alpha_mode = "ges";
  std::string ci = "both";
  double level = 0.95;
  std::string grid = "0.01:0.50:0.01";
  std::string correction = "half";
  std::string format = "json";
  std::string out_dir = ".";
  int max_iter = 1000;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_input) {
  if (with_input)
    cmd->add_option("input", o.input, "study CSV with header study,tp,fn,fp,tn")->required();
  cmd->add_option("--alpha", o.alpha_mode, "ges, hyvarinen, or a fixed value in (0, 1)")
      ->envname("DTADPD_ALPHA")
      ->capture_default_str();
  cmd->add_option("--ci", o.ci, "interval type")
      ->check(CLI::IsMember({"wald", "hksj", "both"}))
      ->envname("DTADPD_CI")
      ->capture_default_str();
  cmd->add_option("--level", o.level, "confidence level")
      ->envname("DTADPD_LEVEL")
      ->capture_default_str();
  cmd->add_option("--grid", o.grid, "tuning grid lo:hi:step")
      ->envname("DTADPD_GRID")
      ->capture_default_str();
  cmd->add_option("--correction", o.correction, "zero-cell handling")
      ->check(CLI::IsMember({"half", "none"}))
      ->envname("DTADPD_CORRECTION")
      ->capture_default_str();
  cmd->add_option("--out", o.out_dir, "output directory for report files")
      ->envname("DTADPD_OUT")
      ->capture_default_str();
  cmd->add_option("--max-iter", o.max_iter, "iteration cap for the fitters")
      ->envname("DTADPD_MAX_ITER")
      ->capture_default_str();
}

GridSpec parse_grid(const std::string& text) {
  GridSpec g;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &g.lo, &g.hi, &g.step, &tail) != 3)
    throw DataError("grid must be lo:hi:step, got '" + text + "'");
  return g;
}

double parse_fixed_alpha(const std::string& text) {
  char* end = nullptr;
  const double a = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || !(a > 0.0) || !(a < 1.0))
    throw DataError("alpha must be 'ges', 'hyvarinen', or a number in (0, 1), got '" + text +
                    "'");
  return a;
}

void check_common(const CommonOpts& o) {
  if (!(o.level > 0.0) || !(o.level < 1.0))
    throw DataError("level must lie in (0, 1), got " + fmt6(o.level));
  if (o.max_iter < 1) throw DataError("max-iter must be positive");
  if (o.alpha_mode != "ges" && o.alpha_mode != "hyvarinen") parse_fixed_alpha(o.alpha_mode);
}

FitControl make_control(const CommonOpts& o) {
  FitControl control;
  control.max_iter = o.max_iter;
  return control;
}

std::vector<LogitObservation> load_observations(const CommonOpts& o) {
  const std::vector<StudyCounts> counts = read_studies_csv(o.input);
  const Correction corr = o.correction == "none" ? Correction::None : Correction::HalfOnZero;
  std::vector<LogitObservation> obs;
  obs.reserve(counts.size());
  for (const auto& c : counts) obs.push_back(logit_transform(c, corr));
  return obs;
}

std::filesystem::path prepare_out_dir(const CommonOpts& o) {
  std::filesystem::path dir(o.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string());
  return dir;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

// Interval pair on the probability scale for one logit-scale estimate.
json interval_block(double mu, double var, std::size_t n, const CommonOpts& o) {
  json block;
  block["estimate"] = inverse_logit(mu);
  if (o.ci != "hksj") {
    const auto ci = back_transform(wald_ci(mu, var, o.level));
    block["wald"] = {ci.lower, ci.upper};
  }
  if (o.ci != "wald") {
    const auto ci = back_transform(hksj_ci(mu, var, n, o.level));
    block["hksj"] = {ci.lower, ci.upper};
  }
  return block;
}

json sigma_block(const BetweenStudyCov& s) {
  return {{"sigma1sq", s.sigma1sq},
          {"sigma2sq", s.sigma2sq},
          {"sigma12", s.sigma12},
          {"rho", s.rho()}};
}

void print_fit_line(const char* name, double mu1, double mu2, double v1, double v2,
                    std::size_t n, const CommonOpts& o) {
  const char* estimand[2] = {"Se", "Sp"};
  const double mu[2] = {mu1, mu2};
  const double var[2] = {v1, v2};
  for (int j = 0; j < 2; ++j) {
    std::ostringstream line;
    line << (j == 0 ? name : "") << std::string(j == 0 ? 0 : std::strlen(name), ' ');
    line << "  " << estimand[j] << " " << fmt6(inverse_logit(mu[j]));
    if (o.ci != "hksj") {
      const auto ci = back_transform(wald_ci(mu[j], var[j], o.level));
      line << "  wald (" << fmt6(ci.lower) << ", " << fmt6(ci.upper) << ")";
    }
    if (o.ci != "wald") {
      const auto ci = back_transform(hksj_ci(mu[j], var[j], n, o.level));
      line << "  hksj (" << fmt6(ci.lower) << ", " << fmt6(ci.upper) << ")";
    }
    std::cout << line.str() << "\n";
  }
}

json config_block(const CommonOpts& o, const char* command) {
  json cfg;
  cfg["alpha_mode"] = o.alpha_mode == "ges" || o.alpha_mode == "hyvarinen" ? o.alpha_mode
                                                                           : std::string("fixed");
  if (cfg["alpha_mode"] == "fixed") cfg["alpha"] = parse_fixed_alpha(o.alpha_mode);
  cfg["ci"] = o.ci;
  cfg["level"] = o.level;
  cfg["correction"] = o.correction;
  if (o.alpha_mode == "hyvarinen") {
    const GridSpec g = parse_grid(o.grid);
    cfg["grid"] = {{"lo", g.lo}, {"hi", g.hi}, {"step", g.step}};
  }
  json report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = command;
  report["config"] = cfg;
  return report;
}

// Fits the robust model under the configured alpha rule. The tuning result is
// passed back so cmd_tune can reuse the machinery.
DpdFit run_dpd(const std::vector<LogitObservation>& data, const CommonOpts& o,
               TuningResult* tuning) {
  const FitControl control = make_control(o);
  if (o.alpha_mode == "hyvarinen") {
    TuningResult result = select_alpha(data, parse_grid(o.grid), control);
    DpdFit fit = result.fit;
    if (tuning) *tuning = std::move(result);
    return fit;
  }
  const double alpha = o.alpha_mode == "ges" ? alpha_ges() : parse_fixed_alpha(o.alpha_mode);
  return fit_dpd(data, alpha, control);
}

int cmd_fit(const CommonOpts& o) {
  check_common(o);
  const auto data = load_observations(o);
  const auto dir = prepare_out_dir(o);
  const std::size_t n = data.size();

  const BaselineFit baseline = fit_baseline(data, BaselineMethod::REML, make_control(o));
  const Eigen::Matrix2d bl_var = gls_covariance(data, baseline.sigma_hat);

  TuningResult tuning;
  const DpdFit fit = run_dpd(data, o, &tuning);
  const SandwichCovariance sandwich = sandwich_cov(data, fit);
  const Eigen::Matrix2d rob_var = sandwich.mu_block();

  json report = config_block(o, "fit");
  report["input"] = {{"file", o.input}, {"n_studies", n}};

  json bl;
  bl["method"] = "bnn_reml";
  bl["converged"] = baseline.converged;
  bl["boundary"] = baseline.boundary;
  bl["iterations"] = baseline.iterations;
  bl["log_lik"] = baseline.log_lik;
  bl["logit"] = {{"mu_se", baseline.mu_hat.mu1}, {"mu_sp", baseline.mu_hat.mu2}};
  bl["var_logit"] = {bl_var(0, 0), bl_var(1, 1)};
  bl["sigma"] = sigma_block(baseline.sigma_hat);
  bl["se"] = interval_block(baseline.mu_hat.mu1, bl_var(0, 0), n, o);
  bl["sp"] = interval_block(baseline.mu_hat.mu2, bl_var(1, 1), n, o);
  report["baseline"] = bl;

  json rb;
  rb["alpha"] = fit.alpha;
  rb["converged"] = fit.converged;
  rb["boundary"] = fit.boundary;
  rb["iterations"] = fit.iterations;
  rb["objective"] = fit.objective;
  rb["score_residual"] = fit.score_residual;
  rb["logit"] = {{"mu_se", fit.mu_hat.mu1}, {"mu_sp", fit.mu_hat.mu2}};
  rb["var_logit"] = {rob_var(0, 0), rob_var(1, 1)};
  rb["bread_condition"] = sandwich.bread_condition;
  rb["sigma"] = sigma_block(fit.sigma_hat);
  rb["se"] = interval_block(fit.mu_hat.mu1, rob_var(0, 0), n, o);
  rb["sp"] = interval_block(fit.mu_hat.mu2, rob_var(1, 1), n, o);
  if (o.alpha_mode == "hyvarinen") {
    rb["tuning"] = {{"alpha_selected", tuning.alpha_selected},
                    {"criterion", tuning.criterion},
                    {"boundary", tuning.boundary}};
  }
  report["dpd"] = rb;

  if (o.format == "json") {
    write_text_file(dir / "fit_report.json", report.dump(2) + "\n");
  } else {
    std::ostringstream csv;
    csv << "method,alpha,converged,mu_se,mu_sp,se,sp,var_logit_se,var_logit_sp,"
           "sigma1sq,sigma2sq,sigma12\n";
    auto row = [&](const char* name, double alpha, bool conv, const PooledMean& mu,
                   const Eigen::Matrix2d& var, const BetweenStudyCov& s) {
      csv << name << ',' << fmt(alpha) << ',' << (conv ? 1 : 0) << ',' << fmt(mu.mu1) << ','
          << fmt(mu.mu2) << ',' << fmt(inverse_logit(mu.mu1)) << ','
          << fmt(inverse_logit(mu.mu2)) << ',' << fmt(var(0, 0)) << ',' << fmt(var(1, 1)) << ','
          << fmt(s.sigma1sq) << ',' << fmt(s.sigma2sq) << ',' << fmt(s.sigma12) << '\n';
    };
    row("bnn_reml", 0.0, baseline.converged, baseline.mu_hat, bl_var, baseline.sigma_hat);
    row("dpd", fit.alpha, fit.converged, fit.mu_hat, rob_var, fit.sigma_hat);
    write_text_file(dir / "fit_report.csv", csv.str());
  }

  std::cout << "fitted " << n << " studies from " << o.input << "\n";
  print_fit_line("bnn_reml", baseline.mu_hat.mu1, baseline.mu_hat.mu2, bl_var(0, 0),
                 bl_var(1, 1), n, o);
  const std::string dpd_name = "dpd a=" + fmt6(fit.alpha);
  print_fit_line(dpd_name.c_str(), fit.mu_hat.mu1, fit.mu_hat.mu2, rob_var(0, 0), rob_var(1, 1),
                 n, o);
  if (!baseline.converged || !fit.converged) {
    std::cerr << "warning: a fit did not converge; report written anyway\n";
    return 2;
  }
  return 0;
}

int cmd_diagnose(const CommonOpts& o) {
  check_common(o);
  const auto data = load_observations(o);
  const auto dir = prepare_out_dir(o);
  const std::size_t n = data.size();

  const BaselineFit baseline = fit_baseline(data, BaselineMethod::REML, make_control(o));
  const DpdFit fit = run_dpd(data, o, nullptr);
  const auto table = diagnose(data, fit, baseline);

  json report = config_block(o, "diagnose");
  report["input"] = {{"file", o.input}, {"n_studies", n}};
  report["alpha"] = fit.alpha;
  report["converged"] = fit.converged && baseline.converged;
  json studies = json::array();
  for (const auto& s : table)
    studies.push_back({{"study", s.study_id},
                       {"weight", s.weight},
                       {"p_se", s.p_se},
                       {"p_sp", s.p_sp},
                       {"resid_se", s.resid_se},
                       {"resid_sp", s.resid_sp}});
  report["studies"] = studies;
  write_text_file(dir / "diagnostics.json", report.dump(2) + "\n");

  // Forest-plot data: per-study rates with delta-method intervals, one row
  // per study.
  const double z = norm_quantile(1.0 - 0.5 * (1.0 - o.level));
  std::ostringstream forest;
  forest << "study,se,sp,se_lo,se_hi,sp_lo,sp_hi\n";
  for (const auto& d : data) {
    const double s1 = std::sqrt(d.s1sq), s2 = std::sqrt(d.s2sq);
    forest << d.study_id << ',' << fmt(inverse_logit(d.y1)) << ',' << fmt(inverse_logit(d.y2))
           << ',' << fmt(inverse_logit(d.y1 - z * s1)) << ',' << fmt(inverse_logit(d.y1 + z * s1))
           << ',' << fmt(inverse_logit(d.y2 - z * s2)) << ',' << fmt(inverse_logit(d.y2 + z * s2))
           << '\n';
  }
  write_text_file(dir / "forest_plot.csv", forest.str());

  std::ostringstream weights;
  weights << "study,weight,p_se,p_sp,resid_se,resid_sp\n";
  for (const auto& s : table)
    weights << s.study_id << ',' << fmt(s.weight) << ',' << fmt(s.p_se) << ',' << fmt(s.p_sp)
            << ',' << fmt(s.resid_se) << ',' << fmt(s.resid_sp) << '\n';
  write_text_file(dir / "weight_plot.csv", weights.str());

  std::cout << "study  weight  p_se  p_sp  resid_se  resid_sp  (alpha " << fmt6(fit.alpha)
            << ")\n";
  for (const auto& s : table)
    std::cout << s.study_id << "  " << fmt6(s.weight) << "  " << fmt6(s.p_se) << "  "
              << fmt6(s.p_sp) << "  " << fmt6(s.resid_se) << "  " << fmt6(s.resid_sp) << "\n";
  return fit.converged && baseline.converged ? 0 : 2;
}

int cmd_tune(const CommonOpts& o) {
  check_common(o);
  const auto data = load_observations(o);
  const auto dir = prepare_out_dir(o);
  const std::size_t n = data.size();

  const TuningResult result = select_alpha(data, parse_grid(o.grid), make_control(o));
  const SandwichCovariance sandwich = sandwich_cov(data, result.fit);
  const Eigen::Matrix2d var = sandwich.mu_block();

  json report = config_block(o, "tune");
  report["input"] = {{"file", o.input}, {"n_studies", n}};
  report["alpha_selected"] = result.alpha_selected;
  report["criterion"] = result.criterion;
  report["boundary"] = result.boundary;
  json grid = json::array();
  for (const auto& p : result.grid) {
    json point = {{"alpha", p.alpha}, {"converged", p.converged}};
    if (p.converged) point["criterion"] = p.criterion;
    grid.push_back(point);
  }
  report["grid"] = grid;
  report["fit"] = {{"converged", result.fit.converged},
                   {"logit", {{"mu_se", result.fit.mu_hat.mu1}, {"mu_sp", result.fit.mu_hat.mu2}}},
                   {"sigma", sigma_block(result.fit.sigma_hat)},
                   {"se", interval_block(result.fit.mu_hat.mu1, var(0, 0), n, o)},
                   {"sp", interval_block(result.fit.mu_hat.mu2, var(1, 1), n, o)}};
  write_text_file(dir / "tuning.json", report.dump(2) + "\n");

  // Trace of the converged grid points only.
  std::ostringstream trace;
  trace << "alpha,criterion,mu_se,mu_sp,sigma1sq,sigma2sq,sigma12\n";
  for (const auto& p : result.grid) {
    if (!p.converged) continue;
    trace << fmt(p.alpha) << ',' << fmt(p.criterion) << ',' << fmt(p.mu.mu1) << ','
          << fmt(p.mu.mu2) << ',' << fmt(p.sigma.sigma1sq) << ',' << fmt(p.sigma.sigma2sq) << ','
          << fmt(p.sigma.sigma12) << '\n';
  }
  write_text_file(dir / "tuning_trace.csv", trace.str());

  std::cout << "selected alpha " << fmt6(result.alpha_selected) << " (criterion "
            << fmt6(result.criterion) << (result.boundary ? ", grid boundary" : "") << ")\n";
  print_fit_line("dpd", result.fit.mu_hat.mu1, result.fit.mu_hat.mu2, var(0, 0), var(1, 1), n, o);
  return result.fit.converged ? 0 : 2;
}

struct SimulateOpts {
  CommonOpts common;
  std::string scenario = "builtin";
  int reps = 1000;
  bool reps_given = false;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int jobs = 1;
  std::string methods = "bnn_ml,bnn_reml,dpd_ges,dpd_h";
  bool list_only = false;
};

ScenarioSpec spec_from_json(const json& j) {
  ScenarioSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "label")
      spec.label = value.get<std::string>();
    else if (key == "n_studies")
      spec.n_studies = value.get<int>();
    else if (key == "n_outlier_se")
      spec.n_outlier_se = value.get<int>();
    else if (key == "n_outlier_sp")
      spec.n_outlier_sp = value.get<int>();
    else if (key == "se_normal")
      spec.se_normal = value.get<double>();
    else if (key == "sp_normal")
      spec.sp_normal = value.get<double>();
    else if (key == "se_outlier")
      spec.se_outlier = value.get<double>();
    else if (key == "sp_outlier")
      spec.sp_outlier = value.get<double>();
    else if (key == "tau1sq")
      spec.tau1sq = value.get<double>();
    else if (key == "tau2sq")
      spec.tau2sq = value.get<double>();
    else if (key == "rho")
      spec.rho = value.get<double>();
    else if (key == "size_lo")
      spec.size_lo = value.get<long>();
    else if (key == "size_hi")
      spec.size_hi = value.get<long>();
    else if (key == "prev_lo")
      spec.prev_lo = value.get<double>();
    else if (key == "prev_hi")
      spec.prev_hi = value.get<double>();
    else if (key == "n_reps")
      spec.n_reps = value.get<int>();
    else if (key == "seed")
      spec.seed = value.get<std::uint64_t>();
    else
      throw DataError("scenario file: unknown field '" + key + "'");
  }
  return spec;
}

std::vector<ScenarioSpec> load_scenarios(const SimulateOpts& o) {
  if (o.scenario == "builtin") return scenario_catalog(o.reps, o.seed);

  std::ifstream in(o.scenario);
  if (!in) throw DataError("cannot open scenario file " + o.scenario);
  json parsed;
  try {
    parsed = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("scenario file " + o.scenario + ": " + e.what());
  }
  std::vector<ScenarioSpec> specs;
  try {
    if (parsed.is_array())
      for (const auto& item : parsed) specs.push_back(spec_from_json(item));
    else
      specs.push_back(spec_from_json(parsed));
  } catch (const json::exception& e) {
    throw DataError("scenario file " + o.scenario + ": " + e.what());
  }
  // Explicit flags beat whatever the file says.
  for (auto& spec : specs) {
    if (o.reps_given) spec.n_reps = o.reps;
    if (o.seed_given) spec.seed = o.seed;
  }
  if (specs.empty()) throw DataError("scenario file " + o.scenario + ": no scenarios");
  return specs;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "bnn_ml")
      out.push_back(Method::BnnMl);
    else if (item == "bnn_reml")
      out.push_back(Method::BnnReml);
    else if (item == "dpd_ges")
      out.push_back(Method::DpdGes);
    else if (item == "dpd_h")
      out.push_back(Method::DpdH);
    else
      throw DataError("unknown method '" + item + "'");
  }
  if (out.empty()) throw DataError("no methods requested");
  return out;
}

int cmd_simulate(const SimulateOpts& o) {
  check_common(o.common);
  if (o.jobs < 1) throw DataError("jobs must be positive");
  const std::vector<ScenarioSpec> specs = load_scenarios(o);
  const std::vector<Method> methods = parse_methods(o.methods);

  if (o.list_only) {
    for (const auto& spec : specs)
      std::cout << spec.label << " n_studies=" << spec.n_studies << " outliers=("
                << spec.n_outlier_se << "," << spec.n_outlier_sp << ") reps=" << spec.n_reps
                << "\n";
    return 0;
  }

  const auto dir = prepare_out_dir(o.common);
  RunOptions options;
  options.jobs = o.jobs;
  options.level = o.common.level;
  options.grid = parse_grid(o.common.grid);
  options.control = make_control(o.common);

  std::vector<MetricRow> rows;
  for (const auto& spec : specs) {
    const ScenarioResult result = run_scenario(spec, methods, options);
    rows.insert(rows.end(), result.metrics.begin(), result.metrics.end());
    std::cout << spec.label << ": " << spec.n_reps << " reps done\n";
  }

  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  write_text_file(dir / "metrics.csv", csv.str());

  json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["command"] = "simulate";
  manifest["rng"] = rng_algorithm();
  manifest["jobs"] = o.jobs;
  manifest["level"] = o.common.level;
  json names = json::array();
  for (Method m : methods) names.push_back(method_name(m));
  manifest["methods"] = names;
  json scen = json::array();
  for (const auto& spec : specs)
    scen.push_back({{"label", spec.label}, {"n_reps", spec.n_reps}, {"seed", spec.seed}});
  manifest["scenarios"] = scen;
  manifest["n_metric_rows"] = rows.size();
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "wrote " << (dir / "metrics.csv").string() << " (" << rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust bivariate meta-analysis of diagnostic accuracy"};
  app.require_subcommand(1);

  CommonOpts fit_opts;
  CLI::App* fit = app.add_subcommand("fit", "pooled estimates with robust and baseline fits");
  add_common(fit, fit_opts, true);
  fit->add_option("--format", fit_opts.format, "machine report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->envname("DTADPD_FORMAT")
      ->capture_default_str();

  CommonOpts diag_opts;
  CLI::App* diag = app.add_subcommand("diagnose", "per-study weights, rates, and residuals");
  add_common(diag, diag_opts, true);

  CommonOpts tune_opts;
  CLI::App* tune = app.add_subcommand("tune", "grid search for the power parameter");
  add_common(tune, tune_opts, true);

  SimulateOpts sim_opts;
  CLI::App* sim = app.add_subcommand("simulate", "scenario study with aggregated metrics");
  add_common(sim, sim_opts.common, false);
  sim->add_option("--scenario", sim_opts.scenario, "'builtin' or a scenario JSON file")
      ->envname("DTADPD_SCENARIO")
      ->capture_default_str();
  CLI::Option* reps = sim->add_option("--reps", sim_opts.reps, "replicates per scenario")
                          ->envname("DTADPD_REPS")
                          ->capture_default_str();
  CLI::Option* seed = sim->add_option("--seed", sim_opts.seed, "base seed")
                          ->envname("DTADPD_SEED")
                          ->capture_default_str();
  sim->add_option("--jobs", sim_opts.jobs, "worker threads (never changes the numbers)")
      ->envname("DTADPD_JOBS")
      ->capture_default_str();
  sim->add_option("--methods", sim_opts.methods, "comma list of estimators to run")
      ->envname("DTADPD_METHODS")
      ->capture_default_str();
  sim->add_flag("--list", sim_opts.list_only, "print the scenario set and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    sim_opts.reps_given = reps->count() > 0;
    sim_opts.seed_given = seed->count() > 0;
    if (fit->parsed()) return cmd_fit(fit_opts);
    if (diag->parsed()) return cmd_diagnose(diag_opts);
    if (tune->parsed()) return cmd_tune(tune_opts);
    if (sim->parsed()) return cmd_simulate(sim_opts);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
