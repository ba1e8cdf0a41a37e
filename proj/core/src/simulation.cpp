#include "dtadpd/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

#include "dtadpd/baseline.hpp"
#include "dtadpd/dpd.hpp"
#include "dtadpd/error.hpp"
#include "dtadpd/inference.hpp"
#include "dtadpd/rng.hpp"

namespace dtadpd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_spec(const ScenarioSpec& spec) {
  if (spec.n_studies < 2) throw DataError("scenario: needs at least 2 studies per replicate");
  if (spec.n_outlier_se < 0 || spec.n_outlier_sp < 0 ||
      spec.n_outlier_se + spec.n_outlier_sp > spec.n_studies)
    throw DataError("scenario: outlier counts must be non-negative and fit in n_studies");
  for (double p : {spec.se_normal, spec.sp_normal, spec.se_outlier, spec.sp_outlier,
                   spec.prev_lo, spec.prev_hi})
    if (!(p > 0.0) || !(p < 1.0)) throw DataError("scenario: probabilities must lie in (0, 1)");
  if (spec.prev_lo > spec.prev_hi) throw DataError("scenario: prevalence range is inverted");
  if (spec.size_lo < 2 || spec.size_lo > spec.size_hi)
    throw DataError("scenario: study size range must satisfy 2 <= lo <= hi");
  if (!(spec.tau1sq >= 0.0) || !(spec.tau2sq >= 0.0) || !(std::abs(spec.rho) < 1.0))
    throw DataError("scenario: between-study parameters out of range");
  if (spec.n_reps < 1) throw DataError("scenario: n_reps must be positive");
}

ReplicateOutcome fit_one(std::span<const LogitObservation> data, Method method,
                         const RunOptions& options) {
  ReplicateOutcome out;
  try {
    PooledMean mu;
    double var[2] = {0.0, 0.0};
    double alpha = 0.0;
    bool converged = false;

    switch (method) {
      case Method::BnnMl:
      case Method::BnnReml: {
        const BaselineFit fit = fit_baseline(
            data, method == Method::BnnMl ? BaselineMethod::ML : BaselineMethod::REML,
            options.control);
        converged = fit.converged;
        mu = fit.mu_hat;
        const Eigen::Matrix2d v = gls_covariance(data, fit.sigma_hat);
        var[0] = v(0, 0);
        var[1] = v(1, 1);
        break;
      }
      case Method::DpdGes: {
        const DpdFit fit = fit_dpd(data, alpha_ges(), options.control);
        converged = fit.converged;
        mu = fit.mu_hat;
        alpha = fit.alpha;
        const Eigen::Matrix2d v = sandwich_cov(data, fit).mu_block();
        var[0] = v(0, 0);
        var[1] = v(1, 1);
        break;
      }
      case Method::DpdH: {
        const TuningResult tuned = select_alpha(data, options.grid, options.control);
        converged = tuned.fit.converged;
        mu = tuned.fit.mu_hat;
        alpha = tuned.alpha_selected;
        const Eigen::Matrix2d v = sandwich_cov(data, tuned.fit).mu_block();
        var[0] = v(0, 0);
        var[1] = v(1, 1);
        break;
      }
    }

    out.converged = converged;
    out.alpha = alpha;
    out.mu[0] = mu.mu1;
    out.mu[1] = mu.mu2;
    out.var[0] = var[0];
    out.var[1] = var[1];
    for (int j = 0; j < 2; ++j) {
      const ConfidenceInterval w = wald_ci(out.mu[j], var[j], options.level);
      const ConfidenceInterval h = hksj_ci(out.mu[j], var[j], data.size(), options.level);
      out.wald_lo[j] = w.lower;
      out.wald_hi[j] = w.upper;
      out.hksj_lo[j] = h.lower;
      out.hksj_hi[j] = h.upper;
    }
  } catch (const NumericalError&) {
    out = ReplicateOutcome{};
  }
  return out;
}

void append_metrics(std::vector<MetricRow>& rows, const ScenarioSpec& spec, Method method,
                    std::span<const ReplicateOutcome> reps) {
  const double truth_p[2] = {spec.se_normal, spec.sp_normal};
  const double truth_mu[2] = {logit(spec.se_normal), logit(spec.sp_normal)};
  const char* estimand[2] = {"se", "sp"};

  for (int j = 0; j < 2; ++j) {
    long n = 0;
    double sum_p = 0, sum_p2 = 0, sum_sq_err = 0;
    double sum_mu = 0, sum_mu2 = 0, sum_var = 0, sum_alpha = 0;
    long cover_w = 0, cover_h = 0;
    double width_w = 0, width_h = 0;
    for (const auto& r : reps) {
      if (!r.converged) continue;
      ++n;
      const double p = inverse_logit(r.mu[j]);
      sum_p += p;
      sum_p2 += p * p;
      sum_sq_err += (p - truth_p[j]) * (p - truth_p[j]);
      sum_mu += r.mu[j];
      sum_mu2 += r.mu[j] * r.mu[j];
      sum_var += r.var[j];
      sum_alpha += r.alpha;
      cover_w += truth_mu[j] >= r.wald_lo[j] && truth_mu[j] <= r.wald_hi[j] ? 1 : 0;
      cover_h += truth_mu[j] >= r.hksj_lo[j] && truth_mu[j] <= r.hksj_hi[j] ? 1 : 0;
      width_w += inverse_logit(r.wald_hi[j]) - inverse_logit(r.wald_lo[j]);
      width_h += inverse_logit(r.hksj_hi[j]) - inverse_logit(r.hksj_lo[j]);
    }

    const double dn = double(n);
    const bool any = n > 0;
    const bool two = n > 1;
    const double mean_p = any ? sum_p / dn : kNaN;
    const double mean_mu = any ? sum_mu / dn : kNaN;

    auto push = [&](const char* measure, double value) {
      rows.push_back({spec.label, method_name(method), estimand[j], measure, value});
    };
    push("abs_bias", any ? std::abs(mean_p - truth_p[j]) : kNaN);
    push("rmse", any ? std::sqrt(sum_sq_err / dn) : kNaN);
    push("variance", two ? (sum_p2 - dn * mean_p * mean_p) / (dn - 1.0) : kNaN);
    push("var_logit", two ? (sum_mu2 - dn * mean_mu * mean_mu) / (dn - 1.0) : kNaN);
    push("mean_model_var", any ? sum_var / dn : kNaN);
    push("coverage_wald", any ? double(cover_w) / dn : kNaN);
    push("coverage_hksj", any ? double(cover_h) / dn : kNaN);
    push("width_wald", any ? width_w / dn : kNaN);
    push("width_hksj", any ? width_h / dn : kNaN);
    push("convergence_rate", double(n) / double(reps.size()));
    push("n_converged", double(n));
    push("mean_alpha", any ? sum_alpha / dn : kNaN);
  }
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::BnnMl: return "bnn_ml";
    case Method::BnnReml: return "bnn_reml";
    case Method::DpdGes: return "dpd_ges";
    case Method::DpdH: return "dpd_h";
  }
  return "unknown";
}

std::vector<ScenarioSpec> scenario_catalog(int n_reps, std::uint64_t seed) {
  struct Pattern {
    const char* tag;
    int k_se;
    int k_sp;
  };
  static const Pattern patterns[] = {{"A", 0, 0}, {"B", 2, 0}, {"C", 0, 2}, {"D", 2, 1},
                                     {"E", 1, 2}};
  std::vector<ScenarioSpec> out;
  for (const auto& p : patterns) {
    for (int n : {8, 12, 16}) {
      ScenarioSpec spec;
      spec.label = std::string(p.tag) + "-N" + std::to_string(n);
      spec.n_studies = n;
      spec.n_outlier_se = p.k_se;
      spec.n_outlier_sp = p.k_sp;
      spec.n_reps = n_reps;
      spec.seed = seed;
      out.push_back(spec);
    }
  }
  return out;
}

std::vector<StudyCounts> generate_dataset(const ScenarioSpec& spec, std::uint64_t rep) {
  check_spec(spec);
  std::mt19937_64 gen = make_stream(spec.seed, rep);

  const double l11 = std::sqrt(spec.tau1sq);
  const double l21 = spec.rho * std::sqrt(spec.tau2sq);
  const double l22 = std::sqrt(spec.tau2sq * (1.0 - spec.rho * spec.rho));

  std::vector<StudyCounts> out;
  out.reserve(std::size_t(spec.n_studies));
  for (int i = 0; i < spec.n_studies; ++i) {
    const long n_total = uniform_int(gen, spec.size_lo, spec.size_hi);
    const double prev = uniform_range(gen, spec.prev_lo, spec.prev_hi);
    const long n_dis = std::llround(prev * double(n_total));
    const std::array<double, 2> z = normal_pair(gen);

    const bool low_se = i < spec.n_outlier_se;
    const bool low_sp = !low_se && i < spec.n_outlier_se + spec.n_outlier_sp;
    const double th1 = logit(low_se ? spec.se_outlier : spec.se_normal) + l11 * z[0];
    const double th2 =
        logit(low_sp ? spec.sp_outlier : spec.sp_normal) + l21 * z[0] + l22 * z[1];

    const long tp = binomial(gen, n_dis, inverse_logit(th1));
    const long tn = binomial(gen, n_total - n_dis, inverse_logit(th2));
    out.push_back({std::to_string(i + 1), tp, n_dis - tp, (n_total - n_dis) - tn, tn});
  }
  return out;
}

ScenarioResult run_scenario(const ScenarioSpec& spec, std::span<const Method> methods,
                            const RunOptions& options) {
  check_spec(spec);
  if (methods.empty()) throw DataError("run_scenario: no methods requested");

  const std::size_t n_reps = std::size_t(spec.n_reps);
  std::vector<std::vector<ReplicateOutcome>> slots(methods.size(),
                                                   std::vector<ReplicateOutcome>(n_reps));

  std::atomic<std::uint64_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::uint64_t rep = next.fetch_add(1);
      if (rep >= n_reps) break;
      const std::vector<StudyCounts> counts = generate_dataset(spec, rep);
      std::vector<LogitObservation> obs;
      obs.reserve(counts.size());
      for (const auto& c : counts) obs.push_back(logit_transform(c));
      for (std::size_t m = 0; m < methods.size(); ++m)
        slots[m][rep] = fit_one(obs, methods[m], options);
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(jobs) - 1);
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  ScenarioResult result;
  result.spec = spec;
  for (std::size_t m = 0; m < methods.size(); ++m)
    append_metrics(result.metrics, spec, methods[m], slots[m]);
  if (options.keep_replicates) result.replicates = std::move(slots);
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows) {
  out << "scenario,method,estimand,measure,value\n";
  char buf[40];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.scenario << ',' << r.method << ',' << r.estimand << ',' << r.measure << ',' << buf
        << '\n';
  }
}

}  // namespace dtadpd
