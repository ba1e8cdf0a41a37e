#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dtadpd/model.hpp"
#include "dtadpd/tuning.hpp"

namespace dtadpd {

enum class Method { BnnMl, BnnReml, DpdGes, DpdH };
const char* method_name(Method m);

// One synthetic-data configuration. Outlier studies replace the pooled
// sensitivity (or specificity) of the normal class while everything else is
// shared; the first n_outlier_se studies come from the low-sensitivity class
// and the following n_outlier_sp from the low-specificity class.
struct ScenarioSpec {
  std::string label = "A-N16";
  int n_studies = 16;
  int n_outlier_se = 0;
  int n_outlier_sp = 0;
  double se_normal = 0.61;
  double sp_normal = 0.82;
  double se_outlier = 0.27;
  double sp_outlier = 0.39;
  double tau1sq = 0.15;
  double tau2sq = 0.10;
  double rho = -0.7;
  long size_lo = 53;
  long size_hi = 351;
  double prev_lo = 0.13;
  double prev_hi = 0.53;
  int n_reps = 1000;
  std::uint64_t seed = 1;
};

// The five contamination patterns crossed with 8, 12, and 16 studies.
std::vector<ScenarioSpec> scenario_catalog(int n_reps = 1000, std::uint64_t seed = 1);

// Draws replicate `rep` of a scenario. Deterministic in (spec.seed, rep).
std::vector<StudyCounts> generate_dataset(const ScenarioSpec& spec, std::uint64_t rep);

struct ReplicateOutcome {
  bool converged = false;
  double alpha = 0.0;     // tuning constant used (0 for the baseline methods)
  double mu[2] = {0, 0};  // logit-scale estimates
  double var[2] = {0, 0}; // variance estimate for each mu component
  double wald_lo[2] = {0, 0}, wald_hi[2] = {0, 0};
  double hksj_lo[2] = {0, 0}, hksj_hi[2] = {0, 0};
};

struct MetricRow {
  std::string scenario;
  std::string method;
  std::string estimand;  // "se" or "sp"
  std::string measure;
  double value = 0.0;
};

struct RunOptions {
  int jobs = 1;
  bool keep_replicates = false;
  double level = 0.95;  // confidence level for the coverage metrics
  GridSpec grid;        // used by the score-tuned method
  FitControl control;
};

struct ScenarioResult {
  ScenarioSpec spec;
  std::vector<MetricRow> metrics;
  // Filled when RunOptions::keep_replicates is set: [method][rep].
  std::vector<std::vector<ReplicateOutcome>> replicates;
};

// Runs every replicate for every requested method and aggregates in replicate
// order; the thread count changes wall time only, never the numbers.
ScenarioResult run_scenario(const ScenarioSpec& spec, std::span<const Method> methods,
                            const RunOptions& options = {});

// Tidy CSV (scenario,method,estimand,measure,value) with full-precision
// values.
void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows);

}  // namespace dtadpd
