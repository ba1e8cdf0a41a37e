#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dtadpd/baseline.hpp"
#include "dtadpd/dpd.hpp"
#include "dtadpd/model.hpp"

namespace dtadpd {

// Matrix share of study i in the robust pooled mean,
//   U_i = (sum_j g_j W_j)^-1 g_i W_i,
// so that sum_i U_i is the identity.
std::vector<Eigen::Matrix2d> contribution_matrices(std::span<const LogitObservation> data,
                                                   const DpdFit& fit);

// Scalar contribution rates per margin: |diagonal of U_i| normalized to sum
// to one across studies.
struct ContributionRates {
  std::vector<double> se;
  std::vector<double> sp;
};
ContributionRates contribution_rates(std::span<const LogitObservation> data, const DpdFit& fit);

// Downweighting factor exp(-alpha q_i / 2) in (0, 1]; equals one exactly when
// a study sits on the pooled mean.
std::vector<double> dpd_weight_report(std::span<const LogitObservation> data, const DpdFit& fit);

// Marginal standardized residuals (y_ij - mu_j) / sqrt(s_ij^2 + sigma_jj).
std::vector<std::array<double, 2>> standardized_residuals(std::span<const LogitObservation> data,
                                                          const PooledMean& mu,
                                                          const BetweenStudyCov& sigma);

// Per-study summary line combining the robust weights and rates with
// residuals under the non-robust baseline fit.
struct StudyDiagnostics {
  std::string study_id;
  double weight = 0.0;
  double p_se = 0.0;
  double p_sp = 0.0;
  double resid_se = 0.0;
  double resid_sp = 0.0;
};
std::vector<StudyDiagnostics> diagnose(std::span<const LogitObservation> data, const DpdFit& fit,
                                       const BaselineFit& baseline);

}  // namespace dtadpd
