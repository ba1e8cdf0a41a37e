#include "dtadpd/diagnostics.hpp"

#include <cmath>

#include "dtadpd/error.hpp"

namespace dtadpd {

std::vector<Eigen::Matrix2d> contribution_matrices(std::span<const LogitObservation> data,
                                                   const DpdFit& fit) {
  if (data.empty()) throw DataError("contribution_matrices: no studies");
  std::vector<Eigen::Matrix2d> parts;
  parts.reserve(data.size());
  Eigen::Matrix2d total = Eigen::Matrix2d::Zero();
  for (const auto& d : data) {
    const double g = dpd_weight(d, fit.mu_hat, fit.sigma_hat, fit.alpha);
    parts.push_back(g * marginal_precision(d, fit.sigma_hat));
    total += parts.back();
  }
  const double det = total(0, 0) * total(1, 1) - total(0, 1) * total(1, 0);
  if (!(det > 0.0) || !(total(0, 0) > 0.0))
    throw NumericalError("contribution_matrices: singular weighted precision");
  const Eigen::Matrix2d tinv = total.inverse();
  for (auto& p : parts) p = (tinv * p).eval();
  return parts;
}

ContributionRates contribution_rates(std::span<const LogitObservation> data, const DpdFit& fit) {
  const std::vector<Eigen::Matrix2d> parts = contribution_matrices(data, fit);
  ContributionRates rates;
  rates.se.reserve(parts.size());
  rates.sp.reserve(parts.size());
  double sum_se = 0.0, sum_sp = 0.0;
  for (const auto& u : parts) {
    rates.se.push_back(std::abs(u(0, 0)));
    rates.sp.push_back(std::abs(u(1, 1)));
    sum_se += rates.se.back();
    sum_sp += rates.sp.back();
  }
  if (!(sum_se > 0.0) || !(sum_sp > 0.0))
    throw NumericalError("contribution_rates: all contributions vanish");
  for (auto& v : rates.se) v /= sum_se;
  for (auto& v : rates.sp) v /= sum_sp;
  return rates;
}

std::vector<double> dpd_weight_report(std::span<const LogitObservation> data, const DpdFit& fit) {
  std::vector<double> weights;
  weights.reserve(data.size());
  for (const auto& d : data) {
    const double g = dpd_weight(d, fit.mu_hat, fit.sigma_hat, fit.alpha);
    const double q_pow = std::pow(q_factor(d, fit.sigma_hat), fit.alpha);
    weights.push_back(g / q_pow);
  }
  return weights;
}

std::vector<std::array<double, 2>> standardized_residuals(std::span<const LogitObservation> data,
                                                          const PooledMean& mu,
                                                          const BetweenStudyCov& sigma) {
  std::vector<std::array<double, 2>> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    const double d1 = d.s1sq + sigma.sigma1sq;
    const double d2 = d.s2sq + sigma.sigma2sq;
    if (!(d1 > 0.0) || !(d2 > 0.0))
      throw NumericalError("standardized_residuals: non-positive marginal variance");
    out.push_back({(d.y1 - mu.mu1) / std::sqrt(d1), (d.y2 - mu.mu2) / std::sqrt(d2)});
  }
  return out;
}

std::vector<StudyDiagnostics> diagnose(std::span<const LogitObservation> data, const DpdFit& fit,
                                       const BaselineFit& baseline) {
  const std::vector<double> weights = dpd_weight_report(data, fit);
  const ContributionRates rates = contribution_rates(data, fit);
  const std::vector<std::array<double, 2>> resid =
      standardized_residuals(data, baseline.mu_hat, baseline.sigma_hat);

  std::vector<StudyDiagnostics> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    StudyDiagnostics s;
    s.study_id = data[i].study_id;
    s.weight = weights[i];
    s.p_se = rates.se[i];
    s.p_sp = rates.sp[i];
    s.resid_se = resid[i][0];
    s.resid_sp = resid[i][1];
    out.push_back(s);
  }
  return out;
}

}  // namespace dtadpd
