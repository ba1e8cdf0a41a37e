#include "dtadpd/inference.hpp"

#include <cmath>
#include <string>

#include "dtadpd/error.hpp"
#include "dtadpd/stats.hpp"

namespace dtadpd {

SandwichCovariance sandwich_cov(std::span<const LogitObservation> data, const DpdFit& fit) {
  if (data.size() < 2) throw DataError("sandwich_cov: needs at least 2 studies");

  Eigen::Matrix<double, 5, 5> a = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 5> b = Eigen::Matrix<double, 5, 5>::Zero();
  for (const auto& d : data) {
    const Eigen::Matrix<double, 5, 1> psi = dpd_score(d, fit.mu_hat, fit.sigma_hat, fit.alpha);
    a += dpd_score_jacobian(d, fit.mu_hat, fit.sigma_hat, fit.alpha);
    b += psi * psi.transpose();
  }

  const Eigen::JacobiSVD<Eigen::Matrix<double, 5, 5>> svd(
      a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(4);
  if (!(smin > smax * 1e-14) || !(smax > 0.0))
    throw NumericalError("sandwich_cov: score derivative matrix is numerically singular");

  const Eigen::Matrix<double, 5, 5> a_inv = svd.solve(Eigen::Matrix<double, 5, 5>::Identity());
  SandwichCovariance out;
  out.full = a_inv * b * a_inv.transpose();
  out.bread_condition = smax / smin;
  return out;
}

ConfidenceInterval wald_ci(double estimate, double variance, double level) {
  if (!(level > 0.0) || !(level < 1.0))
    throw DataError("wald_ci: level must lie in (0, 1), got " + std::to_string(level));
  if (!(variance >= 0.0)) throw NumericalError("wald_ci: negative variance");
  const double z = norm_quantile(1.0 - 0.5 * (1.0 - level));
  const double half = z * std::sqrt(variance);
  return {estimate - half, estimate + half, level, CiKind::Wald, CiScale::Logit};
}

ConfidenceInterval hksj_ci(double estimate, double variance, std::size_t n_studies, double level) {
  if (!(level > 0.0) || !(level < 1.0))
    throw DataError("hksj_ci: level must lie in (0, 1), got " + std::to_string(level));
  if (n_studies < 2) throw DataError("hksj_ci: needs at least 2 studies");
  if (!(variance >= 0.0)) throw NumericalError("hksj_ci: negative variance");
  const double t = t_quantile(1.0 - 0.5 * (1.0 - level), 2.0 * double(n_studies) - 2.0);
  const double half = t * std::sqrt(variance);
  return {estimate - half, estimate + half, level, CiKind::Hksj, CiScale::Logit};
}

ConfidenceInterval back_transform(const ConfidenceInterval& ci) {
  ConfidenceInterval out = ci;
  out.lower = inverse_logit(ci.lower);
  out.upper = inverse_logit(ci.upper);
  out.scale = CiScale::Probability;
  return out;
}

}  // namespace dtadpd
