#include "dtadpd/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dtadpd/error.hpp"
#include "internal/optim.hpp"
#include "internal/sigma_param.hpp"

namespace dtadpd {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

using internal::cov_basis;

void require_studies(std::span<const LogitObservation> data, std::size_t min_n,
                     const char* what) {
  if (data.size() < min_n)
    throw DataError(std::string(what) + ": needs at least " + std::to_string(min_n) +
                    " studies, got " + std::to_string(data.size()));
}

// Method-of-moments start: DerSimonian-Laird variances per margin, correlation
// from the raw y residuals clamped to +-0.95.
BetweenStudyCov moments_start(std::span<const LogitObservation> data) {
  const std::size_t n = data.size();
  double tau[2] = {0.0, 0.0};
  double mean[2] = {0.0, 0.0};
  for (int j = 0; j < 2; ++j) {
    double sw = 0.0, sw2 = 0.0, sy = 0.0;
    for (const auto& d : data) {
      const double s2 = j == 0 ? d.s1sq : d.s2sq;
      const double y = j == 0 ? d.y1 : d.y2;
      const double w = 1.0 / s2;
      sw += w;
      sw2 += w * w;
      sy += w * y;
    }
    const double yw = sy / sw;
    double q = 0.0;
    for (const auto& d : data) {
      const double s2 = j == 0 ? d.s1sq : d.s2sq;
      const double y = j == 0 ? d.y1 : d.y2;
      q += (y - yw) * (y - yw) / s2;
    }
    const double denom = sw - sw2 / sw;
    tau[j] = denom > 0.0 ? std::max(0.0, (q - (double(n) - 1.0)) / denom) : 0.0;
    mean[j] = yw;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& d : data) {
    const double a = d.y1 - mean[0];
    const double b = d.y2 - mean[1];
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  double rho = 0.0;
  if (sxx > 0.0 && syy > 0.0) rho = std::clamp(sxy / std::sqrt(sxx * syy), -0.95, 0.95);

  BetweenStudyCov s;
  s.sigma1sq = std::max(tau[0], 1e-4);
  s.sigma2sq = std::max(tau[1], 1e-4);
  s.sigma12 = rho * std::sqrt(s.sigma1sq * s.sigma2sq);
  return s;
}

double rel_change(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

double max_param_change(const PooledMean& m1, const BetweenStudyCov& s1, const PooledMean& m0,
                        const BetweenStudyCov& s0) {
  double c = rel_change(m1.mu1, m0.mu1);
  c = std::max(c, rel_change(m1.mu2, m0.mu2));
  c = std::max(c, rel_change(s1.sigma1sq, s0.sigma1sq));
  c = std::max(c, rel_change(s1.sigma2sq, s0.sigma2sq));
  c = std::max(c, rel_change(s1.sigma12, s0.sigma12));
  return c;
}

}  // namespace

double log_likelihood(std::span<const LogitObservation> data, const PooledMean& mu,
                      const BetweenStudyCov& sigma) {
  double ll = 0.0;
  const Eigen::Vector2d m = mu.vec();
  for (const auto& d : data) {
    const Eigen::Matrix2d w = marginal_precision(d, sigma);
    const double logdet_v = -std::log(w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0));
    const Eigen::Vector2d r = d.y() - m;
    ll += -kLog2Pi - 0.5 * logdet_v - 0.5 * r.dot(w * r);
  }
  return ll;
}

PooledMean gls_mean(std::span<const LogitObservation> data, const BetweenStudyCov& sigma) {
  require_studies(data, 1, "gls_mean");
  Eigen::Matrix2d total = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (const auto& d : data) {
    const Eigen::Matrix2d w = marginal_precision(d, sigma);
    total += w;
    rhs += w * d.y();
  }
  const double det = total(0, 0) * total(1, 1) - total(0, 1) * total(1, 0);
  if (!(det > 0.0) || !(total(0, 0) > 0.0))
    throw NumericalError("gls_mean: singular total precision");
  return PooledMean::from(total.inverse() * rhs);
}

Eigen::Matrix2d gls_covariance(std::span<const LogitObservation> data,
                               const BetweenStudyCov& sigma) {
  Eigen::Matrix2d total = Eigen::Matrix2d::Zero();
  for (const auto& d : data) total += marginal_precision(d, sigma);
  const double det = total(0, 0) * total(1, 1) - total(0, 1) * total(1, 0);
  if (!(det > 0.0) || !(total(0, 0) > 0.0))
    throw NumericalError("gls_covariance: singular total precision");
  return total.inverse();
}

double restricted_log_likelihood(std::span<const LogitObservation> data,
                                 const BetweenStudyCov& sigma) {
  require_studies(data, 2, "restricted_log_likelihood");
  const PooledMean mu = gls_mean(data, sigma);
  Eigen::Matrix2d total = Eigen::Matrix2d::Zero();
  for (const auto& d : data) total += marginal_precision(d, sigma);
  const double logdet = std::log(total(0, 0) * total(1, 1) - total(0, 1) * total(1, 0));
  return log_likelihood(data, mu, sigma) - 0.5 * logdet;
}

Eigen::Matrix<double, 5, 1> log_likelihood_gradient(std::span<const LogitObservation> data,
                                                    const PooledMean& mu,
                                                    const BetweenStudyCov& sigma) {
  Eigen::Matrix<double, 5, 1> grad = Eigen::Matrix<double, 5, 1>::Zero();
  const Eigen::Vector2d m = mu.vec();
  for (const auto& d : data) {
    const Eigen::Matrix2d w = marginal_precision(d, sigma);
    const Eigen::Vector2d r = d.y() - m;
    const Eigen::Vector2d u = w * r;
    grad.head<2>() += u;
    const Eigen::Matrix2d core = u * u.transpose() - w;
    for (int k = 0; k < 3; ++k) grad[2 + k] += 0.5 * (cov_basis(k) * core).trace();
  }
  return grad;
}

Eigen::Vector3d restricted_log_likelihood_gradient(std::span<const LogitObservation> data,
                                                   const BetweenStudyCov& sigma) {
  // Envelope theorem: the profile-likelihood derivative equals the partial
  // derivative at the GLS mean; the REML adjustment adds
  // 0.5 tr((sum W)^-1 sum W Delta W).
  const PooledMean mu = gls_mean(data, sigma);
  const Eigen::Matrix<double, 5, 1> g5 = log_likelihood_gradient(data, mu, sigma);

  Eigen::Matrix2d total = Eigen::Matrix2d::Zero();
  std::vector<Eigen::Matrix2d> ws;
  ws.reserve(data.size());
  for (const auto& d : data) {
    ws.push_back(marginal_precision(d, sigma));
    total += ws.back();
  }
  const Eigen::Matrix2d tinv = total.inverse();

  Eigen::Vector3d grad;
  for (int k = 0; k < 3; ++k) {
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    for (const auto& w : ws) acc += w * cov_basis(k) * w;
    grad[k] = g5[2 + k] + 0.5 * (tinv * acc).trace();
  }
  return grad;
}

BaselineFit fit_baseline(std::span<const LogitObservation> data, BaselineMethod method,
                         const FitControl& control) {
  require_studies(data, 2, "fit_baseline");

  const Eigen::VectorXd lo =
      (Eigen::VectorXd(3) << internal::kTMin, internal::kTMin, -internal::kZMax).finished();
  const Eigen::VectorXd hi =
      (Eigen::VectorXd(3) << internal::kTMax, internal::kTMax, internal::kZMax).finished();
  const std::vector<bool> mask = {true, true, true};

  // Negated objective on the reparameterized covariance at a fixed mean
  // (ML) or with the mean profiled out (REML).
  PooledMean mu;
  auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) -> double {
    const internal::SigmaParam q{v[0], v[1], v[2]};
    const BetweenStudyCov s = internal::from_param(q);
    try {
      double gv[3];
      double val;
      if (method == BaselineMethod::ML) {
        val = log_likelihood(data, mu, s);
        if (grad) {
          const Eigen::Matrix<double, 5, 1> g5 = log_likelihood_gradient(data, mu, s);
          gv[0] = g5[2];
          gv[1] = g5[3];
          gv[2] = g5[4];
        }
      } else {
        val = restricted_log_likelihood(data, s);
        if (grad) {
          const Eigen::Vector3d g3 = restricted_log_likelihood_gradient(data, s);
          gv[0] = g3[0];
          gv[1] = g3[1];
          gv[2] = g3[2];
        }
      }
      if (grad) {
        double gt[3];
        internal::chain_gradient(q, gv, gt);
        (*grad)[0] = -gt[0];
        (*grad)[1] = -gt[1];
        (*grad)[2] = -gt[2];
      }
      return -val;
    } catch (const NumericalError&) {
      if (grad) grad->setZero();
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  // Equal-weight start for the mean, moment start for the covariance.
  Eigen::Vector2d ybar = Eigen::Vector2d::Zero();
  for (const auto& d : data) ybar += d.y();
  mu = PooledMean::from(ybar / double(data.size()));
  BetweenStudyCov sigma = moments_start(data);

  BaselineFit fit;
  fit.method = method;
  double obj_prev = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int outer = 0;

  internal::BoxBfgsOptions inner_opt;
  inner_opt.max_iter = 60;
  inner_opt.grad_tol = 1e-11;

  for (outer = 1; outer <= control.max_iter; ++outer) {
    const PooledMean mu_prev = method == BaselineMethod::ML ? gls_mean(data, sigma) : mu;
    const BetweenStudyCov sigma_prev = sigma;
    if (method == BaselineMethod::ML) mu = mu_prev;

    const internal::SigmaParam p0 = internal::to_param(sigma);
    Eigen::VectorXd x(3);
    x << p0.t1, p0.t2, p0.z;
    const internal::BoxBfgsResult step = internal::minimize_box_bfgs(objective, x, lo, hi, mask,
                                                                     inner_opt);
    sigma = internal::from_param({step.x[0], step.x[1], step.x[2]});
    mu = gls_mean(data, sigma);

    const double obj = method == BaselineMethod::ML ? log_likelihood(data, mu, sigma)
                                                    : restricted_log_likelihood(data, sigma);
    if (control.objective_trace) control.objective_trace->push_back(obj);

    const double change = max_param_change(mu, sigma, mu_prev, sigma_prev);
    const double obj_change = std::abs(obj - obj_prev);
    obj_prev = obj;
    if (change < control.param_tol || obj_change < control.obj_tol * (1.0 + std::abs(obj))) {
      converged = true;
      break;
    }
  }

  fit.mu_hat = mu;
  fit.sigma_hat = sigma;
  fit.log_lik = obj_prev;
  fit.converged = converged && std::isfinite(fit.log_lik);
  fit.boundary = internal::at_bounds(internal::to_param(sigma));
  fit.iterations = std::min(outer, control.max_iter);
  return fit;
}

}  // namespace dtadpd
