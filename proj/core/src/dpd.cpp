#include "dtadpd/dpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dtadpd/error.hpp"
#include "internal/optim.hpp"
#include "internal/sigma_param.hpp"

namespace dtadpd {

namespace {

using internal::cov_basis;

constexpr double kTwoPi = 6.283185307179586;

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw DataError("dpd: alpha must lie in (0, 1], got " + std::to_string(alpha));
}

struct StudyTerms {
  Eigen::Matrix2d w;   // (S_i + Sigma)^-1
  Eigen::Vector2d u;   // W (y - mu)
  double q = 0.0;      // (y - mu)' W (y - mu)
  double q_pow = 0.0;  // Q^alpha
  double g = 0.0;      // Q^alpha exp(-alpha q / 2)
};

StudyTerms study_terms(const LogitObservation& obs, const Eigen::Vector2d& mu,
                       const BetweenStudyCov& sigma, double alpha) {
  StudyTerms t;
  t.w = marginal_precision(obs, sigma);
  const Eigen::Vector2d r = obs.y() - mu;
  t.u = t.w * r;
  t.q = r.dot(t.u);
  const double det_w = t.w(0, 0) * t.w(1, 1) - t.w(0, 1) * t.w(1, 0);
  const double log_q = 0.5 * std::log(det_w) - std::log(kTwoPi);
  t.q_pow = std::exp(alpha * log_q);
  t.g = std::exp(alpha * (log_q - 0.5 * t.q));
  return t;
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

double q_factor(const LogitObservation& obs, const BetweenStudyCov& sigma) {
  const Eigen::Matrix2d w = marginal_precision(obs, sigma);
  const double det_w = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
  return std::sqrt(det_w) / kTwoPi;
}

double dpd_weight(const LogitObservation& obs, const PooledMean& mu, const BetweenStudyCov& sigma,
                  double alpha) {
  check_alpha(alpha);
  return study_terms(obs, mu.vec(), sigma, alpha).g;
}

double dpd_objective(std::span<const LogitObservation> data, const PooledMean& mu,
                     const BetweenStudyCov& sigma, double alpha) {
  check_alpha(alpha);
  const double inv1a2 = 1.0 / ((1.0 + alpha) * (1.0 + alpha));
  const Eigen::Vector2d m = mu.vec();
  double acc = 0.0;
  for (const auto& d : data) {
    const StudyTerms t = study_terms(d, m, sigma, alpha);
    acc += t.g / alpha - t.q_pow * inv1a2;
  }
  return acc;
}

Eigen::Vector2d dpd_mu_gradient(std::span<const LogitObservation> data, const PooledMean& mu,
                                const BetweenStudyCov& sigma, double alpha) {
  check_alpha(alpha);
  const Eigen::Vector2d m = mu.vec();
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (const auto& d : data) {
    const StudyTerms t = study_terms(d, m, sigma, alpha);
    acc += t.g * t.u;
  }
  return acc;
}

Eigen::Matrix<double, 5, 1> dpd_score(const LogitObservation& obs, const PooledMean& mu,
                                      const BetweenStudyCov& sigma, double alpha) {
  check_alpha(alpha);
  const StudyTerms t = study_terms(obs, mu.vec(), sigma, alpha);
  const double c = alpha / ((1.0 + alpha) * (1.0 + alpha));
  const Eigen::Matrix2d m =
      t.g * (t.u * t.u.transpose() - t.w) + (c * t.q_pow) * t.w;
  Eigen::Matrix<double, 5, 1> s;
  s.head<2>() = t.g * t.u;
  for (int k = 0; k < 3; ++k) s[2 + k] = 0.5 * (cov_basis(k) * m).trace();
  return s;
}

Eigen::Matrix<double, 5, 5> dpd_score_jacobian(const LogitObservation& obs, const PooledMean& mu,
                                               const BetweenStudyCov& sigma, double alpha) {
  check_alpha(alpha);
  const StudyTerms t = study_terms(obs, mu.vec(), sigma, alpha);
  const double c = alpha / ((1.0 + alpha) * (1.0 + alpha));
  const Eigen::Matrix2d outer = t.u * t.u.transpose();

  Eigen::Matrix2d wd[3];
  Eigen::Vector2d wdu[3];
  double tr_wd[3];
  double a[3];
  for (int k = 0; k < 3; ++k) {
    wd[k] = t.w * cov_basis(k);
    wdu[k] = wd[k] * t.u;
    tr_wd[k] = wd[k].trace();
    a[k] = 0.5 * (t.u.dot(cov_basis(k) * t.u) - tr_wd[k]);
  }

  Eigen::Matrix<double, 5, 5> h;
  h.topLeftCorner<2, 2>() = t.g * (alpha * outer - t.w);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2d cross = t.g * (alpha * a[k] * t.u - wdu[k]);
    h.block<2, 1>(0, 2 + k) = cross;
    h.block<1, 2>(2 + k, 0) = cross.transpose();
  }
  for (int k = 0; k < 3; ++k) {
    const Eigen::Matrix2d dm =
        (t.g * alpha * a[k]) * (outer - t.w) +
        t.g * (-wdu[k] * t.u.transpose() - t.u * wdu[k].transpose() + wd[k] * t.w) +
        (c * t.q_pow) * (-(0.5 * alpha * tr_wd[k]) * t.w - wd[k] * t.w);
    for (int j = 0; j < 3; ++j) h(2 + j, 2 + k) = 0.5 * (cov_basis(j) * dm).trace();
  }
  return h;
}

Eigen::Matrix<double, 5, 1> dpd_gradient(std::span<const LogitObservation> data,
                                         const PooledMean& mu, const BetweenStudyCov& sigma,
                                         double alpha) {
  Eigen::Matrix<double, 5, 1> acc = Eigen::Matrix<double, 5, 1>::Zero();
  for (const auto& d : data) acc += dpd_score(d, mu, sigma, alpha);
  return acc;
}

PooledMean mu_fixed_point_step(std::span<const LogitObservation> data, const PooledMean& mu,
                               const BetweenStudyCov& sigma, double alpha) {
  check_alpha(alpha);
  if (data.empty()) throw DataError("mu_fixed_point_step: no studies");
  const Eigen::Vector2d m = mu.vec();
  Eigen::Matrix2d total = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  double g_max = 0.0;
  for (const auto& d : data) {
    const StudyTerms t = study_terms(d, m, sigma, alpha);
    g_max = std::max(g_max, t.g);
    total += t.g * t.w;
    rhs += t.g * (t.w * d.y());
  }
  if (!(g_max > 1e-12))
    throw NumericalError(
        "mu_fixed_point_step: every study is downweighted to numerical zero; "
        "the divergence surface is flat at this point");
  const double det = total(0, 0) * total(1, 1) - total(0, 1) * total(1, 0);
  if (!(det > 0.0) || !(total(0, 0) > 0.0))
    throw NumericalError("mu_fixed_point_step: singular weighted precision");
  return PooledMean::from(total.inverse() * rhs);
}

SigmaStep maximize_sigma(std::span<const LogitObservation> data, const PooledMean& mu,
                         const BetweenStudyCov& start, double alpha, const SigmaOptions& options) {
  check_alpha(alpha);
  const Eigen::VectorXd lo =
      (Eigen::VectorXd(3) << internal::kTMin, internal::kTMin, -internal::kZMax).finished();
  const Eigen::VectorXd hi =
      (Eigen::VectorXd(3) << internal::kTMax, internal::kTMax, internal::kZMax).finished();
  const std::vector<bool> mask(options.vary.begin(), options.vary.end());

  auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) -> double {
    const internal::SigmaParam q{v[0], v[1], v[2]};
    const BetweenStudyCov s = internal::from_param(q);
    try {
      const double val = dpd_objective(data, mu, s, alpha);
      if (grad) {
        const Eigen::Matrix<double, 5, 1> g5 = dpd_gradient(data, mu, s, alpha);
        const double gv[3] = {g5[2], g5[3], g5[4]};
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

  const internal::SigmaParam p0 = internal::to_param(start);
  Eigen::VectorXd x(3);
  x << p0.t1, p0.t2, p0.z;
  internal::BoxBfgsOptions bo;
  bo.max_iter = options.max_iter;
  bo.grad_tol = options.grad_tol;
  const internal::BoxBfgsResult r = internal::minimize_box_bfgs(objective, x, lo, hi, mask, bo);

  SigmaStep out;
  out.sigma = internal::from_param({r.x[0], r.x[1], r.x[2]});
  out.converged = r.converged;
  out.iterations = r.iterations;
  return out;
}

DpdFit fit_dpd(std::span<const LogitObservation> data, double alpha, const FitControl& control) {
  const BaselineFit init = fit_baseline(data, BaselineMethod::ML);
  return fit_dpd(data, alpha, init.mu_hat, init.sigma_hat, control);
}

DpdFit fit_dpd(std::span<const LogitObservation> data, double alpha, const PooledMean& mu0,
               const BetweenStudyCov& sigma0, const FitControl& control) {
  check_alpha(alpha);
  if (data.size() < 2)
    throw DataError("fit_dpd: needs at least 2 studies, got " + std::to_string(data.size()));

  PooledMean mu = mu0;
  BetweenStudyCov sigma = internal::from_param(internal::to_param(sigma0));
  double obj = dpd_objective(data, mu, sigma, alpha);

  // One damped sweep of the weighted-mean fixed point. The displacement is a
  // positive-definite transform of the mean gradient, so backtracking along
  // it cannot get stuck off a stationary point.
  auto mean_sweep = [&]() -> double {
    const PooledMean target = mu_fixed_point_step(data, mu, sigma, alpha);
    const Eigen::Vector2d base = mu.vec();
    const Eigen::Vector2d dir = target.vec() - base;
    double lam = 1.0;
    for (int h = 0; h < 60; ++h) {
      const PooledMean trial = PooledMean::from(base + lam * dir);
      const double trial_obj = dpd_objective(data, trial, sigma, alpha);
      if (std::isfinite(trial_obj) && trial_obj >= obj - 1e-12 * (1.0 + std::abs(trial_obj))) {
        mu = trial;
        obj = trial_obj;
        return lam * dir.cwiseAbs().maxCoeff();
      }
      lam *= 0.5;
    }
    return 0.0;
  };

  SigmaOptions so;
  so.max_iter = 60;
  so.grad_tol = 1e-11;

  bool converged = false;
  int outer = 0;
  for (outer = 1; outer <= control.max_iter; ++outer) {
    const PooledMean mu_prev = mu;
    const BetweenStudyCov sigma_prev = sigma;
    const double obj_prev = obj;

    mean_sweep();

    const SigmaStep st = maximize_sigma(data, mu, sigma, alpha, so);
    const double sobj = dpd_objective(data, mu, st.sigma, alpha);
    if (std::isfinite(sobj) && sobj >= obj - 1e-12 * (1.0 + std::abs(sobj))) {
      sigma = st.sigma;
      obj = sobj;
    }
    if (control.objective_trace) control.objective_trace->push_back(obj);

    const double change = max_param_change(mu, sigma, mu_prev, sigma_prev);
    if (change < control.param_tol ||
        std::abs(obj - obj_prev) < control.obj_tol * (1.0 + std::abs(obj))) {
      converged = true;
      break;
    }
  }

  // Tighten the mean equation; the covariance barely moves at this stage.
  for (int polish = 0; polish < 500; ++polish) {
    if (dpd_mu_gradient(data, mu, sigma, alpha).cwiseAbs().maxCoeff() <= 1e-9) break;
    if (mean_sweep() < 1e-16) break;
  }

  DpdFit fit;
  fit.mu_hat = mu;
  fit.sigma_hat = sigma;
  fit.alpha = alpha;
  fit.objective = obj;
  fit.score_residual = dpd_mu_gradient(data, mu, sigma, alpha).cwiseAbs().maxCoeff();
  fit.converged = converged && std::isfinite(obj);
  fit.boundary = internal::at_bounds(internal::to_param(sigma));
  fit.iterations = std::min(outer, control.max_iter);
  fit.per_study_weights.reserve(data.size());
  for (const auto& d : data) fit.per_study_weights.push_back(dpd_weight(d, mu, sigma, alpha));
  return fit;
}

}  // namespace dtadpd
