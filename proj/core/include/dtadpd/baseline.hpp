#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "dtadpd/model.hpp"

namespace dtadpd {

enum class BaselineMethod { ML, REML };

struct BaselineFit {
  PooledMean mu_hat;
  BetweenStudyCov sigma_hat;
  double log_lik = 0.0;  // value of the fitted objective (ML or restricted)
  BaselineMethod method = BaselineMethod::REML;
  bool converged = false;
  bool boundary = false;  // covariance pinned at the reparameterization bounds
  int iterations = 0;
};

// Shared stopping rules for the iterative fitters.
struct FitControl {
  int max_iter = 1000;
  double param_tol = 1e-8;  // relative change of every parameter
  double obj_tol = 1e-10;   // change of the objective
  // When set, the outer-loop objective value is appended once per iteration.
  std::vector<double>* objective_trace = nullptr;
};

// Sum over studies of the bivariate normal log density of Y_i with mean mu
// and covariance S_i + Sigma.
double log_likelihood(std::span<const LogitObservation> data, const PooledMean& mu,
                      const BetweenStudyCov& sigma);

// Profile log-likelihood at the GLS mean minus 0.5 * log det(sum_i W_i).
double restricted_log_likelihood(std::span<const LogitObservation> data,
                                 const BetweenStudyCov& sigma);

// (sum_i W_i)^-1 sum_i W_i Y_i.
PooledMean gls_mean(std::span<const LogitObservation> data, const BetweenStudyCov& sigma);

// (sum_i W_i)^-1, the model-based covariance of the GLS mean.
Eigen::Matrix2d gls_covariance(std::span<const LogitObservation> data,
                               const BetweenStudyCov& sigma);

// Gradient of log_likelihood w.r.t. (mu1, mu2, sigma1sq, sigma2sq, sigma12).
Eigen::Matrix<double, 5, 1> log_likelihood_gradient(std::span<const LogitObservation> data,
                                                    const PooledMean& mu,
                                                    const BetweenStudyCov& sigma);

// Gradient of restricted_log_likelihood w.r.t. (sigma1sq, sigma2sq, sigma12),
// with the mean profiled out.
Eigen::Vector3d restricted_log_likelihood_gradient(std::span<const LogitObservation> data,
                                                   const BetweenStudyCov& sigma);

BaselineFit fit_baseline(std::span<const LogitObservation> data, BaselineMethod method,
                         const FitControl& control = {});

}  // namespace dtadpd
