#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dtadpd/baseline.hpp"
#include "dtadpd/model.hpp"

namespace dtadpd {

// Robust fit of the bivariate random-effects model under the density power
// divergence with tuning constant alpha in (0, 1].
struct DpdFit {
  PooledMean mu_hat;
  BetweenStudyCov sigma_hat;
  double alpha = 0.0;
  double objective = 0.0;
  // Max-norm of the pooled-mean estimating equation sum_i g_i W_i (y_i - mu)
  // at the reported estimate.
  double score_residual = 0.0;
  bool converged = false;
  bool boundary = false;
  int iterations = 0;
  std::vector<double> per_study_weights;  // g_i at the estimate
};

// Normalizing factor Q_i = (2 pi)^-1 det(S_i + Sigma)^(-1/2).
double q_factor(const LogitObservation& obs, const BetweenStudyCov& sigma);

// Study weight g_i = Q_i^alpha exp(-alpha/2 (y_i-mu)' W_i (y_i-mu)).
double dpd_weight(const LogitObservation& obs, const PooledMean& mu, const BetweenStudyCov& sigma,
                  double alpha);

// Divergence objective sum_i [ g_i/alpha - Q_i^alpha/(1+alpha)^2 ], maximized
// by the robust estimate. As alpha -> 0 it approaches the log-likelihood plus
// the constant N(1/alpha - 1).
double dpd_objective(std::span<const LogitObservation> data, const PooledMean& mu,
                     const BetweenStudyCov& sigma, double alpha);

// Left-hand side of the pooled-mean estimating equation,
// sum_i g_i W_i (y_i - mu).
Eigen::Vector2d dpd_mu_gradient(std::span<const LogitObservation> data, const PooledMean& mu,
                                const BetweenStudyCov& sigma, double alpha);

// Per-study score in (mu1, mu2, sigma1sq, sigma2sq, sigma12) order and its
// derivative matrix; both feed the sandwich variance.
Eigen::Matrix<double, 5, 1> dpd_score(const LogitObservation& obs, const PooledMean& mu,
                                      const BetweenStudyCov& sigma, double alpha);
Eigen::Matrix<double, 5, 5> dpd_score_jacobian(const LogitObservation& obs, const PooledMean& mu,
                                               const BetweenStudyCov& sigma, double alpha);

// Full analytic gradient of dpd_objective (sum of per-study scores).
Eigen::Matrix<double, 5, 1> dpd_gradient(std::span<const LogitObservation> data,
                                         const PooledMean& mu, const BetweenStudyCov& sigma,
                                         double alpha);

// One sweep of the weighted-mean fixed point
//   mu' = (sum g_i W_i)^-1 sum g_i W_i y_i
// with weights evaluated at the current mu. Throws NumericalError when every
// study is effectively downweighted to zero or the weighted precision is
// singular.
PooledMean mu_fixed_point_step(std::span<const LogitObservation> data, const PooledMean& mu,
                               const BetweenStudyCov& sigma, double alpha);

struct SigmaOptions {
  int max_iter = 200;
  double grad_tol = 1e-10;
  // Coordinates of (log sigma1, log sigma2, atanh rho) allowed to move; the
  // others stay at their starting values.
  std::array<bool, 3> vary{true, true, true};
};

struct SigmaStep {
  BetweenStudyCov sigma;
  bool converged = false;
  int iterations = 0;
};

// Maximizes the divergence over the between-study covariance at a fixed mean.
SigmaStep maximize_sigma(std::span<const LogitObservation> data, const PooledMean& mu,
                         const BetweenStudyCov& start, double alpha,
                         const SigmaOptions& options = {});

// Alternates the mean fixed point with quasi-Newton covariance steps until
// the parameters settle. The first overload starts from the ML fit.
DpdFit fit_dpd(std::span<const LogitObservation> data, double alpha, const FitControl& control = {});
DpdFit fit_dpd(std::span<const LogitObservation> data, double alpha, const PooledMean& mu0,
               const BetweenStudyCov& sigma0, const FitControl& control = {});

}  // namespace dtadpd
