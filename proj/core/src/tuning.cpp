#include "dtadpd/tuning.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dtadpd/error.hpp"
#include "internal/sigma_param.hpp"

namespace dtadpd {

namespace {

using internal::cov_basis;

constexpr double kTwoPi = 6.283185307179586;

struct ScoreTerms {
  Eigen::Matrix2d w;
  Eigen::Vector2d u;
  double kappa = 0.0;    // |u|^2
  double phi_a = 0.0;    // phi^alpha
  double phi_2a = 0.0;   // phi^(2 alpha)
};

ScoreTerms score_terms(const LogitObservation& obs, const Eigen::Vector2d& mu,
                       const BetweenStudyCov& sigma, double alpha) {
  ScoreTerms t;
  t.w = marginal_precision(obs, sigma);
  const Eigen::Vector2d r = obs.y() - mu;
  t.u = t.w * r;
  t.kappa = t.u.squaredNorm();
  const double det_w = t.w(0, 0) * t.w(1, 1) - t.w(0, 1) * t.w(1, 0);
  const double log_phi = 0.5 * std::log(det_w) - std::log(kTwoPi) - 0.5 * r.dot(t.u);
  t.phi_a = std::exp(alpha * log_phi);
  t.phi_2a = std::exp(2.0 * alpha * log_phi);
  return t;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw DataError("tuning: alpha must lie in (0, 1], got " + std::to_string(alpha));
}

}  // namespace

double alpha_ges(int p) {
  if (p < 1) throw DataError("alpha_ges: outcome dimension must be at least 1");
  return 1.0 / (double(p) + 1.0);
}

double hyvarinen_score(std::span<const LogitObservation> data, const PooledMean& mu,
                       const BetweenStudyCov& sigma, double alpha) {
  check_alpha(alpha);
  if (data.empty()) throw DataError("hyvarinen_score: no studies");
  const Eigen::Vector2d m = mu.vec();
  double acc = 0.0;
  for (const auto& d : data) {
    const ScoreTerms t = score_terms(d, m, sigma, alpha);
    acc += t.phi_a * (alpha * t.kappa - t.w.trace()) + 0.5 * t.phi_2a * t.kappa;
  }
  return acc / double(data.size());
}

Eigen::Matrix<double, 5, 1> hyvarinen_gradient(std::span<const LogitObservation> data,
                                               const PooledMean& mu, const BetweenStudyCov& sigma,
                                               double alpha) {
  check_alpha(alpha);
  const Eigen::Vector2d m = mu.vec();
  Eigen::Matrix<double, 5, 1> acc = Eigen::Matrix<double, 5, 1>::Zero();
  for (const auto& d : data) {
    const ScoreTerms t = score_terms(d, m, sigma, alpha);
    const double bracket = alpha * t.kappa - t.w.trace();
    const Eigen::Vector2d wu = t.w * t.u;

    acc.head<2>() += alpha * t.phi_a * (bracket * t.u - 2.0 * wu) +
                     t.phi_2a * (alpha * t.kappa * t.u - wu);

    for (int k = 0; k < 3; ++k) {
      const Eigen::Matrix2d wd = t.w * cov_basis(k);
      const double tr_wd = wd.trace();
      const double a_k = 0.5 * (t.u.dot(cov_basis(k) * t.u) - tr_wd);
      const double uwdu = t.u.dot(wd * t.u);
      const double tr_wdw = (wd * t.w).trace();
      acc[2 + k] += t.phi_a * (alpha * a_k * bracket - 2.0 * alpha * uwdu + tr_wdw) +
                    t.phi_2a * (alpha * a_k * t.kappa - uwdu);
    }
  }
  return acc;
}

TuningResult select_alpha(std::span<const LogitObservation> data, const GridSpec& grid,
                          const FitControl& control) {
  if (!(grid.lo > 0.0) || grid.hi > 1.0 || grid.lo > grid.hi || !(grid.step > 0.0))
    throw DataError("select_alpha: grid must satisfy 0 < lo <= hi <= 1 with positive step");

  const int n_points = int(std::lround((grid.hi - grid.lo) / grid.step)) + 1;

  BaselineFit init = fit_baseline(data, BaselineMethod::ML, control);
  PooledMean warm_mu = init.mu_hat;
  BetweenStudyCov warm_sigma = init.sigma_hat;
  bool have_warm = true;

  TuningResult result;
  result.grid.reserve(std::size_t(n_points));
  double best = std::numeric_limits<double>::infinity();
  int best_index = -1;
  DpdFit best_fit;

  for (int i = 0; i < n_points; ++i) {
    const double alpha = std::min(grid.lo + double(i) * grid.step, grid.hi);
    TuningPoint point;
    point.alpha = alpha;
    point.criterion = std::numeric_limits<double>::quiet_NaN();
    try {
      const DpdFit fit = (grid.warm_start && have_warm)
                             ? fit_dpd(data, alpha, warm_mu, warm_sigma, control)
                             : fit_dpd(data, alpha, init.mu_hat, init.sigma_hat, control);
      point.mu = fit.mu_hat;
      point.sigma = fit.sigma_hat;
      point.converged = fit.converged;
      if (fit.converged) {
        point.criterion = hyvarinen_score(data, fit.mu_hat, fit.sigma_hat, alpha);
        warm_mu = fit.mu_hat;
        warm_sigma = fit.sigma_hat;
        have_warm = true;
        if (point.criterion < best) {
          best = point.criterion;
          best_index = i;
          best_fit = fit;
        }
      }
    } catch (const NumericalError&) {
      point.converged = false;
    }
    result.grid.push_back(point);
  }

  if (best_index < 0)
    throw NumericalError("select_alpha: no grid point produced a converged fit");

  result.alpha_selected = result.grid[std::size_t(best_index)].alpha;
  result.criterion = best;
  result.boundary = best_index == 0 || best_index == n_points - 1;
  result.fit = best_fit;
  return result;
}

}  // namespace dtadpd
