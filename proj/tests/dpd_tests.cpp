#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dtadpd/baseline.hpp"
#include "dtadpd/dpd.hpp"
#include "dtadpd/error.hpp"
#include "dtadpd/rng.hpp"

using namespace dtadpd;

namespace {

std::vector<LogitObservation> make_data(int n, std::uint64_t seed, const PooledMean& mu,
                                        const BetweenStudyCov& sigma) {
  std::mt19937_64 gen = make_stream(seed, 0);
  const double l11 = std::sqrt(sigma.sigma1sq);
  const double l21 = sigma.sigma12 / l11;
  const double l22 = std::sqrt(sigma.sigma2sq - l21 * l21);
  std::vector<LogitObservation> out;
  for (int i = 0; i < n; ++i) {
    LogitObservation obs;
    obs.study_id = std::to_string(i + 1);
    obs.s1sq = 0.05 + 0.20 * uniform01(gen);
    obs.s2sq = 0.04 + 0.15 * uniform01(gen);
    const auto z = normal_pair(gen);
    const auto e = normal_pair(gen);
    obs.y1 = mu.mu1 + l11 * z[0] + std::sqrt(obs.s1sq) * e[0];
    obs.y2 = mu.mu2 + l21 * z[0] + l22 * z[1] + std::sqrt(obs.s2sq) * e[1];
    out.push_back(obs);
  }
  return out;
}

const PooledMean kMu{0.8, 1.5};
const BetweenStudyCov kSigma{0.15, 0.10, -0.7 * std::sqrt(0.15 * 0.10)};

double rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(b)); }

}  // namespace

TEST_CASE("q_factor and dpd_weight definitions") {
  LogitObservation obs;
  obs.y1 = 0.4;
  obs.y2 = 1.8;
  obs.s1sq = 0.3;
  obs.s2sq = 0.2;
  const BetweenStudyCov s{0.1, 0.15, -0.05};
  const PooledMean m{0.7, 1.4};
  const double alpha = 0.4;

  const Eigen::Matrix2d v = obs.within_cov() + s.matrix();
  const double det = v(0, 0) * v(1, 1) - v(0, 1) * v(1, 0);
  const double q_expected = 1.0 / (2.0 * M_PI * std::sqrt(det));
  CHECK(q_factor(obs, s) == doctest::Approx(q_expected).epsilon(1e-13));

  const Eigen::Vector2d r = obs.y() - m.vec();
  const double quad = r.dot(v.inverse() * r);
  CHECK(dpd_weight(obs, m, s, alpha) ==
        doctest::Approx(std::pow(q_expected, alpha) * std::exp(-0.5 * alpha * quad))
            .epsilon(1e-12));
  // No downweighting at the observation itself.
  CHECK(dpd_weight(obs, {obs.y1, obs.y2}, s, alpha) ==
        doctest::Approx(std::pow(q_expected, alpha)).epsilon(1e-12));
}

TEST_CASE("objective approaches the log-likelihood as alpha shrinks") {
  const auto data = make_data(8, 21, kMu, kSigma);
  const PooledMean m{0.7, 1.3};
  const BetweenStudyCov s{0.2, 0.12, -0.06};

  const double alpha = 1e-6;
  const double d = dpd_objective(data, m, s, alpha);
  const double shifted = d - double(data.size()) * (1.0 / alpha - 1.0);
  // The gap carries a genuine O(alpha) remainder, not just rounding.
  CHECK(shifted == doctest::Approx(log_likelihood(data, m, s)).epsilon(2e-5));
}

TEST_CASE("analytic gradient matches finite differences") {
  const auto data = make_data(9, 22, kMu, kSigma);
  const PooledMean m{0.6, 1.2};
  const BetweenStudyCov s{0.17, 0.11, 0.03};

  for (double alpha : {1.0 / 3.0, 0.5, 0.9}) {
    const Eigen::Matrix<double, 5, 1> grad = dpd_gradient(data, m, s, alpha);
    const double p[5] = {m.mu1, m.mu2, s.sigma1sq, s.sigma2sq, s.sigma12};
    for (int k = 0; k < 5; ++k) {
      const double h = 1e-6 * (1.0 + std::abs(p[k]));
      auto eval = [&](double v) {
        double q[5] = {p[0], p[1], p[2], p[3], p[4]};
        q[k] = v;
        return dpd_objective(data, {q[0], q[1]}, {q[2], q[3], q[4]}, alpha);
      };
      const double fd = (eval(p[k] + h) - eval(p[k] - h)) / (2.0 * h);
      CHECK(rel_close(grad[k], fd, 1e-6));
    }
  }
}

TEST_CASE("per-study scores sum to the gradient and mu part matches") {
  const auto data = make_data(7, 23, kMu, kSigma);
  const PooledMean m{0.9, 1.6};
  const BetweenStudyCov s{0.14, 0.09, -0.02};
  const double alpha = 0.25;

  Eigen::Matrix<double, 5, 1> acc = Eigen::Matrix<double, 5, 1>::Zero();
  for (const auto& d : data) acc += dpd_score(d, m, s, alpha);
  const Eigen::Matrix<double, 5, 1> grad = dpd_gradient(data, m, s, alpha);
  CHECK((acc - grad).cwiseAbs().maxCoeff() < 1e-12);

  const Eigen::Vector2d mu_grad = dpd_mu_gradient(data, m, s, alpha);
  CHECK(mu_grad[0] == doctest::Approx(grad[0]).epsilon(1e-12));
  CHECK(mu_grad[1] == doctest::Approx(grad[1]).epsilon(1e-12));
}

TEST_CASE("score jacobian matches finite differences and is symmetric") {
  const auto data = make_data(3, 24, kMu, kSigma);
  const PooledMean m{0.75, 1.45};
  const BetweenStudyCov s{0.16, 0.10, -0.05};

  for (double alpha : {1.0 / 3.0, 0.6}) {
    for (const auto& obs : data) {
      const Eigen::Matrix<double, 5, 5> jac = dpd_score_jacobian(obs, m, s, alpha);
      CHECK((jac - jac.transpose()).cwiseAbs().maxCoeff() < 1e-10);

      const double p[5] = {m.mu1, m.mu2, s.sigma1sq, s.sigma2sq, s.sigma12};
      for (int k = 0; k < 5; ++k) {
        const double h = 1e-6 * (1.0 + std::abs(p[k]));
        auto eval = [&](double v) {
          double q[5] = {p[0], p[1], p[2], p[3], p[4]};
          q[k] = v;
          return dpd_score(obs, {q[0], q[1]}, {q[2], q[3], q[4]}, alpha);
        };
        const Eigen::Matrix<double, 5, 1> fd = (eval(p[k] + h) - eval(p[k] - h)) / (2.0 * h);
        for (int j = 0; j < 5; ++j) CHECK(rel_close(jac(j, k), fd[j], 2e-5));
      }
    }
  }
}

TEST_CASE("fixed point converges to a root of the mean equation") {
  const auto data = make_data(10, 25, kMu, kSigma);
  const BetweenStudyCov s{0.15, 0.10, -0.04};
  const double alpha = 1.0 / 3.0;

  PooledMean m{0.0, 0.0};
  for (int i = 0; i < 400; ++i) m = mu_fixed_point_step(data, m, s, alpha);
  CHECK(dpd_mu_gradient(data, m, s, alpha).cwiseAbs().maxCoeff() < 1e-10);

  // The converged point dominates a dense mean grid at this covariance.
  const double at_root = dpd_objective(data, m, s, alpha);
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j)
      CHECK(at_root >= dpd_objective(data, {m.mu1 + 0.05 * i, m.mu2 + 0.05 * j}, s, alpha) - 1e-12);
}

TEST_CASE("total downweighting raises NumericalError") {
  // Tight studies, a mean thirty logits away, and full alpha: every weight
  // underflows.
  std::vector<LogitObservation> data;
  for (int i = 0; i < 4; ++i) {
    LogitObservation obs;
    obs.study_id = std::to_string(i);
    obs.y1 = 0.1 * i;
    obs.y2 = -0.1 * i;
    obs.s1sq = 0.01;
    obs.s2sq = 0.01;
    data.push_back(obs);
  }
  const BetweenStudyCov s{1e-4, 1e-4, 0.0};
  CHECK_THROWS_AS(mu_fixed_point_step(data, {30.0, -30.0}, s, 1.0), NumericalError);
}

TEST_CASE("maximize_sigma matches a one-dimensional golden-section oracle") {
  const auto data = make_data(11, 26, kMu, kSigma);
  const PooledMean m = gls_mean(data, kSigma);
  const double alpha = 0.3;

  // Vary only log sigma1; hold the other coordinates at the start.
  const double t2 = 0.5 * std::log(0.1);
  const double z = 0.0;
  auto value = [&](double t1) {
    const double v1 = std::exp(2.0 * t1);
    const double v2 = std::exp(2.0 * t2);
    const double rho = std::tanh(z);
    return dpd_objective(data, m, {v1, v2, rho * std::sqrt(v1 * v2)}, alpha);
  };

  double lo = -6.0, hi = 2.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = value(c), fd = value(d);
  for (int i = 0; i < 200; ++i) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = value(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = value(d);
    }
  }
  const double golden_best = std::max(fc, fd);

  SigmaOptions options;
  options.vary = {true, false, false};
  const BetweenStudyCov start{0.05, 0.1, 0.0};  // t2, z match the oracle's fixed values
  const SigmaStep step = maximize_sigma(data, m, start, alpha, options);
  CHECK(step.converged);
  const double solver_best = dpd_objective(data, m, step.sigma, alpha);
  CHECK(solver_best >= golden_best - 1e-8);
  // And the held coordinates did not move.
  CHECK(step.sigma.sigma2sq == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(step.sigma.sigma12 == doctest::Approx(0.0));
}

TEST_CASE("fit_dpd satisfies the estimating equation") {
  const auto data = make_data(12, 27, kMu, kSigma);
  std::vector<double> trace;
  FitControl control;
  control.objective_trace = &trace;
  const DpdFit fit = fit_dpd(data, 1.0 / 3.0, control);

  CHECK(fit.converged);
  CHECK(fit.score_residual < 1e-6);
  CHECK(fit.alpha == doctest::Approx(1.0 / 3.0));
  CHECK(fit.per_study_weights.size() == data.size());
  CHECK(fit.objective == doctest::Approx(dpd_objective(data, fit.mu_hat, fit.sigma_hat, fit.alpha)));
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);

  // This draw pins the correlation at its box bound (weakly identified at
  // N=12), so optimality is checked by perturbation instead of a zero
  // gradient: no nearby admissible covariance does better.
  CHECK(fit.boundary);
  const double t1 = 0.5 * std::log(fit.sigma_hat.sigma1sq);
  const double t2 = 0.5 * std::log(fit.sigma_hat.sigma2sq);
  const double z = std::atanh(std::clamp(fit.sigma_hat.rho(), -0.99999998, 0.99999998));
  for (int k = 0; k < 3; ++k) {
    for (double step : {-1e-4, 1e-4}) {
      double t[3] = {t1, t2, z};
      t[k] += step;
      t[2] = std::clamp(t[2], -8.0, 8.0);
      const double v1 = std::exp(2.0 * t[0]);
      const double v2 = std::exp(2.0 * t[1]);
      const double rho = std::tanh(t[2]);
      const double perturbed =
          dpd_objective(data, fit.mu_hat, {v1, v2, rho * std::sqrt(v1 * v2)}, fit.alpha);
      CHECK(perturbed <= fit.objective + 1e-9);
    }
  }

  // The explicit-start overload reaches the same optimum.
  const DpdFit fit2 = fit_dpd(data, 1.0 / 3.0, {0.5, 1.0}, {0.3, 0.3, 0.0});
  CHECK(fit2.mu_hat.mu1 == doctest::Approx(fit.mu_hat.mu1).epsilon(1e-6));
  CHECK(fit2.mu_hat.mu2 == doctest::Approx(fit.mu_hat.mu2).epsilon(1e-6));
}

TEST_CASE("tiny alpha reproduces the ML fit") {
  const auto data = make_data(10, 28, kMu, kSigma);
  const BaselineFit ml = fit_baseline(data, BaselineMethod::ML);
  const DpdFit fit = fit_dpd(data, 1e-6);
  CHECK(std::abs(fit.mu_hat.mu1 - ml.mu_hat.mu1) < 1e-4);
  CHECK(std::abs(fit.mu_hat.mu2 - ml.mu_hat.mu2) < 1e-4);
  CHECK(std::abs(fit.sigma_hat.sigma1sq - ml.sigma_hat.sigma1sq) < 1e-4);
  CHECK(std::abs(fit.sigma_hat.sigma2sq - ml.sigma_hat.sigma2sq) < 1e-4);
  CHECK(std::abs(fit.sigma_hat.sigma12 - ml.sigma_hat.sigma12) < 1e-4);
}

TEST_CASE("a gross outlier is downweighted and barely moves the estimate") {
  const auto clean = make_data(12, 29, kMu, kSigma);
  auto contaminated = clean;
  LogitObservation out;
  out.study_id = "outlier";
  out.y1 = kMu.mu1 + 6.0;
  out.y2 = kMu.mu2 - 6.0;
  out.s1sq = 0.05;
  out.s2sq = 0.05;
  contaminated.push_back(out);

  const double alpha = 1.0 / 3.0;
  const DpdFit clean_fit = fit_dpd(clean, alpha);
  const DpdFit dirty_fit = fit_dpd(contaminated, alpha);
  const BaselineFit clean_ml = fit_baseline(clean, BaselineMethod::ML);
  const BaselineFit dirty_ml = fit_baseline(contaminated, BaselineMethod::ML);

  const double dpd_shift = std::hypot(dirty_fit.mu_hat.mu1 - clean_fit.mu_hat.mu1,
                                      dirty_fit.mu_hat.mu2 - clean_fit.mu_hat.mu2);
  const double ml_shift = std::hypot(dirty_ml.mu_hat.mu1 - clean_ml.mu_hat.mu1,
                                     dirty_ml.mu_hat.mu2 - clean_ml.mu_hat.mu2);
  CHECK(dpd_shift < 0.15);
  CHECK(ml_shift > 2.0 * dpd_shift);

  // The outlier's weight is far below every clean study's weight.
  const double outlier_w = dirty_fit.per_study_weights.back();
  double min_clean = 1e300;
  for (std::size_t i = 0; i + 1 < dirty_fit.per_study_weights.size(); ++i)
    min_clean = std::min(min_clean, dirty_fit.per_study_weights[i]);
  CHECK(outlier_w < 0.2 * min_clean);
}

TEST_CASE("alpha validation") {
  const auto data = make_data(5, 30, kMu, kSigma);
  CHECK_THROWS_AS(fit_dpd(data, 0.0), DataError);
  CHECK_THROWS_AS(fit_dpd(data, -0.2), DataError);
  CHECK_THROWS_AS(fit_dpd(data, 1.2), DataError);
  CHECK_THROWS_AS(dpd_objective(data, kMu, kSigma, 0.0), DataError);
  const auto one = make_data(1, 31, kMu, kSigma);
  CHECK_THROWS_AS(fit_dpd(one, 0.3), DataError);
}
