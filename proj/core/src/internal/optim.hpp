#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace dtadpd::internal {

// Small box-constrained BFGS minimizer with Armijo backtracking, used for the
// three-parameter covariance sub-problems. Coordinates with mask[i] == false
// are held fixed at their initial value.
struct BoxBfgsOptions {
  int max_iter = 300;
  double grad_tol = 1e-9;
  double step_tol = 1e-13;
};

struct BoxBfgsResult {
  Eigen::VectorXd x;
  double fx = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  bool line_search_failed = false;
  int iterations = 0;
};

// f(x, grad) returns the objective and fills grad when grad != nullptr.
// Non-finite trial values are treated as out-of-region and rejected by the
// line search.
inline BoxBfgsResult minimize_box_bfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& f,
    Eigen::VectorXd x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
    const std::vector<bool>& mask, const BoxBfgsOptions& opt = {}) {
  const int n = static_cast<int>(x.size());
  auto project = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < n; ++i) v[i] = std::min(std::max(v[i], lower[i]), upper[i]);
  };
  project(x);

  Eigen::VectorXd g(n);
  double fx = f(x, &g);
  for (int i = 0; i < n; ++i)
    if (!mask[i]) g[i] = 0.0;

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  BoxBfgsResult res;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;

    // Gradient components pushing against an active bound do not count.
    Eigen::VectorXd geff = g;
    for (int i = 0; i < n; ++i) {
      if ((x[i] <= lower[i] + 1e-14 && g[i] > 0.0) || (x[i] >= upper[i] - 1e-14 && g[i] < 0.0))
        geff[i] = 0.0;
    }
    if (geff.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd p = -hinv * geff;
    for (int i = 0; i < n; ++i)
      if (!mask[i]) p[i] = 0.0;
    double gtp = geff.dot(p);
    if (!(gtp < 0.0)) {
      hinv.setIdentity();
      p = -geff;
      gtp = geff.dot(p);
      if (!(gtp < 0.0)) {
        res.converged = true;  // effectively stationary
        break;
      }
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd xnew = x;
    double fnew = fx;
    for (int ls = 0; ls < 60; ++ls) {
      xnew = x + step * p;
      project(xnew);
      fnew = f(xnew, nullptr);
      if (std::isfinite(fnew) && fnew <= fx + 1e-4 * geff.dot(xnew - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step * p.lpNorm<Eigen::Infinity>() < opt.step_tol) break;
    }
    if (!accepted) {
      // Stuck: either converged to roundoff or the model is locally bad.
      res.line_search_failed = geff.lpNorm<Eigen::Infinity>() > 1e2 * opt.grad_tol;
      res.converged = !res.line_search_failed;
      break;
    }

    Eigen::VectorXd gnew(n);
    f(xnew, &gnew);
    for (int i = 0; i < n; ++i)
      if (!mask[i]) gnew[i] = 0.0;

    const Eigen::VectorXd s = xnew - x;
    const Eigen::VectorXd yv = gnew - g;
    const double ys = yv.dot(s);
    if (ys > 1e-14 * s.norm() * yv.norm() && ys > 0.0) {
      const double rho = 1.0 / ys;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) +
             rho * s * s.transpose();
    } else {
      hinv.setIdentity();
    }

    x = xnew;
    fx = fnew;
    g = gnew;
    if (s.lpNorm<Eigen::Infinity>() < opt.step_tol) {
      res.converged = true;
      break;
    }
  }

  res.x = x;
  res.fx = fx;
  return res;
}

}  // namespace dtadpd::internal
