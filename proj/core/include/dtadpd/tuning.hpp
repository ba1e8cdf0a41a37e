#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dtadpd/baseline.hpp"
#include "dtadpd/dpd.hpp"
#include "dtadpd/model.hpp"

namespace dtadpd {

// Greatest-efficiency-with-stability default 1/(p+1) for p outcome
// dimensions; 1/3 for the bivariate model.
double alpha_ges(int p = 2);

// Empirical Hyvarinen score of the alpha-tilted fitted marginals,
//   H = (1/N) sum_i [ phi_i^alpha (alpha k_i - tr W_i) + 0.5 phi_i^(2 alpha) k_i ],
// where phi_i is the fitted normal density at y_i and k_i = |W_i (y_i - mu)|^2.
// Lower is better; alpha -> 0 recovers the classical score for the plain
// density.
double hyvarinen_score(std::span<const LogitObservation> data, const PooledMean& mu,
                       const BetweenStudyCov& sigma, double alpha);

// Analytic gradient of N * H in (mu1, mu2, sigma1sq, sigma2sq, sigma12).
Eigen::Matrix<double, 5, 1> hyvarinen_gradient(std::span<const LogitObservation> data,
                                               const PooledMean& mu, const BetweenStudyCov& sigma,
                                               double alpha);

struct GridSpec {
  double lo = 0.01;
  double hi = 0.50;
  double step = 0.01;
  // Start each fit from the previous grid point's solution instead of the
  // ML fit; the sweep runs in ascending alpha order either way.
  bool warm_start = true;
};

struct TuningPoint {
  double alpha = 0.0;
  double criterion = 0.0;
  PooledMean mu;
  BetweenStudyCov sigma;
  bool converged = false;
};

struct TuningResult {
  double alpha_selected = 0.0;
  double criterion = 0.0;
  bool boundary = false;  // selected alpha sits on a grid endpoint
  std::vector<TuningPoint> grid;
  DpdFit fit;  // the fit at the selected alpha
};

// Scores every grid alpha by the Hyvarinen criterion and keeps the minimum,
// breaking ties toward the smaller alpha. Grid points whose fit does not
// converge are recorded but excluded from selection; if none converge the
// search throws NumericalError.
TuningResult select_alpha(std::span<const LogitObservation> data, const GridSpec& grid = {},
                          const FitControl& control = {});

}  // namespace dtadpd
