#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "dtadpd/dpd.hpp"
#include "dtadpd/model.hpp"

namespace dtadpd {

enum class CiKind { Wald, Hksj };
enum class CiScale { Logit, Probability };

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  CiKind kind = CiKind::Wald;
  CiScale scale = CiScale::Logit;
};

// Robust covariance of the five-parameter estimate:
//   V = A^-1 B A^-T,  A = sum_i d(psi_i)/d(eta),  B = sum_i psi_i psi_i'.
struct SandwichCovariance {
  Eigen::Matrix<double, 5, 5> full = Eigen::Matrix<double, 5, 5>::Zero();
  double bread_condition = 0.0;  // spectral condition number of A

  Eigen::Matrix2d mu_block() const { return full.topLeftCorner<2, 2>(); }
};

// Throws NumericalError when the summed score derivative is numerically
// singular (flat curvature at the estimate).
SandwichCovariance sandwich_cov(std::span<const LogitObservation> data, const DpdFit& fit);

// Symmetric interval on the logit scale with a normal critical value.
ConfidenceInterval wald_ci(double estimate, double variance, double level = 0.95);

// Same variance with a t critical value on 2N - 2 degrees of freedom.
ConfidenceInterval hksj_ci(double estimate, double variance, std::size_t n_studies,
                           double level = 0.95);

// Maps interval endpoints through the inverse logit.
ConfidenceInterval back_transform(const ConfidenceInterval& ci);

}  // namespace dtadpd
