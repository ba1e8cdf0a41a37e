#pragma once

#include <Eigen/Dense>
#include <string>

namespace dtadpd {

// Continuity-correction rule applied before the logit transform.
// HalfOnZero adds 0.5 to every cell of any table containing a zero cell.
enum class Correction { None, HalfOnZero };

// One study's 2x2 table: diseased (tp + fn) and non-diseased (fp + tn) arms.
struct StudyCounts {
  std::string study_id;
  long tp = 0;
  long fn = 0;
  long fp = 0;
  long tn = 0;

  long diseased() const { return tp + fn; }
  long non_diseased() const { return fp + tn; }
};

// Per-study outcome on the logit scale: y = (logit Se, logit Sp) with known
// diagonal within-study covariance diag(s1sq, s2sq).
struct LogitObservation {
  std::string study_id;
  double y1 = 0.0;
  double y2 = 0.0;
  double s1sq = 0.0;
  double s2sq = 0.0;

  Eigen::Vector2d y() const { return {y1, y2}; }
  Eigen::Matrix2d within_cov() const {
    Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
    s(0, 0) = s1sq;
    s(1, 1) = s2sq;
    return s;
  }
};

// Pooled logit sensitivity / specificity.
struct PooledMean {
  double mu1 = 0.0;
  double mu2 = 0.0;

  Eigen::Vector2d vec() const { return {mu1, mu2}; }
  static PooledMean from(const Eigen::Vector2d& v) { return {v[0], v[1]}; }
};

// Between-study covariance, stored by its three free components.
// The implied correlation is a derived accessor.
struct BetweenStudyCov {
  double sigma1sq = 0.0;
  double sigma2sq = 0.0;
  double sigma12 = 0.0;

  double rho() const;
  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << sigma1sq, sigma12, sigma12, sigma2sq;
    return m;
  }
  static BetweenStudyCov from(const Eigen::Matrix2d& m) {
    return {m(0, 0), m(1, 1), 0.5 * (m(0, 1) + m(1, 0))};
  }
  // True when [[sigma1sq, sigma12],[sigma12, sigma2sq]] is PSD (up to tol).
  bool is_psd(double tol = 1e-12) const;
};

// W_i = (S_i + Sigma)^-1, the inverse marginal covariance of one study.
using MarginalPrecision = Eigen::Matrix2d;

double logit(double p);
double inverse_logit(double x);

// Throws DataError unless counts are non-negative with at least one diseased
// and one non-diseased subject.
void validate(const StudyCounts& counts);

// 2x2 table -> logit-scale observation with delta-method variances
// s1sq = 1/tp' + 1/fn', s2sq = 1/tn' + 1/fp' on corrected counts.
// Throws DataError on a zero cell when correction is Correction::None.
LogitObservation logit_transform(const StudyCounts& counts,
                                 Correction correction = Correction::HalfOnZero);

// Exact 2x2 inverse of S_i + Sigma. Throws NumericalError unless the sum is
// positive definite (a degenerate Sigma iterate or bad input).
MarginalPrecision marginal_precision(const LogitObservation& obs,
                                     const BetweenStudyCov& sigma);

}  // namespace dtadpd
