#pragma once

#include <algorithm>
#include <cmath>

#include "dtadpd/model.hpp"

namespace dtadpd::internal {

// Unconstrained coordinates for the between-study covariance:
//   t1 = log sigma1, t2 = log sigma2, z = atanh rho.
// Box bounds keep iterates away from the PSD boundary; fits that end up
// pinned there are flagged as boundary solutions by the callers.
struct SigmaParam {
  double t1 = 0.0;
  double t2 = 0.0;
  double z = 0.0;
};

inline constexpr double kTMin = -9.0;  // sigma^2 >= exp(-18) ~ 1.5e-8
inline constexpr double kTMax = 4.0;   // sigma^2 <= exp(8) ~ 3e3
inline constexpr double kZMax = 8.0;   // |rho| <= tanh(8) ~ 1 - 2e-7

inline SigmaParam to_param(const BetweenStudyCov& s) {
  SigmaParam p;
  const double s1 = std::sqrt(std::max(s.sigma1sq, 0.0));
  const double s2 = std::sqrt(std::max(s.sigma2sq, 0.0));
  p.t1 = std::clamp(std::log(std::max(s1, 1e-12)), kTMin, kTMax);
  p.t2 = std::clamp(std::log(std::max(s2, 1e-12)), kTMin, kTMax);
  // Clamp the correlation exactly to the z box so a solution sitting on the
  // bound round-trips to the bound and gets flagged by at_bounds.
  const double rho_max = std::tanh(kZMax);
  const double rho = std::clamp(s.rho(), -rho_max, rho_max);
  p.z = std::clamp(std::atanh(rho), -kZMax, kZMax);
  return p;
}

inline BetweenStudyCov from_param(const SigmaParam& p) {
  BetweenStudyCov s;
  const double s1 = std::exp(p.t1);
  const double s2 = std::exp(p.t2);
  const double rho = std::tanh(p.z);
  s.sigma1sq = s1 * s1;
  s.sigma2sq = s2 * s2;
  s.sigma12 = rho * s1 * s2;
  return s;
}

// Chain rule: gradient w.r.t. (t1, t2, z) from gradient w.r.t.
// (sigma1sq, sigma2sq, sigma12) at the point p.
inline void chain_gradient(const SigmaParam& p, const double grad_v[3], double grad_t[3]) {
  const BetweenStudyCov s = from_param(p);
  const double s1 = std::exp(p.t1);
  const double s2 = std::exp(p.t2);
  const double rho = std::tanh(p.z);
  grad_t[0] = grad_v[0] * 2.0 * s.sigma1sq + grad_v[2] * s.sigma12;
  grad_t[1] = grad_v[1] * 2.0 * s.sigma2sq + grad_v[2] * s.sigma12;
  grad_t[2] = grad_v[2] * s1 * s2 * (1.0 - rho * rho);
}

inline bool at_bounds(const SigmaParam& p, double edge = 1e-6) {
  return p.t1 <= kTMin + edge || p.t1 >= kTMax - edge || p.t2 <= kTMin + edge ||
         p.t2 >= kTMax - edge || std::abs(p.z) >= kZMax - edge;
}

// d(Sigma)/d v_k for v = (sigma1sq, sigma2sq, sigma12).
inline const Eigen::Matrix2d& cov_basis(int k) {
  static const Eigen::Matrix2d b1 = (Eigen::Matrix2d() << 1, 0, 0, 0).finished();
  static const Eigen::Matrix2d b2 = (Eigen::Matrix2d() << 0, 0, 0, 1).finished();
  static const Eigen::Matrix2d b3 = (Eigen::Matrix2d() << 0, 1, 1, 0).finished();
  switch (k) {
    case 0: return b1;
    case 1: return b2;
    default: return b3;
  }
}

}  // namespace dtadpd::internal
