#include "dtadpd/model.hpp"

#include <cmath>
#include <limits>

#include "dtadpd/error.hpp"

namespace dtadpd {

double BetweenStudyCov::rho() const {
  const double denom = std::sqrt(sigma1sq * sigma2sq);
  if (denom <= 0.0) return 0.0;
  return sigma12 / denom;
}

bool BetweenStudyCov::is_psd(double tol) const {
  if (sigma1sq < -tol || sigma2sq < -tol) return false;
  return sigma12 * sigma12 <= sigma1sq * sigma2sq + tol;
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DataError("logit: argument must lie in (0,1)");
  return std::log(p / (1.0 - p));
}

double inverse_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void validate(const StudyCounts& counts) {
  if (counts.tp < 0 || counts.fn < 0 || counts.fp < 0 || counts.tn < 0)
    throw DataError("study '" + counts.study_id + "': negative cell count");
  if (counts.diseased() < 1)
    throw DataError("study '" + counts.study_id + "': no diseased subjects (tp+fn = 0)");
  if (counts.non_diseased() < 1)
    throw DataError("study '" + counts.study_id + "': no non-diseased subjects (fp+tn = 0)");
}

LogitObservation logit_transform(const StudyCounts& counts, Correction correction) {
  validate(counts);
  const bool has_zero = counts.tp == 0 || counts.fn == 0 || counts.fp == 0 || counts.tn == 0;

  double add = 0.0;
  if (has_zero) {
    if (correction == Correction::None)
      throw DataError("study '" + counts.study_id +
                      "': zero cell and no continuity correction requested");
    add = 0.5;
  }

  const double tp = counts.tp + add;
  const double fn = counts.fn + add;
  const double fp = counts.fp + add;
  const double tn = counts.tn + add;

  LogitObservation obs;
  obs.study_id = counts.study_id;
  obs.y1 = std::log(tp / fn);
  obs.y2 = std::log(tn / fp);
  obs.s1sq = 1.0 / tp + 1.0 / fn;
  obs.s2sq = 1.0 / tn + 1.0 / fp;
  return obs;
}

MarginalPrecision marginal_precision(const LogitObservation& obs, const BetweenStudyCov& sigma) {
  const double v11 = obs.s1sq + sigma.sigma1sq;
  const double v22 = obs.s2sq + sigma.sigma2sq;
  const double v12 = sigma.sigma12;
  const double det = v11 * v22 - v12 * v12;
  if (!(det > 0.0) || !(v11 > 0.0))
    throw NumericalError("marginal_precision: S_i + Sigma is not positive definite (study '" +
                         obs.study_id + "')");
  MarginalPrecision w;
  w << v22 / det, -v12 / det, -v12 / det, v11 / det;
  return w;
}

}  // namespace dtadpd
