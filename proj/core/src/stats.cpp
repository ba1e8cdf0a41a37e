#include "dtadpd/stats.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dtadpd/error.hpp"

namespace dtadpd {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;

// Acklam's rational approximation to the probit, then one Halley step.
double probit_seed(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw DataError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0) || !(x <= 1.0)) throw DataError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double norm_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw DataError("norm_quantile: p must lie in (0, 1), got " + std::to_string(p));
  double x = probit_seed(p);
  // Halley refinement against the erfc-based CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double t_quantile(double p, double nu) {
  if (!(p > 0.0) || !(p < 1.0))
    throw DataError("t_quantile: p must lie in (0, 1), got " + std::to_string(p));
  if (!(nu > 0.0)) throw DataError("t_quantile: degrees of freedom must be positive");
  if (p == 0.5) return 0.0;

  // Two-sided tail mass q solves I_x(nu/2, 1/2) = q at x = nu/(nu + t^2).
  const double q = 2.0 * std::min(p, 1.0 - p);
  const double a = 0.5 * nu;
  const double b = 0.5;

  // Invert by bracketed Newton on f(x) = I_x(a, b) - q over (0, 1).
  double lo = 0.0, hi = 1.0;
  double x = 0.5;
  {
    // Seed from the normal approximation when it lands inside the bracket.
    const double z = probit_seed(1.0 - q / 2.0);
    const double seed = nu / (nu + z * z);
    if (seed > 0.0 && seed < 1.0) x = seed;
  }
  const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  for (int it = 0; it < 200; ++it) {
    const double f = incomplete_beta(a, b, x) - q;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    if (std::abs(f) < 1e-15) break;
    const double ln_pdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - ln_beta;
    double step = f * std::exp(-ln_pdf);
    double next = x - step;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-17 * (1.0 + std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }

  const double t = std::sqrt(nu * (1.0 - x) / x);
  return p < 0.5 ? -t : t;
}

}  // namespace dtadpd
