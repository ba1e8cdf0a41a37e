#pragma once

namespace dtadpd {

// Standard normal quantile. Rational approximation refined with one Halley
// step against erfc, good to well under 1e-12 across (0, 1).
double norm_quantile(double p);

// Student t quantile with nu > 0 degrees of freedom, through inversion of the
// regularized incomplete beta function.
double t_quantile(double p, double nu);

// Regularized incomplete beta I_x(a, b), exposed for the t distribution and
// its tests.
double incomplete_beta(double a, double b, double x);

}  // namespace dtadpd
