#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dtadpd/error.hpp"
#include "dtadpd/stats.hpp"

using namespace dtadpd;

namespace {

// Standard normal CDF straight from erfc, the reference the quantile must invert.
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Student t density, written out from the gamma-function normalizer.
double t_pdf(double x, double nu) {
  const double ln = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * M_PI) -
                    0.5 * (nu + 1.0) * std::log1p(x * x / nu);
  return std::exp(ln);
}

// CDF of the t distribution by composite Simpson over [0, t]. Slow but has no
// shared machinery with the code under test.
double t_cdf_simpson(double t, double nu) {
  const int panels = 4000;
  const double h = t / (2 * panels);
  double sum = t_pdf(0.0, nu) + t_pdf(t, nu);
  for (int i = 1; i < 2 * panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * t_pdf(i * h, nu);
  return 0.5 + sum * h / 3.0;
}

double binom_coef(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

}  // namespace

TEST_CASE("norm_quantile reproduces frozen reference points") {
  CHECK(norm_quantile(0.5) == 0.0);
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
  CHECK(norm_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-13));
  CHECK(norm_quantile(0.995) == doctest::Approx(2.5758293035489004).epsilon(1e-13));
  // Phi(1) and Phi(2) round-tripped.
  CHECK(norm_quantile(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(norm_quantile(0.9772498680518208) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("norm_quantile inverts the erfc cdf across the unit interval") {
  const std::vector<double> grid = {1e-12, 1e-9, 1e-6, 1e-4,  0.001, 0.01,
                                    0.1,   0.25, 0.4,  0.5,   0.6,   0.75,
                                    0.9,   0.99, 0.999,  1.0 - 1e-6, 1.0 - 1e-9};
  for (double p : grid) {
    const double x = norm_quantile(p);
    const double tail = std::min(p, 1.0 - p);
    // Residual measured against the smaller tail mass, so the deep tails are
    // held to a relative standard, not an absolute one.
    CHECK(std::abs(norm_cdf(x) - p) <= 1e-12 * tail);
  }
}

TEST_CASE("norm_quantile is antisymmetric and increasing") {
  const std::vector<double> grid = {0.001, 0.02, 0.1, 0.3, 0.45};
  for (double p : grid)
    CHECK(norm_quantile(1.0 - p) == doctest::Approx(-norm_quantile(p)).epsilon(1e-12));
  // Deeper in the tail 1 - p itself loses digits, so only the rounded tail
  // mass can be recovered.
  CHECK(norm_quantile(1.0 - 1e-8) == doctest::Approx(-norm_quantile(1e-8)).epsilon(1e-9));

  double prev = norm_quantile(1e-10);
  for (double p = 0.02; p < 1.0; p += 0.02) {
    const double x = norm_quantile(p);
    CHECK(x > prev);
    prev = x;
  }
}

TEST_CASE("incomplete_beta matches closed forms") {
  for (double x : {0.05, 0.2, 0.5, 0.77, 0.93}) {
    CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-14));
    CHECK(incomplete_beta(2.0, 2.0, x) == doctest::Approx(x * x * (3.0 - 2.0 * x)).epsilon(1e-13));
    // Arcsine law.
    CHECK(incomplete_beta(0.5, 0.5, x) ==
          doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(x))).epsilon(1e-12));
  }
  CHECK(incomplete_beta(3.0, 7.0, 0.0) == 0.0);
  CHECK(incomplete_beta(3.0, 7.0, 1.0) == 1.0);
}

TEST_CASE("incomplete_beta satisfies the reflection identity") {
  const double pairs[][2] = {{0.5, 3.5}, {2.0, 7.0}, {5.5, 0.5}, {1.5, 1.5}, {40.0, 2.5}};
  for (const auto& ab : pairs)
    for (double x : {0.01, 0.2, 0.5, 0.8, 0.99})
      CHECK(incomplete_beta(ab[0], ab[1], x) ==
            doctest::Approx(1.0 - incomplete_beta(ab[1], ab[0], 1.0 - x)).epsilon(1e-12));
}

TEST_CASE("incomplete_beta agrees with the binomial tail sum at integer arguments") {
  // I_x(a, b) = P(Bin(a+b-1, x) >= a) when a and b are integers.
  const int a = 3, b = 4;
  const int n = a + b - 1;
  for (double x : {0.1, 0.35, 0.5, 0.62, 0.9}) {
    double tail = 0.0;
    for (int j = a; j <= n; ++j)
      tail += binom_coef(n, j) * std::pow(x, j) * std::pow(1.0 - x, n - j);
    CHECK(incomplete_beta(a, b, x) == doctest::Approx(tail).epsilon(1e-12));
  }
}

TEST_CASE("t_quantile matches the closed forms at one and two degrees of freedom") {
  for (double p : {0.55, 0.6, 0.75, 0.9, 0.975, 0.995, 0.3, 0.05, 0.01}) {
    // nu = 1 is the Cauchy quantile.
    CHECK(t_quantile(p, 1.0) == doctest::Approx(std::tan(M_PI * (p - 0.5))).epsilon(1e-11));
    // nu = 2 has an elementary inverse as well.
    const double al = 2.0 * p - 1.0;
    CHECK(t_quantile(p, 2.0) ==
          doctest::Approx(al * std::sqrt(2.0 / (1.0 - al * al))).epsilon(1e-11));
  }
  CHECK(t_quantile(0.5, 7.0) == 0.0);
}

TEST_CASE("t_quantile is consistent with a numerically integrated cdf") {
  for (double nu : {3.0, 5.0, 14.0, 30.0})
    for (double p : {0.9, 0.95, 0.975, 0.995}) {
      const double t = t_quantile(p, nu);
      CHECK(t_cdf_simpson(t, nu) == doctest::Approx(p).epsilon(1e-10));
    }
}

TEST_CASE("t_quantile hits the usual table entry for 14 degrees of freedom") {
  CHECK(t_quantile(0.975, 14.0) == doctest::Approx(2.1448).epsilon(1e-4));
}

TEST_CASE("t_quantile is antisymmetric and approaches the normal limit") {
  for (double p : {0.05, 0.2, 0.4})
    for (double nu : {2.0, 6.0, 25.0})
      CHECK(t_quantile(1.0 - p, nu) == doctest::Approx(-t_quantile(p, nu)).epsilon(1e-12));

  // Leading Cornish-Fisher correction is (z^3 + z) / (4 nu), below 1e-7 here.
  for (double p : {0.9, 0.975, 0.995})
    CHECK(t_quantile(p, 1e8) == doctest::Approx(norm_quantile(p)).epsilon(1e-7));
}

TEST_CASE("quantile and beta functions reject out-of-range arguments") {
  CHECK_THROWS_AS(norm_quantile(0.0), DataError);
  CHECK_THROWS_AS(norm_quantile(1.0), DataError);
  CHECK_THROWS_AS(norm_quantile(-0.2), DataError);
  CHECK_THROWS_AS(norm_quantile(1.3), DataError);
  CHECK_THROWS_AS(t_quantile(0.0, 5.0), DataError);
  CHECK_THROWS_AS(t_quantile(1.0, 5.0), DataError);
  CHECK_THROWS_AS(t_quantile(0.9, 0.0), DataError);
  CHECK_THROWS_AS(t_quantile(0.9, -3.0), DataError);
  CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), DataError);
  CHECK_THROWS_AS(incomplete_beta(1.0, -1.0, 0.5), DataError);
  CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, -0.1), DataError);
  CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, 1.1), DataError);
}
