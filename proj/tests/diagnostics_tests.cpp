#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dtadpd/baseline.hpp"
#include "dtadpd/diagnostics.hpp"
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

double ks_statistic(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    d = std::max(d, std::max(std::abs(f - (i + 1) / n), std::abs(f - i / n)));
  }
  return d;
}

}  // namespace

TEST_CASE("contribution matrices sum to the identity") {
  const auto data = make_data(18, 11, kMu, kSigma);
  const auto fit = fit_dpd(data, 0.4);
  REQUIRE(fit.converged);

  const auto parts = contribution_matrices(data, fit);
  REQUIRE(parts.size() == data.size());
  Eigen::Matrix2d total = Eigen::Matrix2d::Zero();
  for (const auto& u : parts) total += u;
  CHECK((total - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-10);

  // Each part is the share formula written out directly.
  Eigen::Matrix2d denom = Eigen::Matrix2d::Zero();
  for (const auto& d : data)
    denom += dpd_weight(d, fit.mu_hat, fit.sigma_hat, fit.alpha) *
             marginal_precision(d, fit.sigma_hat);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::Matrix2d expect =
        denom.inverse() * (dpd_weight(data[i], fit.mu_hat, fit.sigma_hat, fit.alpha) *
                           marginal_precision(data[i], fit.sigma_hat));
    CHECK((parts[i] - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("contribution rates normalize the diagonal shares") {
  const auto data = make_data(14, 23, kMu, kSigma);
  const auto fit = fit_dpd(data, 1.0 / 3.0);
  REQUIRE(fit.converged);

  const auto parts = contribution_matrices(data, fit);
  const auto rates = contribution_rates(data, fit);
  REQUIRE(rates.se.size() == data.size());
  REQUIRE(rates.sp.size() == data.size());

  double sum_se = 0.0, sum_sp = 0.0, raw_se = 0.0, raw_sp = 0.0;
  for (const auto& u : parts) {
    raw_se += std::abs(u(0, 0));
    raw_sp += std::abs(u(1, 1));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(rates.se[i] >= 0.0);
    CHECK(rates.sp[i] >= 0.0);
    CHECK(rates.se[i] == doctest::Approx(std::abs(parts[i](0, 0)) / raw_se).epsilon(1e-12));
    CHECK(rates.sp[i] == doctest::Approx(std::abs(parts[i](1, 1)) / raw_sp).epsilon(1e-12));
    sum_se += rates.se[i];
    sum_sp += rates.sp[i];
  }
  CHECK(sum_se == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sum_sp == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dpd_weight_report strips the density power factor") {
  auto data = make_data(10, 41, kMu, kSigma);
  // Plant one study exactly on the pooled mean so its weight must be one.
  data.push_back(data.back());
  data.back().study_id = "on-mean";

  auto fit = fit_dpd(data, 0.5);
  data.back().y1 = fit.mu_hat.mu1;
  data.back().y2 = fit.mu_hat.mu2;

  const auto w = dpd_weight_report(data, fit);
  REQUIRE(w.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(w[i] > 0.0);
    CHECK(w[i] <= 1.0 + 1e-12);
    // exp(-alpha/2 r'Wr) recomputed long-hand.
    const Eigen::Vector2d r = data[i].y() - fit.mu_hat.vec();
    const Eigen::Matrix2d wm = marginal_precision(data[i], fit.sigma_hat);
    const double expect = std::exp(-0.5 * fit.alpha * r.dot(wm * r));
    CHECK(w[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(w.back() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("standardized residuals follow the marginal formula and null law") {
  const auto data = make_data(5000, 7, kMu, kSigma);

  const auto resid = standardized_residuals(data, kMu, kSigma);
  REQUIRE(resid.size() == data.size());
  for (std::size_t i = 0; i < 25; ++i) {
    CHECK(resid[i][0] == doctest::Approx((data[i].y1 - kMu.mu1) /
                                         std::sqrt(data[i].s1sq + kSigma.sigma1sq))
                             .epsilon(1e-14));
    CHECK(resid[i][1] == doctest::Approx((data[i].y2 - kMu.mu2) /
                                         std::sqrt(data[i].s2sq + kSigma.sigma2sq))
                             .epsilon(1e-14));
  }

  // At the generating parameters each margin is standard normal, so the
  // empirical law should sit close to it at this sample size.
  std::vector<double> r1, r2;
  for (const auto& r : resid) {
    r1.push_back(r[0]);
    r2.push_back(r[1]);
  }
  CHECK(ks_statistic(r1) < 0.03);
  CHECK(ks_statistic(r2) < 0.03);
}

TEST_CASE("an outlier shows up in weight, rate, and residual at once") {
  auto data = make_data(15, 67, kMu, kSigma);
  data.push_back(LogitObservation{"outlier", kMu.mu1 - 5.0, kMu.mu2 + 5.0, 0.05, 0.05});

  const auto fit = fit_dpd(data, 0.5);
  REQUIRE(fit.converged);
  const auto bl = fit_baseline(data, BaselineMethod::REML);
  const auto table = diagnose(data, fit, bl);
  REQUIRE(table.size() == data.size());

  const auto& out = table.back();
  CHECK(out.study_id == "outlier");
  for (std::size_t i = 0; i + 1 < table.size(); ++i) {
    CHECK(out.weight < table[i].weight);
    CHECK(out.p_se < table[i].p_se);
    CHECK(out.p_sp < table[i].p_sp);
    CHECK(std::abs(out.resid_se) > std::abs(table[i].resid_se));
    CHECK(std::abs(out.resid_sp) > std::abs(table[i].resid_sp));
  }
  // Nearly no say in the pooled estimate.
  CHECK(out.p_se < 0.01);
  CHECK(out.p_sp < 0.01);
}

TEST_CASE("diagnose splices the component reports together") {
  const auto data = make_data(9, 83, kMu, kSigma);
  const auto fit = fit_dpd(data, 0.4);
  const auto bl = fit_baseline(data, BaselineMethod::ML);

  const auto table = diagnose(data, fit, bl);
  const auto w = dpd_weight_report(data, fit);
  const auto rates = contribution_rates(data, fit);
  const auto resid = standardized_residuals(data, bl.mu_hat, bl.sigma_hat);

  REQUIRE(table.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(table[i].study_id == data[i].study_id);
    CHECK(table[i].weight == w[i]);
    CHECK(table[i].p_se == rates.se[i]);
    CHECK(table[i].p_sp == rates.sp[i]);
    CHECK(table[i].resid_se == resid[i][0]);
    CHECK(table[i].resid_sp == resid[i][1]);
  }
}

TEST_CASE("diagnostics reject empty input") {
  const auto data = make_data(6, 3, kMu, kSigma);
  const auto fit = fit_dpd(data, 0.4);
  std::vector<LogitObservation> empty;
  CHECK_THROWS_AS(contribution_matrices(empty, fit), DataError);
  CHECK_THROWS_AS(contribution_rates(empty, fit), DataError);
}
