#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "doseconf/cps.hpp"
#include "doseconf/error.hpp"
#include "doseconf/kde.hpp"
#include "doseconf/random.hpp"
#include "support.hpp"

using namespace doseconf;
using doseconf::testing::function_model;
using doseconf::testing::make_dataset;

namespace {

double ks_statistic(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const auto n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = std::clamp(u[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - v, v - static_cast<double>(i) / n});
  }
  return d;
}

double trapezoid(const KernelDensity& kde, double lo, double hi, int steps) {
  const double h = (hi - lo) / steps;
  double acc = 0.5 * (kde.density(lo) + kde.density(hi));
  for (int i = 1; i < steps; ++i) acc += kde.density(lo + i * h);
  return acc * h;
}

}  // namespace

TEST_SUITE("cps") {
  TEST_CASE("conformity_signed") {
    CHECK(conformity_signed(3, 3) == 0.0);
    CHECK(conformity_signed(5, 2) == 3.0);
    CHECK(conformity_signed(2, 5) == -3.0);
  }

  TEST_CASE("cps_q examples") {
    CHECK(cps_q({{1, 2, 3}, {0.25, 0.25, 0.25}, 0.25}, 0.5, 0.5) == 0.0);
    WeightedScoreDistribution nine;
    for (int i = 0; i < 9; ++i) {
      nine.scores.push_back(i);
      nine.weights.push_back(0.1);
    }
    nine.infinity_mass = 0.1;
    CHECK(cps_q(nine, 100.0, 0.0) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(cps_q({{-1, 0, 5}, {0.3, 0.2, 0.4}, 0.1}, 0.0, 0.5) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK_THROWS_AS(cps_q(nine, 0.0, 1.5), InvalidArgument);
  }

  TEST_CASE("cps_q is monotone and bounded") {
    Rng rng(10);
    for (int rep = 0; rep < 200; ++rep) {
      WeightedScoreDistribution d;
      const auto n = rng.uniform_int(1, 15);
      double total = 0.0;
      std::vector<double> raw(static_cast<std::size_t>(n) + 1);
      for (auto& w : raw) total += (w = rng.uniform(0.01, 1.0));
      for (long i = 0; i < n; ++i) {
        d.scores.push_back(static_cast<double>(rng.uniform_int(-4, 4)));
        d.weights.push_back(raw[static_cast<std::size_t>(i)] / total);
      }
      d.infinity_mass = raw.back() / total;
      const double phi = rng.uniform();
      double prev = -1.0;
      for (double r = -5.0; r <= 5.0; r += 0.25) {
        const double q = cps_q(d, r, phi);
        CHECK(q >= prev);
        CHECK(q >= 0.0);
        CHECK(q <= 1.0 - d.infinity_mass + 1e-12);
        prev = q;
      }
    }
  }

  TEST_CASE("predictive distribution support and CDF") {
    const auto cal = make_dataset({{0, 0, 2.0}, {0, 0, -1.0}, {0, 0, 2.0}, {0, 0, 0.5}});
    const double x[1] = {0.0};
    // mu(x, t) = t: calibration rows at t = 0 keep y as their residual.
    const auto model = function_model(1, [](auto r) { return r[1]; });
    const auto pd = cps_predictive_distribution(model, cal, [](auto, double) { return 1.0; }, x, 10.0, 0.5);
    CHECK(pd.support() == std::vector<double>{9.0, 10.5, 12.0});
    CHECK(pd.masses()[2] == doctest::Approx(0.4));
    CHECK(pd.cdf(8.0) == 0.0);
    CHECK(pd.cdf(10.5) == doctest::Approx(0.2 + 0.5 * 0.2));
    CHECK(pd.cdf(12.0, 1.0) == doctest::Approx(0.8));
    CHECK(pd.cdf(1e9) == doctest::Approx(0.8));
    double prev = 0.0;
    for (double y = 8.0; y < 13.0; y += 0.1) {
      CHECK(pd.cdf(y) >= prev);
      prev = pd.cdf(y);
    }
    const auto j = pd.to_json();
    CHECK(j["support"].size() == 3);
    CHECK(j["cdf"][1].get<double>() == doctest::Approx(0.3));
  }

  TEST_CASE("symmetric residuals give a band centred on the prediction") {
    const auto cal = make_dataset({{0, 0, -1.0}, {0, 0, 1.0}});
    const double x[1] = {0.0};
    const double y_hat = 3.0;
    const auto model = function_model(1, [](auto r) { return r[1]; });
    const auto pd = cps_predictive_distribution(model, cal, [](auto, double) { return 2.0; }, x, y_hat, 0.5);
    const double lo = pd.lower_quantile(0.5);
    const double hi = pd.quantile(0.5);
    CHECK(lo == 2.0);
    CHECK(hi == 4.0);
    CHECK(0.5 * (lo + hi) == y_hat);
    CHECK(pd.cdf(y_hat) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("infinity mass 0.5 saturates the CDF") {
    const PredictiveDistribution pd(0.0, std::vector<double>{-1, 0, 1}, std::vector<double>{0.2, 0.2, 0.1}, 0.5,
                                    0.5);
    CHECK(pd.cdf(1e12) == doctest::Approx(0.5));
    CHECK(pd.quantile(0.6) == kInf);
    CHECK(pd.quantile(0.5) == 1.0);
    CHECK(pd.interval(0.1).upper == kInf);
  }

  TEST_CASE("two-sided band covers at least 1 - alpha") {
    // y = x + N(0, 1), model mu = x; 98 calibration rows give a rank with slack.
    const double alpha = 0.1;
    std::size_t covered = 0;
    std::size_t total = 0;
    for (std::uint64_t run = 0; run < 30; ++run) {
      Rng rng(1000 + run);
      Dataset cal(1);
      for (int i = 0; i < 98; ++i) {
        const double x[1] = {rng.normal()};
        cal.add(x, 0.0, x[0] + rng.normal());
      }
      const auto model = function_model(1, [](auto r) { return r[0]; });
      const WeightedCalibration signed_cal(signed_calibration_scores(model, cal), std::vector<double>(98, 0.0));
      for (int k = 0; k < 200; ++k) {
        const double x = rng.normal();
        const double y = x + rng.normal();
        const auto band = cps_predictive_distribution(signed_cal, x, 0.0, 0.5).interval(alpha);
        covered += band.contains(y);
        ++total;
      }
    }
    CHECK(static_cast<double>(covered) / static_cast<double>(total) >= 1.0 - alpha);
  }

  TEST_CASE("PIT of the unweighted system is close to uniform") {
    Rng rng(31);
    std::vector<double> pit;
    for (int run = 0; run < 20; ++run) {
      Dataset cal(1);
      for (int i = 0; i < 300; ++i) {
        const double x[1] = {rng.normal()};
        cal.add(x, 0.0, 2.0 * x[0] + rng.normal());
      }
      const auto model = function_model(1, [](auto r) { return 2.0 * r[0] + 0.2; });
      const WeightedCalibration signed_cal(signed_calibration_scores(model, cal), std::vector<double>(300, 0.0));
      for (int k = 0; k < 100; ++k) {
        const double x = rng.normal();
        const double y = 2.0 * x + rng.normal();
        pit.push_back(cps_predictive_distribution(signed_cal, 2.0 * x + 0.2, 0.0, rng.uniform()).cdf(y));
      }
    }
    CHECK(ks_statistic(pit) < 1.6276 / std::sqrt(static_cast<double>(pit.size())));
  }
}

TEST_SUITE("kde") {
  TEST_CASE("two-centre mixture at zero") {
    const KernelDensity kde({-1.0, 1.0}, 1.0);
    CHECK(kde.density(0.0) == doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
  }

  TEST_CASE("density integrates to one") {
    Rng rng(4);
    std::vector<double> s(50);
    for (auto& v : s) v = rng.normal(3.0, 2.0);
    const auto kde = kde_fit(s);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double h = kde.bandwidth();
    CHECK(trapezoid(kde, *lo - 8 * h, *hi + 8 * h, 20000) == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("symmetric centres give a symmetric density") {
    const auto kde = kde_fit(std::vector<double>{-3.0, -0.5, 0.5, 3.0});
    for (double t : {0.1, 0.7, 2.0, 5.0}) CHECK(kde.density(t) == doctest::Approx(kde.density(-t)).epsilon(1e-14));
  }

  TEST_CASE("Silverman bandwidth and its floor") {
    const std::vector<double> s{1, 2, 3, 4, 5};
    const double sd = std::sqrt(2.5);
    CHECK(silverman_bandwidth(s) == doctest::Approx(1.06 * sd * std::pow(5.0, -0.2)));
    std::vector<double> clump(1000, 0.0);
    clump[0] = 1.0;
    CHECK(silverman_bandwidth(clump) >= 1e-3);
    CHECK_THROWS_AS(silverman_bandwidth(std::vector<double>{2, 2, 2}), InvalidArgument);
    CHECK_THROWS_AS(kde_fit(std::vector<double>{1.0}), InvalidArgument);
  }

  TEST_CASE("log density stays finite far from the centres") {
    const KernelDensity kde({0.0, 1.0}, 0.1);
    CHECK(std::isfinite(kde.log_density(1e3)));
    CHECK(kde.log_density(1e3) == doctest::Approx(-0.5 * std::pow((1e3 - 1.0) / 0.1, 2) - std::log(0.2) -
                                                  0.5 * std::log(2 * std::numbers::pi)));
  }

  TEST_CASE("weighted KDE resamples by mass") {
    Rng rng(9);
    const std::vector<double> support{0.0, 10.0};
    const auto uniform = kde_fit_weighted(support, std::vector<double>{0.5, 0.5}, rng, 100);
    CHECK(uniform.centers().size() == 2);
    const auto skewed = kde_fit_weighted(support, std::vector<double>{0.9, 0.1}, rng, 2000);
    const auto c = skewed.centers();
    const auto zeros = std::count(c.begin(), c.end(), 0.0);
    CHECK(zeros == doctest::Approx(1800).epsilon(0.05));
  }
}
