#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "doseconf/conformal.hpp"
#include "doseconf/error.hpp"
#include "doseconf/propensity.hpp"
#include "doseconf/random.hpp"
#include "doseconf/synthgen.hpp"

using namespace doseconf;

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

std::vector<double> random_covariates(int setup, Rng& rng) {
  const std::size_t d = covariate_dim(setup);
  std::vector<double> x(d);
  if (setup == 2) {
    x[0] = static_cast<double>(rng.uniform_int(1, 4));
  } else {
    for (auto& v : x) v = rng.normal(0.0, setup == 3 ? 5.0 : 1.0);
    if (setup == 1) {
      x[4] = static_cast<double>(rng.uniform_int(-2, 2));
      x[5] = rng.uniform(-3, 3);
    }
  }
  return x;
}

// Dataset with T independent of X and T ~ N(0, 1).
Dataset independent_treatments(std::size_t n, std::uint64_t seed) {
  Dataset d(2);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double x[2] = {rng.normal(), rng.uniform(-2, 2)};
    d.add(x, rng.normal(), 0.0);
  }
  return d;
}

}  // namespace

TEST_SUITE("weights") {
  TEST_CASE("w_global") {
    const TreatmentBounds b{0.0, 10.0};
    CHECK(w_global(0.5, 3.0, b) == 2.0);
    CHECK(w_global(0.5, 11.0, b) == 0.0);
    CHECK(w_global(0.5, -0.1, b) == 0.0);
    CHECK(w_global(1.0, 0.0, b) == 1.0);
    CHECK(w_global(1.0, 10.0, b) == 1.0);
    CHECK_THROWS_AS(w_global(0.0, 1.0, b), InvalidArgument);
    CHECK_THROWS_AS(w_global(-1.0, 1.0, b), InvalidArgument);
  }

  TEST_CASE("w_local") {
    const KernelConfig cfg{2.0, 0.0};
    CHECK(w_local(3.0, 3.0, cfg) == 1.0);
    CHECK(w_local(4.25, 3.0, cfg) == w_local(1.75, 3.0, cfg));
    CHECK(w_local(5.0, 3.0, cfg) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(std::exp(-0.5) == doctest::Approx(0.6065).epsilon(1e-4));
    CHECK_THROWS_AS(w_local(0, 0, KernelConfig{0.0, 0.0}), InvalidArgument);
  }

  TEST_CASE("bandwidth from sigma") {
    const auto cfg = KernelConfig::from_sigma(5.0);
    CHECK(cfg.bandwidth == doctest::Approx(2.0 * 1.0 * 1.0));
    CHECK(KernelConfig::from_sigma(4.0).bandwidth == doctest::Approx(2.0 * 0.8 * 0.8));
    CHECK_THROWS_AS(KernelConfig::from_sigma(0.0), InvalidArgument);
  }

  TEST_CASE("local-propensity weight equals the global weight at its own treatment") {
    const OraclePropensity pi(3, 1);
    const TreatmentBounds b{-20, 20};
    const auto cfg = KernelConfig::from_sigma(pi.sigma());
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
      const auto x = random_covariates(3, rng);
      const double t0 = rng.uniform(-25, 25);
      CHECK(w_local_prop(pi, x, t0, t0, cfg, b) == w_global(pi.density(x, t0), t0, b));
      const double lp = pi.log_density(x, t0);
      CHECK(log_w_local_prop(lp, t0, t0, cfg, b) == log_w_global(lp, t0, b));
    }
  }

  TEST_CASE("indicator zero forces a zero weight") {
    const OraclePropensity pi(3, 1);
    const std::vector<double> x{0, 0, 0};
    const TreatmentBounds b{-1, 1};
    CHECK(w_local_prop(pi, x, 1.5, 1.5, KernelConfig{1.0, 0}, b) == 0.0);
    CHECK(log_w_local_prop(pi.log_density(x, 1.5), 1.5, 1.5, KernelConfig{1.0, 0}, b) == -kInf);
  }

  TEST_CASE("constant propensity keeps the kernel ranking") {
    class Flat final : public PropensityModel {
     public:
      double log_density(std::span<const double>, double) const override { return std::log(0.25); }
      double sigma() const override { return 1.0; }
    } flat;
    const std::vector<double> x{0.0};
    const KernelConfig cfg{1.5, 0};
    const TreatmentBounds b{-100, 100};
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const double t0 = rng.uniform(-5, 5);
      const double a = rng.uniform(-5, 5);
      const double c = rng.uniform(-5, 5);
      CHECK((w_local_prop(flat, x, a, t0, cfg, b) < w_local_prop(flat, x, c, t0, cfg, b)) ==
            (w_local(a, t0, cfg) < w_local(c, t0, cfg)));
    }
  }

  TEST_CASE("effective sample size") {
    CHECK(effective_sample_size(std::vector<double>{1, 1, 1, 1}) == 4.0);
    CHECK(effective_sample_size(std::vector<double>{1, 0, 0, 0}) == 1.0);
    CHECK(effective_sample_size(std::vector<double>{2, 2, 2, 2}) == 4.0);
    CHECK_THROWS_AS(effective_sample_size(std::vector<double>{0, 0}), InvalidArgument);
    CHECK_THROWS_AS(effective_sample_size(std::vector<double>{1, -1}), InvalidArgument);
    Rng rng(5);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> w(static_cast<std::size_t>(rng.uniform_int(1, 50)));
      for (auto& v : w) v = rng.bernoulli(0.3) ? 0.0 : std::exp(rng.normal(0, 3));
      w[0] = 1.0;
      const double ess = effective_sample_size(w);
      CHECK(ess >= 1.0 - 1e-12);
      CHECK(ess <= static_cast<double>(w.size()) + 1e-9);
    }
  }
}

TEST_SUITE("oracle propensity") {
  TEST_CASE("setup 3 density at the mean") {
    const std::vector<double> x{0.0, 0.0, 7.0};
    CHECK(oracle_propensity(3, 1, x, 0.0) == doctest::Approx(kInvSqrt2Pi / 4.0).epsilon(1e-14));
    const std::vector<double> x2{10.0, -3.0, 0.0};
    CHECK(oracle_propensity(3, 2, x2, -2.0) == doctest::Approx(kInvSqrt2Pi / 4.0).epsilon(1e-14));
  }

  TEST_CASE("setup 1 scenario 1 peaks at its shifted mean") {
    const std::vector<double> x{0.3, -1.0, 0.5, 0.2, 1.0, -2.0};
    const double mu = -0.8 + 0.3 + 0.1 * -1.0 - 0.1 * 0.5 + 0.2 * 0.2 + 0.1 * 1.0 + 0.1 * -2.0;
    const double peak = 9.0 * mu + 17.0;
    CHECK(oracle_propensity(1, 1, x, peak) == doctest::Approx(kInvSqrt2Pi / 5.0).epsilon(1e-14));
    CHECK(oracle_propensity(1, 1, x, peak + 0.5) < oracle_propensity(1, 1, x, peak));
  }

  TEST_CASE("positive for every finite t in normal-noise scenarios") {
    const std::vector<double> x{0, 0, 0};
    for (double t : {-1e3, -50.0, 0.0, 33.0, 400.0}) CHECK(oracle_propensity(3, 1, x, t) >= 0.0);
    const OraclePropensity floored(3, 1);
    for (double t : {-1e6, 1e6}) CHECK(floored.density(x, t) >= kDefaultDensityFloor * (1 - 1e-12));
    CHECK(oracle_propensity(3, 1, x, 30.0) > 0.0);
  }

  TEST_CASE("unknown benchmarks are rejected") {
    const std::vector<double> x{0, 0, 0};
    CHECK_THROWS_AS(oracle_propensity(4, 1, x, 0.0), InvalidArgument);
    CHECK_THROWS_AS(oracle_propensity(3, 3, x, 0.0), InvalidArgument);
    CHECK_THROWS_AS(OraclePropensity(2, 5), InvalidArgument);
  }

  TEST_CASE("every oracle density integrates to one") {
    const std::vector<std::pair<int, int>> benches{{1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}, {1, 6},
                                                   {1, 7}, {1, 8}, {2, 1}, {2, 2}, {3, 1}, {3, 2}};
    Rng rng(21);
    for (const auto& [setup, scenario] : benches) {
      for (int rep = 0; rep < 3; ++rep) {
        const auto x = random_covariates(setup, rng);
        // Heavy t(2) tails need a wide window; mass beyond +-L is about 1/L^2.
        const double half = (setup == 1 && scenario == 2) ? 3000.0 : 400.0;
        const double step = (setup == 1 && scenario == 2) ? 0.002 : 0.005;
        double acc = 0.0;
        for (double t = -half; t <= half; t += step) acc += oracle_propensity(setup, scenario, x, t + 0.5 * step);
        CAPTURE(setup);
        CAPTURE(scenario);
        CHECK(acc * step == doctest::Approx(1.0).epsilon(1e-3));
      }
    }
  }
}

TEST_SUITE("estimated propensity") {
  TEST_CASE("independent N(0,1) treatments give about 0.399 at zero") {
    const auto train = independent_treatments(2500, 1);
    const auto cal = independent_treatments(1250, 2);
    PropensityOptions opt;
    opt.learner.n_rounds = 100;
    const auto est = PropensityEstimator::fit(train, cal, 3, opt);
    Rng rng(4);
    int close = 0;
    for (int i = 0; i < 100; ++i) {
      const double x[2] = {rng.normal(), rng.uniform(-2, 2)};
      close += std::abs(est.density(x, 0.0) / kInvSqrt2Pi - 1.0) <= 0.3;
    }
    CHECK(close >= 80);
  }

  TEST_CASE("translated residual KDE equals the per-row KDE") {
    const auto train = independent_treatments(300, 5);
    const auto cal = independent_treatments(150, 6);
    PropensityOptions opt;
    opt.learner.n_rounds = 30;
    const auto est = PropensityEstimator::fit(train, cal, 7, opt);
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
      const double x[2] = {rng.normal(), rng.uniform(-2, 2)};
      const auto direct = est.kde_for(x);
      const auto sample = est.predictive_sample(x);
      double mean = 0.0;
      for (double v : sample) mean += v;
      mean /= static_cast<double>(sample.size());
      double ss = 0.0;
      for (double v : sample) ss += (v - mean) * (v - mean);
      CHECK(std::sqrt(ss / static_cast<double>(sample.size() - 1)) == doctest::Approx(est.sigma()).epsilon(1e-9));
      CHECK(direct.bandwidth() == doctest::Approx(est.residual_kde().bandwidth()).epsilon(1e-9));
      for (double t : {-2.0, -0.3, 0.0, 1.1, 3.0}) {
        CHECK(est.log_density(x, t) == doctest::Approx(direct.log_density(t)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("deterministic, floored and finite") {
    const auto train = independent_treatments(200, 9);
    const auto cal = independent_treatments(100, 10);
    PropensityOptions opt;
    opt.learner.n_rounds = 20;
    opt.learner.subsample = 0.8;
    const auto a = PropensityEstimator::fit(train, cal, 11, opt);
    const auto b = PropensityEstimator::fit(train, cal, 11, opt);
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
      const double x[2] = {rng.normal(), rng.uniform(-2, 2)};
      const double t = rng.normal(0, 30);
      CHECK(a.log_density(x, t) == b.log_density(x, t));
      CHECK(a.density(x, t) >= opt.density_floor * (1 - 1e-12));
      CHECK(std::isfinite(a.log_density(x, t)));
    }
    for (double d : a.calibration_densities()) CHECK(d > 0.0);
  }

  TEST_CASE("degenerate treatments are a fit error") {
    Dataset train(1);
    for (int i = 0; i < 20; ++i) {
      const double x[1] = {static_cast<double>(i)};
      train.add(x, 3.0, 0.0);
    }
    CHECK_THROWS_AS(PropensityEstimator::fit(train, train, 0), FitError);
    CHECK_THROWS_AS(PropensityEstimator::fit(Dataset(1), train, 0), InvalidArgument);
  }

  TEST_CASE("diagnostics CSV") {
    ScenarioSpec spec{.setup = 3, .scenario = 1, .n = 400, .seed = 1};
    const auto data = split_dataset(generate(spec), {}, 2);
    PropensityOptions opt;
    opt.learner.n_rounds = 20;
    const auto est =
        PropensityEstimator::fit(data.part(SplitRole::Train), data.part(SplitRole::Calibration), 3, opt);
    std::stringstream out;
    const auto test = data.part(SplitRole::Test);
    write_propensity_diagnostics(test, OraclePropensity(3, 1), est, out);
    std::string line;
    std::getline(out, line);
    CHECK(line == "sample_id,t,pi_oracle,pi_hat");
    std::size_t rows = 0;
    while (std::getline(out, line)) ++rows;
    CHECK(rows == test.size());
  }
}
