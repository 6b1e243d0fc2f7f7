#include "doseconf/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "doseconf/error.hpp"

namespace doseconf {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double normal_log_pdf(double t, double mean, double sd) {
  const double z = (t - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double student_t_log_pdf(double u, double df) {
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi) -
         0.5 * (df + 1.0) * std::log1p(u * u / df);
}

double beta_log_pdf(double u, double a, double b) {
  if (!(u > 0.0 && u < 1.0)) return -std::numeric_limits<double>::infinity();
  const double log_beta_fn = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) - log_beta_fn;
}

void check_dim(int setup, std::span<const double> x) {
  if (x.size() != covariate_dim(setup)) {
    throw InvalidArgument("setup " + std::to_string(setup) + " expects " + std::to_string(covariate_dim(setup)) +
                          " covariates");
  }
}

void check_scenario(int setup, int scenario) {
  if (!is_valid_scenario(setup, scenario)) {
    throw InvalidArgument("unknown benchmark setup " + std::to_string(setup) + " scenario " +
                          std::to_string(scenario));
  }
}

// ---- Setup 1 ---------------------------------------------------------------

constexpr double kBeta8Scale = 20.0;

double setup1_treatment_index(int scenario, std::span<const double> x) {
  double mu = -0.8 + x[0] + 0.1 * x[1] - 0.1 * x[2] + 0.2 * x[3] + 0.1 * x[4] + 0.1 * x[5];
  if (scenario == 3) mu += 1.5 * x[2] * x[2];
  return mu;
}

// Location of T before the assignment noise is added.
double setup1_treatment_location(int scenario, std::span<const double> x) {
  const double mu = setup1_treatment_index(scenario, x);
  switch (scenario) {
    case 1: return 9.0 * mu + 17.0;
    case 2: return 15.0 * mu + 22.0;
    case 3: return 9.0 * mu + 15.0;
    case 4: return 49.0 * std::exp(mu) / (1.0 + std::exp(mu)) - 6.0;
    case 5: return 42.0 / (1.0 + std::exp(mu)) + 18.0;
    case 6: return 7.0 * std::log(std::abs(mu) + 0.001) + 13.0;
    default: return 7.0 * mu + 16.0;  // scenarios 7 and 8
  }
}

double setup1_normal_sd(int scenario) {
  switch (scenario) {
    case 6: return 4.0;
    case 7: return 1.0;
    default: return 5.0;
  }
}

double setup1_treatment_noise(int scenario, Rng& rng) {
  switch (scenario) {
    case 2: return rng.student_t(2.0);
    case 8: return kBeta8Scale * rng.beta(2.0, 8.0);
    default: return rng.normal(0.0, setup1_normal_sd(scenario));
  }
}

double setup1_outcome_mean(std::span<const double> x, double t) {
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4], x6 = x[5];
  return -1.0 - (2.0 * x1 + 2.0 * x2 + 3.0 * x3 * x3 * x3 - 20.0 * x4 - 2.0 * x5 + 20.0 * x6) -
         0.1 * t * (1.0 - x1 + x4 + x5 + x3 * x3) + 0.13 * 0.13 * std::pow(std::abs(t), 3) * std::sin(x4);
}

// ---- Setup 2 ---------------------------------------------------------------

constexpr double kSetup2Upper = 40.0;
constexpr double kSetup2MixP = 0.3;

double setup2_treatment(int scenario, double x, Rng& rng) {
  if (scenario == 1) {
    const bool low = rng.bernoulli(kSetup2MixP);
    return low ? rng.uniform(0.0, 5.0 * x) : rng.uniform(5.0 * x, kSetup2Upper);
  }
  return rng.normal(5.0 * x, 10.0);
}

double setup2_mixture_variance(double x) {
  const double split = 5.0 * x;
  auto moments = [](double a, double b) {
    return std::array<double, 2>{0.5 * (a + b), (a * a + a * b + b * b) / 3.0};
  };
  const auto lo = moments(0.0, split);
  const auto hi = moments(split, kSetup2Upper);
  const double mean = kSetup2MixP * lo[0] + (1.0 - kSetup2MixP) * hi[0];
  const double second = kSetup2MixP * lo[1] + (1.0 - kSetup2MixP) * hi[1];
  return second - mean * mean;
}

// ---- Setup 3 ---------------------------------------------------------------

double setup3_outcome_mean(std::span<const double> x, double t) {
  const double q = 2.0 * (t - x[1]);
  return sign(x[2]) * q * q + 33.0 * t * sign(x[0]);
}

double outcome_noise(const ScenarioSpec& spec, std::span<const double> x, Rng& rng) {
  double noise = 0.0;
  switch (spec.setup) {
    case 1: noise = rng.normal(0.0, 5.0); break;
    case 2: noise = rng.normal(0.0, 0.1); break;
    case 3: {
      if (spec.scenario == 2) {
        const double hetero = rng.normal(0.0, 30.0);
        noise += 0.5 * (sign(x[2]) + 1.0) * hetero;
      }
      noise += rng.normal(0.0, 2.0);
      break;
    }
    default: break;
  }
  return spec.outcome_noise_scale * noise;
}

}  // namespace

bool is_valid_scenario(int setup, int scenario) {
  switch (setup) {
    case 1: return scenario >= 1 && scenario <= 8;
    case 2:
    case 3: return scenario == 1 || scenario == 2;
    default: return false;
  }
}

std::size_t covariate_dim(int setup) {
  switch (setup) {
    case 1: return 6;
    case 2: return 1;
    case 3: return 3;
    default: throw InvalidArgument("unknown benchmark setup " + std::to_string(setup));
  }
}

void ScenarioSpec::validate() const {
  check_scenario(setup, scenario);
  if (!(outcome_noise_scale >= 0.0) || !std::isfinite(outcome_noise_scale)) {
    throw InvalidArgument("outcome noise scale must be finite and non-negative");
  }
}

Dataset generate(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t dim = covariate_dim(spec.setup);
  Dataset data(dim);
  data.reserve(spec.n);
  Rng rng(spec.seed);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double t = 0.0;
    switch (spec.setup) {
      case 1:
        for (int j = 0; j < 4; ++j) x[j] = rng.normal(0.0, 1.0);
        x[4] = static_cast<double>(rng.uniform_int(-2, 2));
        x[5] = rng.uniform(-3.0, 3.0);
        t = setup1_treatment_location(spec.scenario, x) + setup1_treatment_noise(spec.scenario, rng);
        break;
      case 2:
        x[0] = static_cast<double>(rng.uniform_int(1, 4));
        t = setup2_treatment(spec.scenario, x[0], rng);
        break;
      case 3:
        for (auto& v : x) v = rng.normal(0.0, 5.0);
        t = rng.normal(x[1] + 0.1 * x[0], 4.0);
        break;
    }
    const double y = outcome_mean(spec, x, t) + outcome_noise(spec, x, rng);
    data.add(x, t, y);
  }
  return data;
}

double outcome_mean(const ScenarioSpec& spec, std::span<const double> x, double t) {
  check_scenario(spec.setup, spec.scenario);
  check_dim(spec.setup, x);
  switch (spec.setup) {
    case 1: return setup1_outcome_mean(x, t);
    case 2: return std::sin(0.05 * std::numbers::pi * (t - x[0]));
    default: return setup3_outcome_mean(x, t);
  }
}

double sample_counterfactual(const ScenarioSpec& spec, std::span<const double> x, double t, Rng& rng) {
  return outcome_mean(spec, x, t) + outcome_noise(spec, x, rng);
}

double sample_counterfactual(const ScenarioSpec& spec, std::span<const double> x, double t,
                             std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  return sample_counterfactual(spec, x, t, rng);
}

double treatment_log_density(int setup, int scenario, std::span<const double> x, double t) {
  check_scenario(setup, scenario);
  check_dim(setup, x);
  switch (setup) {
    case 1: {
      const double loc = setup1_treatment_location(scenario, x);
      if (scenario == 2) return student_t_log_pdf(t - loc, 2.0);
      if (scenario == 8) return beta_log_pdf((t - loc) / kBeta8Scale, 2.0, 8.0) - std::log(kBeta8Scale);
      return normal_log_pdf(t, loc, setup1_normal_sd(scenario));
    }
    case 2: {
      if (scenario == 2) return normal_log_pdf(t, 5.0 * x[0], 10.0);
      const double split = 5.0 * x[0];
      if (t >= 0.0 && t < split) return std::log(kSetup2MixP / split);
      if (t >= split && t <= kSetup2Upper) return std::log((1.0 - kSetup2MixP) / (kSetup2Upper - split));
      return -std::numeric_limits<double>::infinity();
    }
    default: return normal_log_pdf(t, x[1] + 0.1 * x[0], 4.0);
  }
}

double treatment_noise_scale(int setup, int scenario) {
  check_scenario(setup, scenario);
  switch (setup) {
    case 1:
      if (scenario == 2) return 1.0;
      if (scenario == 8) return kBeta8Scale * std::sqrt(2.0 * 8.0 / (10.0 * 10.0 * 11.0));
      return setup1_normal_sd(scenario);
    case 2: {
      if (scenario == 2) return 10.0;
      double pooled = 0.0;
      for (int x = 1; x <= 4; ++x) pooled += setup2_mixture_variance(x);
      return std::sqrt(pooled / 4.0);
    }
    default: return 4.0;
  }
}

double empirical_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> treatment_grid(const Dataset& train, std::size_t k) {
  if (k < 2) throw InvalidArgument("treatment grid needs at least two points");
  if (train.empty()) throw InvalidArgument("treatment grid needs training treatments");
  const double lo = empirical_quantile(train.treatments(), 0.02);
  const double hi = empirical_quantile(train.treatments(), 0.98);
  if (!(hi > lo)) throw InvalidArgument("training treatments have a degenerate range");
  std::vector<double> grid(k);
  const double step = (hi - lo) / static_cast<double>(k - 1);
  for (std::size_t i = 0; i < k; ++i) grid[i] = lo + step * static_cast<double>(i);
  grid.back() = hi;
  return grid;
}

}  // namespace doseconf
