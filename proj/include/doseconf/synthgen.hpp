#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "doseconf/dataset.hpp"
#include "doseconf/random.hpp"

namespace doseconf {

/// One synthetic benchmark. Valid (setup, scenario) pairs: setup 1 with
/// scenarios 1-8, setup 2 with 1-2 and setup 3 with 1-2.
///
/// Every Normal(a, b) in the benchmark definitions is read as (mean, standard
/// deviation).
struct ScenarioSpec {
  int setup = 3;
  int scenario = 1;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  /// Multiplies every outcome noise term; 0 gives noiseless outcomes.
  double outcome_noise_scale = 1.0;

  void validate() const;
};

bool is_valid_scenario(int setup, int scenario);
/// 6 for setup 1, 1 for setup 2, 3 for setup 3.
std::size_t covariate_dim(int setup);

Dataset generate(const ScenarioSpec& spec);

/// Noise-free part of the outcome at covariates x under imposed treatment t.
double outcome_mean(const ScenarioSpec& spec, std::span<const double> x, double t);

/// One draw of the potential outcome Y(t) for covariates x, ignoring the
/// observational treatment mechanism.
double sample_counterfactual(const ScenarioSpec& spec, std::span<const double> x, double t, Rng& rng);
double sample_counterfactual(const ScenarioSpec& spec, std::span<const double> x, double t,
                             std::uint64_t noise_seed);

/// Exact log conditional density of T given x under the generator; -inf off
/// the support.
double treatment_log_density(int setup, int scenario, std::span<const double> x, double t);

/// Scale of the treatment assignment noise: the standard deviation for
/// normal and beta noise, the scale parameter (1) for Student-t(2), and the
/// pooled conditional standard deviation for the uniform mixture of setup 2
/// scenario 1.
double treatment_noise_scale(int setup, int scenario);

/// Linear-interpolation empirical quantile (type 7).
double empirical_quantile(std::span<const double> values, double q);

/// k equally spaced treatments between the 2% and 98% quantiles of the
/// training treatments.
std::vector<double> treatment_grid(const Dataset& train, std::size_t k);

}  // namespace doseconf
