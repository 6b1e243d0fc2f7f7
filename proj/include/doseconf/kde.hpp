#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "doseconf/random.hpp"

namespace doseconf {

enum class BandwidthRule {
  Silverman,  // 1.06 * sd * n^(-1/5), floored at 1e-3 * range
  Fixed,
};

struct BandwidthConfig {
  BandwidthRule rule = BandwidthRule::Silverman;
  double fixed = 0.0;  // used when rule == Fixed
};

/// Silverman's rule of thumb with a floor of 1e-3 * (max - min). Throws when
/// fewer than two distinct samples are given.
double silverman_bandwidth(std::span<const double> samples);

/// Equal-weight Gaussian kernel density estimate.
class KernelDensity {
 public:
  KernelDensity(std::vector<double> centers, double bandwidth);

  double log_density(double t) const;
  double density(double t) const;

  std::span<const double> centers() const { return centers_; }
  double bandwidth() const { return bandwidth_; }

 private:
  std::vector<double> centers_;  // sorted
  double bandwidth_;
  double log_norm_;
};

KernelDensity kde_fit(std::span<const double> samples, const BandwidthConfig& config = {});

/// KDE of a discrete distribution. Uniform masses use the support points as
/// centres directly; otherwise `n_draws` centres are resampled by mass.
KernelDensity kde_fit_weighted(std::span<const double> support, std::span<const double> masses, Rng& rng,
                               std::size_t n_draws, const BandwidthConfig& config = {});

}  // namespace doseconf
