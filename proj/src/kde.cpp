#include "doseconf/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "doseconf/error.hpp"

namespace doseconf {

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidArgument("KDE needs at least two samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw InvalidArgument("KDE samples are all identical; bandwidth would be zero");
  const auto n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return std::max(1.06 * sd * std::pow(n, -0.2), 1e-3 * range);
}

KernelDensity::KernelDensity(std::vector<double> centers, double bandwidth)
    : centers_(std::move(centers)), bandwidth_(bandwidth) {
  if (centers_.empty()) throw InvalidArgument("KDE needs at least one centre");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw InvalidArgument("KDE bandwidth must be positive");
  std::sort(centers_.begin(), centers_.end());
  log_norm_ = std::log(static_cast<double>(centers_.size()) * bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
}

double KernelDensity::log_density(double t) const {
  // Log-sum-exp anchored at the nearest centre, whose term is the largest.
  const auto it = std::lower_bound(centers_.begin(), centers_.end(), t);
  double nearest = std::numeric_limits<double>::infinity();
  if (it != centers_.end()) nearest = std::abs(*it - t);
  if (it != centers_.begin()) nearest = std::min(nearest, std::abs(*(it - 1) - t));
  const double u_min = nearest / bandwidth_;
  const double anchor = -0.5 * u_min * u_min;
  double acc = 0.0;
  for (double c : centers_) {
    const double u = (t - c) / bandwidth_;
    acc += std::exp(-0.5 * u * u - anchor);
  }
  return anchor + std::log(acc) - log_norm_;
}

double KernelDensity::density(double t) const { return std::exp(log_density(t)); }

KernelDensity kde_fit(std::span<const double> samples, const BandwidthConfig& config) {
  double h = 0.0;
  if (config.rule == BandwidthRule::Fixed) {
    h = config.fixed;
  } else {
    h = silverman_bandwidth(samples);
  }
  return KernelDensity(std::vector<double>(samples.begin(), samples.end()), h);
}

KernelDensity kde_fit_weighted(std::span<const double> support, std::span<const double> masses, Rng& rng,
                               std::size_t n_draws, const BandwidthConfig& config) {
  if (support.size() != masses.size()) throw InvalidArgument("support and masses differ in length");
  if (support.empty()) throw InvalidArgument("empty support");
  const auto [lo, hi] = std::minmax_element(masses.begin(), masses.end());
  if (*hi - *lo <= 1e-12 * *hi) return kde_fit(support, config);
  if (n_draws < 2) throw InvalidArgument("weighted KDE needs at least two draws");
  std::discrete_distribution<std::size_t> pick(masses.begin(), masses.end());
  std::vector<double> draws(n_draws);
  for (auto& d : draws) d = support[pick(rng.engine())];
  return kde_fit(draws, config);
}

}  // namespace doseconf
