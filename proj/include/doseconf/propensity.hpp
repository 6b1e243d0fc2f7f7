#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "doseconf/dataset.hpp"
#include "doseconf/kde.hpp"
#include "doseconf/learner.hpp"

namespace doseconf {

inline constexpr double kDefaultDensityFloor = 1e-12;

/// Conditional treatment density pi(t | x) (the generalized propensity score).
class PropensityModel {
 public:
  virtual ~PropensityModel() = default;
  /// log pi(t | x), never below log(density floor).
  virtual double log_density(std::span<const double> x, double t) const = 0;
  double density(std::span<const double> x, double t) const;
  /// Standard deviation of the propensity distribution, used for the kernel
  /// bandwidth.
  virtual double sigma() const = 0;
};

/// Closed-form treatment density of a synthetic benchmark.
class OraclePropensity final : public PropensityModel {
 public:
  OraclePropensity(int setup, int scenario, double floor = kDefaultDensityFloor);
  double log_density(std::span<const double> x, double t) const override;
  /// Generator's treatment noise scale.
  double sigma() const override;

 private:
  int setup_;
  int scenario_;
  double log_floor_;
};

/// Exact oracle density without flooring.
double oracle_propensity(int setup, int scenario, std::span<const double> x, double t);

struct PropensityOptions {
  GbtParams learner{};
  BandwidthConfig bandwidth{};
  double density_floor = kDefaultDensityFloor;
};

/// Propensity estimate built from a conformal predictive system: a learner
/// regresses t on x over the training split, the calibration split supplies
/// signed residuals, and the density at (x, t) is a Gaussian KDE of the
/// predictive sample m(x) + r_j evaluated at t.
///
/// The predictive sample for any x is the same residual set translated by
/// m(x), and the bandwidth rule is translation invariant, so one KDE over the
/// residuals serves every query: pi(t | x) = kde(t - m(x)).
class PropensityEstimator final : public PropensityModel {
 public:
  static PropensityEstimator fit(const Dataset& train, const Dataset& cal, std::uint64_t seed,
                                 const PropensityOptions& options = {});

  double log_density(std::span<const double> x, double t) const override;
  /// Sample standard deviation of the calibration residuals, i.e. of every
  /// predictive sample.
  double sigma() const override { return sigma_; }

  double predict_mean(std::span<const double> x) const;
  /// Support of the predictive system for covariates x.
  std::vector<double> predictive_sample(std::span<const double> x) const;
  /// KDE fitted directly on predictive_sample(x).
  KernelDensity kde_for(std::span<const double> x) const;
  /// Density of each calibration row at its observed treatment.
  std::vector<double> calibration_densities() const;

  const KernelDensity& residual_kde() const { return residual_kde_; }
  double density_floor() const { return floor_; }

 private:
  PropensityEstimator(std::shared_ptr<const RegressionLearner> learner, std::vector<double> residuals,
                      KernelDensity residual_kde, BandwidthConfig bandwidth, double floor, Dataset cal);

  std::shared_ptr<const RegressionLearner> learner_;
  std::vector<double> residuals_;
  KernelDensity residual_kde_;
  BandwidthConfig bandwidth_;
  double floor_;
  double log_floor_;
  double sigma_;
  Dataset cal_;
};

/// Treatment range [lower, upper] of the interventional target.
struct TreatmentBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double t) const { return lower <= t && t <= upper; }
};

/// Gaussian kernel settings for local weights.
struct KernelConfig {
  double bandwidth = 1.0;
  double sigma_pi = 0.0;

  /// h = 2 * (0.2 * sigma)^2.
  static KernelConfig from_sigma(double sigma);
  void validate() const;
};

/// Global propensity weight: 1/pi inside the bounds, 0 outside.
double w_global(double pi, double t, const TreatmentBounds& bounds);
/// Unnormalized Gaussian kernel exp(-u^2 / 2), u = (t_i - t0) / h.
double w_local(double t_i, double t0, const KernelConfig& cfg);
/// Indicator * kernel / pi(t_i | x).
double w_local_prop(const PropensityModel& propensity, std::span<const double> x, double t_i, double t0,
                    const KernelConfig& cfg, const TreatmentBounds& bounds);

/// Log-space forms taking log pi; they return -inf for zero weights.
double log_w_global(double log_pi, double t, const TreatmentBounds& bounds);
double log_w_local(double t_i, double t0, const KernelConfig& cfg);
double log_w_local_prop(double log_pi, double t_i, double t0, const KernelConfig& cfg,
                        const TreatmentBounds& bounds);

/// (sum w)^2 / sum w^2. Throws when no weight is positive.
double effective_sample_size(std::span<const double> weights);

/// CSV `sample_id,t,pi_oracle,pi_hat` over the rows of `data`.
void write_propensity_diagnostics(const Dataset& data, const PropensityModel& oracle,
                                  const PropensityModel& estimated, std::ostream& out);

}  // namespace doseconf
