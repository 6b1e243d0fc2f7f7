#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "doseconf/cadrf.hpp"
#include "doseconf/conformal.hpp"

namespace doseconf {

/// y - y_hat.
double conformity_signed(double y, double y_hat);

/// Q(r, phi) = P{R < r} + phi * P{R = r} under `dist`, where `dist` holds
/// signed conformity scores and the +inf atom of the test point.
double cps_q(const WeightedScoreDistribution& dist, double r_new, double phi);

/// Predictive distribution of a (weighted) split conformal predictive system
/// centred on the point prediction. Residual atoms with equal value are
/// merged, so the support is strictly increasing.
class PredictiveDistribution {
 public:
  PredictiveDistribution(double center, std::span<const double> residuals, std::span<const double> masses,
                         double infinity_mass, double phi);

  double center() const { return center_; }
  double phi() const { return phi_; }
  double infinity_mass() const { return infinity_mass_; }
  std::span<const double> residuals() const { return residuals_; }
  std::span<const double> masses() const { return masses_; }
  std::vector<double> support() const;

  /// Q(y - center, phi) with the stored tie randomizer.
  double cdf(double y) const { return cdf(y, phi_); }
  double cdf(double y, double phi) const;

  /// Smallest support value with P{Y <= y} >= level; +inf when not reached.
  double quantile(double level) const;
  /// Largest support value with P{Y >= y} >= level over the finite atoms;
  /// -inf when not reached.
  double lower_quantile(double level) const;
  /// Two-sided band [lower_quantile(1 - alpha/2), quantile(1 - alpha/2)].
  PredictionInterval interval(double alpha) const;

  /// `{"support": [...], "cdf": [...]}` with the CDF at each support point.
  nlohmann::json to_json() const;

 private:
  double center_;
  std::vector<double> residuals_;
  std::vector<double> masses_;
  double infinity_mass_;
  double phi_;
};

/// Signed residuals of the calibration rows, aligned with `cal`.
std::vector<double> signed_calibration_scores(const CadrfModel& model, const Dataset& cal);

PredictiveDistribution cps_predictive_distribution(const CadrfModel& model, const Dataset& cal,
                                                   const WeightFn& weight_fn, std::span<const double> x_new,
                                                   double t_new, double phi);

/// From precalibrated signed scores; `log_weight_new` is the test point's
/// log-weight (0 for the unweighted system).
PredictiveDistribution cps_predictive_distribution(const WeightedCalibration& signed_calibration, double center,
                                                   double log_weight_new, double phi);

}  // namespace doseconf
