#include "doseconf/cps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doseconf/error.hpp"

namespace doseconf {

namespace {

void check_phi(double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw InvalidArgument("tie randomizer phi must lie in [0, 1]");
}

}  // namespace

double conformity_signed(double y, double y_hat) { return y - y_hat; }

double cps_q(const WeightedScoreDistribution& dist, double r_new, double phi) {
  check_phi(phi);
  dist.validate();
  double below = 0.0;
  double equal = 0.0;
  for (std::size_t i = 0; i < dist.scores.size(); ++i) {
    if (dist.scores[i] < r_new) {
      below += dist.weights[i];
    } else if (dist.scores[i] == r_new) {
      equal += dist.weights[i];
    }
  }
  if (r_new == kInf) equal += dist.infinity_mass;
  return std::clamp(below + phi * equal, 0.0, 1.0);
}

PredictiveDistribution::PredictiveDistribution(double center, std::span<const double> residuals,
                                               std::span<const double> masses, double infinity_mass, double phi)
    : center_(center), infinity_mass_(infinity_mass), phi_(phi) {
  check_phi(phi);
  if (residuals.size() != masses.size()) throw InvalidArgument("residuals and masses differ in length");
  if (!std::isfinite(center)) throw InvalidArgument("predictive distribution centre must be finite");
  std::vector<std::size_t> order(residuals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return residuals[a] < residuals[b]; });
  double total = infinity_mass;
  for (std::size_t k : order) {
    if (!std::isfinite(residuals[k]) || !(masses[k] >= 0.0)) {
      throw InvalidArgument("residuals must be finite and masses non-negative");
    }
    total += masses[k];
    if (!residuals_.empty() && residuals_.back() == residuals[k]) {
      masses_.back() += masses[k];
    } else {
      residuals_.push_back(residuals[k]);
      masses_.push_back(masses[k]);
    }
  }
  if (total > 1.0 + 1e-9) throw InvalidArgument("predictive masses exceed one");
}

std::vector<double> PredictiveDistribution::support() const {
  std::vector<double> out(residuals_.size());
  std::transform(residuals_.begin(), residuals_.end(), out.begin(), [this](double r) { return center_ + r; });
  return out;
}

double PredictiveDistribution::cdf(double y, double phi) const {
  check_phi(phi);
  const double r = conformity_signed(y, center_);
  double below = 0.0;
  double equal = 0.0;
  for (std::size_t i = 0; i < residuals_.size(); ++i) {
    if (residuals_[i] < r) {
      below += masses_[i];
    } else if (residuals_[i] == r) {
      equal += masses_[i];
    } else {
      break;
    }
  }
  if (r == kInf) equal += infinity_mass_;
  return std::clamp(below + phi * equal, 0.0, 1.0);
}

double PredictiveDistribution::quantile(double level) const {
  detail::check_level(level, "quantile level");
  return center_ + detail::quantile_sorted(residuals_, masses_, level);
}

double PredictiveDistribution::lower_quantile(double level) const {
  detail::check_level(level, "quantile level");
  const double target = level - kMassTolerance;
  double tail = 0.0;
  for (std::size_t k = residuals_.size(); k-- > 0;) {
    tail += masses_[k];
    if (tail >= target) return center_ + residuals_[k];
  }
  return -kInf;
}

PredictionInterval PredictiveDistribution::interval(double alpha) const {
  detail::check_level(alpha, "alpha");
  return {lower_quantile(1.0 - alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

nlohmann::json PredictiveDistribution::to_json() const {
  const auto sup = support();
  std::vector<double> cdf_values(sup.size());
  // Cumulative form of cdf(): mass strictly below plus phi times the atom.
  double below = 0.0;
  for (std::size_t i = 0; i < sup.size(); ++i) {
    cdf_values[i] = std::clamp(below + phi_ * masses_[i], 0.0, 1.0);
    below += masses_[i];
  }
  return nlohmann::json{{"support", sup}, {"cdf", cdf_values}};
}

std::vector<double> signed_calibration_scores(const CadrfModel& model, const Dataset& cal) {
  const auto pred = model.predict(cal);
  std::vector<double> scores(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) scores[i] = conformity_signed(cal.y(i), pred[i]);
  return scores;
}

PredictiveDistribution cps_predictive_distribution(const CadrfModel& model, const Dataset& cal,
                                                   const WeightFn& weight_fn, std::span<const double> x_new,
                                                   double t_new, double phi) {
  if (cal.empty()) throw InvalidArgument("calibration split is empty");
  const auto scores = signed_calibration_scores(model, cal);
  std::vector<double> log_weights(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    const double w = weight_fn(cal.x(i), cal.t(i));
    if (std::isnan(w) || w < 0.0 || w == kInf) throw InvalidArgument("weight must be finite and non-negative");
    log_weights[i] = std::log(w);
  }
  const double w_new = weight_fn(x_new, t_new);
  if (!(w_new > 0.0) || w_new == kInf) throw InvalidArgument("weight at the test point must be positive");
  const WeightedCalibration calibration(scores, log_weights);
  return cps_predictive_distribution(calibration, model.predict(x_new, t_new), std::log(w_new), phi);
}

PredictiveDistribution cps_predictive_distribution(const WeightedCalibration& signed_calibration, double center,
                                                   double log_weight_new, double phi) {
  const auto dist = signed_calibration.distribution(log_weight_new);
  return PredictiveDistribution(center, dist.scores, dist.weights, dist.infinity_mass, phi);
}

}  // namespace doseconf
