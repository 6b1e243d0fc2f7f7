#include "doseconf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doseconf/error.hpp"

namespace doseconf {

namespace detail {

void check_level(double level, const char* what) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidArgument(std::string(what) + " must lie in (0, 1), got " + std::to_string(level));
  }
}

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

double quantile_sorted(std::span<const double> sorted_scores, std::span<const double> masses, double level) {
  const double target = level - kMassTolerance;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < sorted_scores.size(); ++i) {
    cumulative += masses[i];
    if (cumulative >= target) return sorted_scores[i];
  }
  return kInf;
}

}  // namespace detail

void WeightedScoreDistribution::validate() const {
  if (scores.size() != weights.size()) throw InvalidArgument("scores and weights differ in length");
  double total = infinity_mass;
  if (!(infinity_mass >= 0.0) || !std::isfinite(infinity_mass)) {
    throw InvalidArgument("infinity mass must be finite and non-negative");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InvalidArgument("scores must be finite");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw InvalidArgument("point masses must be finite and non-negative");
    }
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("point masses must sum to 1");
}

void to_json(nlohmann::json& j, const PredictionInterval& iv) {
  auto bound = [](double v) -> nlohmann::json {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
  };
  j = nlohmann::json{{"lower", bound(iv.lower)}, {"upper", bound(iv.upper)}};
}

void from_json(const nlohmann::json& j, PredictionInterval& iv) {
  auto bound = [](const nlohmann::json& v) {
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return kInf;
      if (s == "-inf") return -kInf;
      throw InvalidArgument("unknown interval bound '" + s + "'");
    }
    return v.get<double>();
  };
  iv.lower = bound(j.at("lower"));
  iv.upper = bound(j.at("upper"));
}

double nonconformity_abs(double y, double y_hat) { return std::abs(y - y_hat); }

double weighted_quantile(const WeightedScoreDistribution& dist, double level) {
  detail::check_level(level, "quantile level");
  dist.validate();
  std::vector<std::size_t> order(dist.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist.scores[a] < dist.scores[b]; });
  std::vector<double> scores(order.size());
  std::vector<double> masses(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    scores[k] = dist.scores[order[k]];
    masses[k] = dist.weights[order[k]];
  }
  return detail::quantile_sorted(scores, masses, level);
}

std::vector<double> calibration_scores(const CadrfModel& model, const Dataset& cal) {
  const auto pred = model.predict(cal);
  std::vector<double> scores(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) scores[i] = nonconformity_abs(cal.y(i), pred[i]);
  return scores;
}

std::vector<double> calibrate_standard(const CadrfModel& model, const Dataset& cal) {
  if (cal.empty()) throw InvalidArgument("calibration split is empty");
  auto scores = calibration_scores(model, cal);
  std::sort(scores.begin(), scores.end());
  return scores;
}

double standard_radius(std::span<const double> sorted_scores, double alpha) {
  detail::check_level(alpha, "alpha");
  if (sorted_scores.empty()) throw InvalidArgument("no calibration scores");
  if (!std::is_sorted(sorted_scores.begin(), sorted_scores.end())) {
    throw InvalidArgument("calibration scores must be sorted ascending");
  }
  const auto m = static_cast<double>(sorted_scores.size());
  const double rank = std::max(1.0, std::ceil((1.0 - alpha - kMassTolerance) * (m + 1.0)));
  if (rank > m) return kInf;
  return sorted_scores[static_cast<std::size_t>(rank) - 1];
}

PredictionInterval predict_interval_standard(const CadrfModel& model, std::span<const double> sorted_scores,
                                             std::span<const double> x, double t, double alpha) {
  const double radius = standard_radius(sorted_scores, alpha);
  const double center = model.predict(x, t);
  if (radius == kInf) return {};
  return {center - radius, center + radius};
}

WeightedCalibration::WeightedCalibration(std::span<const double> scores, std::span<const double> log_weights) {
  if (scores.size() != log_weights.size()) throw InvalidArgument("scores and weights differ in length");
  if (scores.empty()) throw InvalidArgument("no calibration scores");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  scores_.reserve(order.size());
  log_weights_.reserve(order.size());
  double max_lw = -kInf;
  for (std::size_t k : order) {
    if (!std::isfinite(scores[k])) throw InvalidArgument("calibration scores must be finite");
    const double lw = log_weights[k];
    if (std::isnan(lw) || lw == kInf) throw InvalidArgument("calibration weights must be finite and non-negative");
    scores_.push_back(scores[k]);
    log_weights_.push_back(lw);
    max_lw = std::max(max_lw, lw);
  }
  if (max_lw == -kInf) throw InvalidArgument("all calibration weights are zero");
  double acc = 0.0;
  for (double lw : log_weights_) acc += std::exp(lw - max_lw);
  log_total_ = max_lw + std::log(acc);
}

WeightedScoreDistribution WeightedCalibration::distribution(double log_weight_new) const {
  if (!std::isfinite(log_weight_new)) {
    throw InvalidArgument("test point weight must be positive and finite");
  }
  const double log_norm = detail::log_add_exp(log_total_, log_weight_new);
  WeightedScoreDistribution dist;
  dist.scores = scores_;
  dist.weights.resize(scores_.size());
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    dist.weights[i] = std::clamp(std::exp(log_weights_[i] - log_norm), 0.0, 1.0);
  }
  dist.infinity_mass = std::clamp(std::exp(log_weight_new - log_norm), 0.0, 1.0);
  return dist;
}

double WeightedCalibration::quantile(double log_weight_new, double level) const {
  detail::check_level(level, "quantile level");
  const auto dist = distribution(log_weight_new);
  return detail::quantile_sorted(dist.scores, dist.weights, level);
}

PredictionInterval WeightedCalibration::interval(double center, double log_weight_new, double alpha) const {
  detail::check_level(alpha, "alpha");
  const double radius = quantile(log_weight_new, 1.0 - alpha);
  if (radius == kInf) return {};
  return {center - radius, center + radius};
}

std::vector<PredictionInterval> WeightedCalibration::intervals(double center, double log_weight_new,
                                                               std::span<const double> alphas) const {
  const auto dist = distribution(log_weight_new);
  std::vector<PredictionInterval> out;
  out.reserve(alphas.size());
  for (double alpha : alphas) {
    detail::check_level(alpha, "alpha");
    const double radius = detail::quantile_sorted(dist.scores, dist.weights, 1.0 - alpha);
    out.push_back(radius == kInf ? PredictionInterval{} : PredictionInterval{center - radius, center + radius});
  }
  return out;
}

double WeightedCalibration::effective_sample_size() const {
  const double max_lw = *std::max_element(log_weights_.begin(), log_weights_.end());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double lw : log_weights_) {
    const double w = std::exp(lw - max_lw);
    sum += w;
    sum_sq += w * w;
  }
  return sum * sum / sum_sq;
}

namespace {

double checked_log_weight(double w, const char* what) {
  if (std::isnan(w) || w < 0.0 || w == kInf) {
    throw InvalidArgument(std::string(what) + " must be finite and non-negative");
  }
  return std::log(w);
}

}  // namespace

PredictionInterval predict_interval_weighted(const CadrfModel& model, const Dataset& cal, const WeightFn& weight_fn,
                                             std::span<const double> x_new, double t_new, double alpha) {
  return predict_interval_weighted_log(
      model, cal,
      [&](std::span<const double> x, double t) { return checked_log_weight(weight_fn(x, t), "weight"); }, x_new,
      t_new, alpha);
}

PredictionInterval predict_interval_weighted_log(const CadrfModel& model, const Dataset& cal,
                                                 const LogWeightFn& log_weight_fn, std::span<const double> x_new,
                                                 double t_new, double alpha) {
  if (cal.empty()) throw InvalidArgument("calibration split is empty");
  detail::check_level(alpha, "alpha");
  const auto scores = calibration_scores(model, cal);
  std::vector<double> log_weights(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) log_weights[i] = log_weight_fn(cal.x(i), cal.t(i));
  const double log_w_new = log_weight_fn(x_new, t_new);
  if (!(log_w_new > -kInf)) throw InvalidArgument("weight at the test point must be positive");
  const WeightedCalibration calibration(scores, log_weights);
  return calibration.interval(model.predict(x_new, t_new), log_w_new, alpha);
}

}  // namespace doseconf
