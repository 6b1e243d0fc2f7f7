#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "doseconf/cadrf.hpp"
#include "doseconf/dataset.hpp"

namespace doseconf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Absolute slack used whenever a cumulative mass is compared with a target
/// level: "mass >= level" is evaluated as `mass >= level - kMassTolerance`.
/// Every quantile routine (and the standard split rank formula) shares it, so
/// uniform weights reproduce the unweighted rank exactly.
inline constexpr double kMassTolerance = 1e-12;

/// Calibration scores R_i with point masses p_i, plus the mass placed on +inf
/// for the test point. The masses sum to one.
struct WeightedScoreDistribution {
  std::vector<double> scores;
  std::vector<double> weights;
  double infinity_mass = 0.0;

  /// Throws InvalidArgument unless sizes agree, scores are finite, masses are
  /// non-negative and the total is 1 within 1e-9.
  void validate() const;
};

/// Closed interval over the extended reals.
struct PredictionInterval {
  double lower = -kInf;
  double upper = kInf;

  bool is_infinite() const { return lower == -kInf || upper == kInf; }
  double width() const { return upper - lower; }
  bool contains(double y) const { return lower <= y && y <= upper; }
  bool operator==(const PredictionInterval&) const = default;
};

/// Intervals serialize as `{"lower": ..., "upper": ...}` with the strings
/// "-inf"/"inf" standing in for infinite bounds.
void to_json(nlohmann::json& j, const PredictionInterval& iv);
void from_json(const nlohmann::json& j, PredictionInterval& iv);

/// |y - y_hat|.
double nonconformity_abs(double y, double y_hat);

/// Smallest score whose cumulative mass (scores ascending, +inf atom last)
/// reaches `level`; +inf when the finite atoms never get there. Tied scores
/// accumulate together. Throws unless level is in (0, 1).
double weighted_quantile(const WeightedScoreDistribution& dist, double level);

/// Unsorted absolute residuals aligned with the rows of `cal`.
std::vector<double> calibration_scores(const CadrfModel& model, const Dataset& cal);

/// Absolute residuals of every calibration row, sorted ascending.
std::vector<double> calibrate_standard(const CadrfModel& model, const Dataset& cal);

/// Radius of the split conformal interval: the ceil((1 - alpha)(m + 1))-th
/// smallest of m sorted scores, or +inf when that rank exceeds m.
double standard_radius(std::span<const double> sorted_scores, double alpha);

/// Split conformal interval mu(x, t) +/- standard_radius.
PredictionInterval predict_interval_standard(const CadrfModel& model, std::span<const double> sorted_scores,
                                             std::span<const double> x, double t, double alpha);

/// Non-negative likelihood-ratio weight for a (covariates, treatment) point.
using WeightFn = std::function<double(std::span<const double> x, double t)>;
/// Same, in log space; -inf encodes a zero weight.
using LogWeightFn = std::function<double(std::span<const double> x, double t)>;

/// Calibration scores paired with unnormalized log-weights, sorted by score.
/// Querying with the test point's log-weight yields the normalized
/// distribution p_i = w_i / (sum_j w_j + w_new), p_inf = w_new / (...),
/// computed with a log-sum-exp so extreme weight ratios do not overflow.
class WeightedCalibration {
 public:
  WeightedCalibration(std::span<const double> scores, std::span<const double> log_weights);

  std::size_t size() const { return scores_.size(); }
  std::span<const double> scores() const { return scores_; }
  std::span<const double> log_weights() const { return log_weights_; }
  /// log(sum_i w_i) over the calibration atoms.
  double log_total() const { return log_total_; }

  WeightedScoreDistribution distribution(double log_weight_new) const;
  /// Same result as weighted_quantile(distribution(log_weight_new), level).
  double quantile(double log_weight_new, double level) const;
  PredictionInterval interval(double center, double log_weight_new, double alpha) const;
  /// interval() for several alphas sharing one normalization.
  std::vector<PredictionInterval> intervals(double center, double log_weight_new,
                                            std::span<const double> alphas) const;
  /// (sum w)^2 / sum w^2 over the calibration atoms.
  double effective_sample_size() const;

 private:
  std::vector<double> scores_;
  std::vector<double> log_weights_;
  double log_total_ = -kInf;
};

/// Weighted split conformal interval. `weight_fn` is evaluated on every
/// calibration row and on (x_new, t_new); constant factors cancel.
PredictionInterval predict_interval_weighted(const CadrfModel& model, const Dataset& cal, const WeightFn& weight_fn,
                                             std::span<const double> x_new, double t_new, double alpha);

/// Log-space variant for weights that would overflow as plain doubles.
PredictionInterval predict_interval_weighted_log(const CadrfModel& model, const Dataset& cal,
                                                 const LogWeightFn& log_weight_fn, std::span<const double> x_new,
                                                 double t_new, double alpha);

namespace detail {
/// Scan of ascending scores with matching masses; returns the first score at
/// which the running mass reaches `level` (with kMassTolerance), else +inf.
double quantile_sorted(std::span<const double> sorted_scores, std::span<const double> masses, double level);
void check_level(double level, const char* what);
double log_add_exp(double a, double b);
}  // namespace detail

}  // namespace doseconf
