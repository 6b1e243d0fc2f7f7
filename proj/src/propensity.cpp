#include "doseconf/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "doseconf/error.hpp"
#include "doseconf/format.hpp"
#include "doseconf/synthgen.hpp"

namespace doseconf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sample_sd(std::span<const double> v) {
  const auto n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= n;
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

double PropensityModel::density(std::span<const double> x, double t) const { return std::exp(log_density(x, t)); }

OraclePropensity::OraclePropensity(int setup, int scenario, double floor)
    : setup_(setup), scenario_(scenario), log_floor_(std::log(floor)) {
  if (!is_valid_scenario(setup, scenario)) throw InvalidArgument("unknown benchmark for oracle propensity");
  if (!(floor > 0.0)) throw InvalidArgument("density floor must be positive");
}

double OraclePropensity::log_density(std::span<const double> x, double t) const {
  return std::max(log_floor_, treatment_log_density(setup_, scenario_, x, t));
}

double OraclePropensity::sigma() const { return treatment_noise_scale(setup_, scenario_); }

double oracle_propensity(int setup, int scenario, std::span<const double> x, double t) {
  return std::exp(treatment_log_density(setup, scenario, x, t));
}

PropensityEstimator::PropensityEstimator(std::shared_ptr<const RegressionLearner> learner,
                                         std::vector<double> residuals, KernelDensity residual_kde,
                                         BandwidthConfig bandwidth, double floor, Dataset cal)
    : learner_(std::move(learner)),
      residuals_(std::move(residuals)),
      residual_kde_(std::move(residual_kde)),
      bandwidth_(bandwidth),
      floor_(floor),
      log_floor_(std::log(floor)),
      sigma_(sample_sd(residuals_)),
      cal_(std::move(cal)) {}

PropensityEstimator PropensityEstimator::fit(const Dataset& train, const Dataset& cal, std::uint64_t seed,
                                             const PropensityOptions& options) {
  if (train.empty() || cal.empty()) throw InvalidArgument("propensity estimation needs train and calibration rows");
  if (train.dim() != cal.dim()) throw InvalidArgument("train and calibration dimensions differ");
  if (!(options.density_floor > 0.0)) throw InvalidArgument("density floor must be positive");
  const auto& t_train = train.treatments();
  const auto [lo, hi] = std::minmax_element(t_train.begin(), t_train.end());
  if (!(*hi > *lo)) throw FitError("training treatments have zero variance");
  if (cal.size() < 2) throw FitError("propensity calibration needs at least two rows");

  GbtParams params = options.learner;
  params.seed = seed;
  auto learner = std::make_shared<GradientBoostedTrees>(params);
  learner->fit(train.covariates(), t_train);

  const auto pred = learner->predict(cal.covariates());
  std::vector<double> residuals(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) residuals[i] = cal.t(i) - pred[i];

  try {
    auto kde = kde_fit(residuals, options.bandwidth);
    return PropensityEstimator(std::move(learner), std::move(residuals), std::move(kde), options.bandwidth,
                               options.density_floor, cal);
  } catch (const InvalidArgument& e) {
    throw FitError(std::string("propensity KDE failed: ") + e.what());
  }
}

double PropensityEstimator::predict_mean(std::span<const double> x) const { return learner_->predict_one(x); }

double PropensityEstimator::log_density(std::span<const double> x, double t) const {
  return std::max(log_floor_, residual_kde_.log_density(t - predict_mean(x)));
}

std::vector<double> PropensityEstimator::predictive_sample(std::span<const double> x) const {
  const double m = predict_mean(x);
  std::vector<double> out(residuals_.size());
  std::transform(residuals_.begin(), residuals_.end(), out.begin(), [m](double r) { return m + r; });
  return out;
}

KernelDensity PropensityEstimator::kde_for(std::span<const double> x) const {
  return kde_fit(predictive_sample(x), bandwidth_);
}

std::vector<double> PropensityEstimator::calibration_densities() const {
  std::vector<double> out(cal_.size());
  for (std::size_t i = 0; i < cal_.size(); ++i) out[i] = density(cal_.x(i), cal_.t(i));
  return out;
}

KernelConfig KernelConfig::from_sigma(double sigma) {
  KernelConfig cfg;
  cfg.sigma_pi = sigma;
  const double s = 0.2 * sigma;
  cfg.bandwidth = 2.0 * s * s;
  cfg.validate();
  return cfg;
}

void KernelConfig::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidArgument("kernel bandwidth must be positive");
}

double w_global(double pi, double t, const TreatmentBounds& bounds) {
  if (!(pi > 0.0)) throw InvalidArgument("propensity density must be positive; apply the density floor first");
  if (!bounds.contains(t)) return 0.0;
  return 1.0 / pi;
}

double w_local(double t_i, double t0, const KernelConfig& cfg) {
  cfg.validate();
  const double u = (t_i - t0) / cfg.bandwidth;
  return std::exp(-0.5 * u * u);
}

double w_local_prop(const PropensityModel& propensity, std::span<const double> x, double t_i, double t0,
                    const KernelConfig& cfg, const TreatmentBounds& bounds) {
  const double pi = propensity.density(x, t_i);
  if (!(pi > 0.0)) throw InvalidArgument("propensity density must be positive; apply the density floor first");
  if (!bounds.contains(t_i)) return 0.0;
  return w_local(t_i, t0, cfg) / pi;
}

double log_w_global(double log_pi, double t, const TreatmentBounds& bounds) {
  if (std::isnan(log_pi) || log_pi == kNegInf) throw InvalidArgument("propensity density must be positive");
  return bounds.contains(t) ? -log_pi : kNegInf;
}

double log_w_local(double t_i, double t0, const KernelConfig& cfg) {
  cfg.validate();
  const double u = (t_i - t0) / cfg.bandwidth;
  return -0.5 * u * u;
}

double log_w_local_prop(double log_pi, double t_i, double t0, const KernelConfig& cfg,
                        const TreatmentBounds& bounds) {
  if (std::isnan(log_pi) || log_pi == kNegInf) throw InvalidArgument("propensity density must be positive");
  if (!bounds.contains(t_i)) return kNegInf;
  return log_w_local(t_i, t0, cfg) - log_pi;
}

double effective_sample_size(std::span<const double> weights) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be finite and non-negative");
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum > 0.0)) throw InvalidArgument("effective sample size needs a positive weight");
  return sum * sum / sum_sq;
}

void write_propensity_diagnostics(const Dataset& data, const PropensityModel& oracle,
                                  const PropensityModel& estimated, std::ostream& out) {
  out << "sample_id,t,pi_oracle,pi_hat\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << i << ',' << format_double(data.t(i)) << ',' << format_double(oracle.density(data.x(i), data.t(i)))
        << ',' << format_double(estimated.density(data.x(i), data.t(i))) << '\n';
  }
}

}  // namespace doseconf
