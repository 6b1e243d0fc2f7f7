#pragma once

#include <memory>
#include <span>
#include <vector>

#include "doseconf/dataset.hpp"
#include "doseconf/learner.hpp"

namespace doseconf {

/// S-learner for the conditional average dose-response function: a single
/// regression over the concatenated features [x, t].
class CadrfModel {
 public:
  CadrfModel(std::shared_ptr<const RegressionLearner> learner, std::size_t dim)
      : learner_(std::move(learner)), dim_(dim) {}

  std::size_t dim() const { return dim_; }

  double predict(std::span<const double> x, double t) const;
  /// Predictions at each row's observed treatment.
  std::vector<double> predict(const Dataset& data) const;
  /// Predictions for one covariate row across several treatments.
  std::vector<double> predict_curve(std::span<const double> x, std::span<const double> ts) const;

  const RegressionLearner& learner() const { return *learner_; }

 private:
  std::shared_ptr<const RegressionLearner> learner_;
  std::size_t dim_;
};

/// Fits `learner` on the [x, t] -> y regression of `train`. Takes ownership of
/// the learner, which must be unfitted.
CadrfModel fit_cadrf(std::unique_ptr<RegressionLearner> learner, const Dataset& train);

}  // namespace doseconf
