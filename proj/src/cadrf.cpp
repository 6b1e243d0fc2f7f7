#include "doseconf/cadrf.hpp"

#include <string>

#include "doseconf/error.hpp"

namespace doseconf {

double CadrfModel::predict(std::span<const double> x, double t) const {
  if (x.size() != dim_) throw InvalidArgument("covariate row has the wrong dimension");
  // Small fixed buffer keeps per-query predictions allocation-free for typical d.
  constexpr std::size_t kInline = 16;
  if (dim_ < kInline) {
    double buf[kInline];
    std::copy(x.begin(), x.end(), buf);
    buf[dim_] = t;
    return learner_->predict_one({buf, dim_ + 1});
  }
  std::vector<double> row(x.begin(), x.end());
  row.push_back(t);
  return learner_->predict_one(row);
}

std::vector<double> CadrfModel::predict(const Dataset& data) const {
  if (data.dim() != dim_) throw InvalidArgument("dataset has the wrong covariate dimension");
  return learner_->predict(data.features_with_treatment());
}

std::vector<double> CadrfModel::predict_curve(std::span<const double> x, std::span<const double> ts) const {
  std::vector<double> out;
  out.reserve(ts.size());
  for (double t : ts) out.push_back(predict(x, t));
  return out;
}

CadrfModel fit_cadrf(std::unique_ptr<RegressionLearner> learner, const Dataset& train) {
  if (!learner) throw InvalidArgument("fit_cadrf needs a learner");
  if (train.empty()) throw FitError("cannot fit the dose-response model on an empty training split");
  try {
    learner->fit(train.features_with_treatment(), train.outcomes());
  } catch (const FitError& e) {
    throw FitError(std::string("dose-response model fit failed: ") + e.what());
  }
  return CadrfModel(std::shared_ptr<const RegressionLearner>(std::move(learner)), train.dim());
}

}  // namespace doseconf
