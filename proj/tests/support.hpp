#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "doseconf/cadrf.hpp"
#include "doseconf/dataset.hpp"
#include "doseconf/learner.hpp"
#include "doseconf/propensity.hpp"

namespace doseconf::testing {

// Learner whose prediction is a fixed function of the feature row; fit is a no-op.
class FunctionLearner final : public RegressionLearner {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  explicit FunctionLearner(Fn fn) : fn_(std::move(fn)) {}
  void fit(const Matrix&, std::span<const double>) override {}
  double predict_one(std::span<const double> row) const override { return fn_(row); }
  std::unique_ptr<RegressionLearner> clone_unfitted() const override {
    return std::make_unique<FunctionLearner>(fn_);
  }

 private:
  Fn fn_;
};

// CADRF model mu(x, t) = fn([x, t]).
inline CadrfModel function_model(std::size_t dim, FunctionLearner::Fn fn) {
  return CadrfModel(std::make_shared<FunctionLearner>(std::move(fn)), dim);
}

inline CadrfModel constant_model(std::size_t dim, double c) {
  return function_model(dim, [c](std::span<const double>) { return c; });
}

// Propensity model with a user-supplied density that counts its calls.
class SpyPropensity final : public PropensityModel {
 public:
  using Fn = std::function<double(std::span<const double>, double)>;
  SpyPropensity(Fn log_density, double sigma) : fn_(std::move(log_density)), sigma_(sigma) {}
  double log_density(std::span<const double> x, double t) const override {
    ++calls;
    return fn_(x, t);
  }
  double sigma() const override { return sigma_; }
  mutable std::size_t calls = 0;

 private:
  Fn fn_;
  double sigma_;
};

// Dataset with dim-1 covariates from a list of (x, t, y).
inline Dataset make_dataset(const std::vector<std::array<double, 3>>& rows) {
  Dataset d(1);
  for (const auto& r : rows) {
    const double x[1] = {r[0]};
    d.add(x, r[1], r[2]);
  }
  return d;
}

}  // namespace doseconf::testing
