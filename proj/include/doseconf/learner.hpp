#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "doseconf/dataset.hpp"

namespace doseconf {

/// Pluggable regression learner. `fit` is called once; afterwards the learner
/// is treated as immutable and `predict` may be called concurrently.
class RegressionLearner {
 public:
  virtual ~RegressionLearner() = default;

  virtual void fit(const Matrix& features, std::span<const double> targets) = 0;
  virtual double predict_one(std::span<const double> row) const = 0;
  virtual std::vector<double> predict(const Matrix& features) const;

  /// Fresh, unfitted learner with the same hyperparameters.
  virtual std::unique_ptr<RegressionLearner> clone_unfitted() const = 0;
};

struct GbtParams {
  int n_rounds = 500;
  double learning_rate = 0.1;
  int max_depth = 4;
  int min_samples_leaf = 10;
  /// Row fraction drawn (without replacement) per round. The training-loss
  /// log is monotone only when this is 1.
  double subsample = 1.0;
  int max_bins = 255;
  std::uint64_t seed = 0;
};

/// Least-squares gradient boosting over depth-limited regression trees with
/// histogram split search.
class GradientBoostedTrees final : public RegressionLearner {
 public:
  explicit GradientBoostedTrees(GbtParams params = {});

  void fit(const Matrix& features, std::span<const double> targets) override;
  double predict_one(std::span<const double> row) const override;
  std::vector<double> predict(const Matrix& features) const override;
  std::unique_ptr<RegressionLearner> clone_unfitted() const override;

  const GbtParams& params() const { return params_; }
  bool fitted() const { return fitted_; }
  std::size_t n_trees() const { return trees_.size(); }
  /// Training MSE: entry 0 is the constant baseline, entry k follows round k.
  const std::vector<double>& training_loss() const { return training_loss_; }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  struct Tree {
    std::vector<Node> nodes;
    double predict(std::span<const double> row) const;
  };

  GbtParams params_;
  std::size_t n_features_ = 0;
  double base_ = 0.0;
  std::vector<Tree> trees_;
  std::vector<double> training_loss_;
  bool fitted_ = false;
};

}  // namespace doseconf
