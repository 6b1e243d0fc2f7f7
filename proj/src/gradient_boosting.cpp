#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>

#include "doseconf/error.hpp"
#include "doseconf/learner.hpp"

namespace doseconf {

std::vector<double> RegressionLearner::predict(const Matrix& features) const {
  std::vector<double> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) out[i] = predict_one(features.row(i));
  return out;
}

namespace {

// Per-feature cut points; bin b holds values in (cuts[b-1], cuts[b]].
std::vector<double> make_cuts(std::vector<double> column, int max_bins) {
  std::sort(column.begin(), column.end());
  std::vector<double> unique_vals;
  unique_vals.reserve(column.size());
  for (double v : column) {
    if (unique_vals.empty() || v != unique_vals.back()) unique_vals.push_back(v);
  }
  std::vector<double> cuts;
  if (unique_vals.size() <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t i = 1; i < unique_vals.size(); ++i) {
      cuts.push_back(0.5 * (unique_vals[i - 1] + unique_vals[i]));
    }
    return cuts;
  }
  const std::size_t n = column.size();
  for (int b = 1; b < max_bins; ++b) {
    const std::size_t idx = static_cast<std::size_t>(b) * n / static_cast<std::size_t>(max_bins);
    if (idx == 0 || idx >= n || column[idx - 1] == column[idx]) continue;
    const double cut = 0.5 * (column[idx - 1] + column[idx]);
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  return cuts;
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  int cut = -1;
};

}  // namespace

GradientBoostedTrees::GradientBoostedTrees(GbtParams params) : params_(params) {
  if (params_.n_rounds < 0) throw InvalidArgument("n_rounds must be non-negative");
  if (!(params_.learning_rate > 0.0 && params_.learning_rate <= 1.0)) {
    throw InvalidArgument("learning_rate must lie in (0, 1]");
  }
  if (params_.max_depth < 1) throw InvalidArgument("max_depth must be at least 1");
  if (params_.min_samples_leaf < 1) throw InvalidArgument("min_samples_leaf must be at least 1");
  if (!(params_.subsample > 0.0 && params_.subsample <= 1.0)) {
    throw InvalidArgument("subsample must lie in (0, 1]");
  }
  if (params_.max_bins < 2 || params_.max_bins > 65535) throw InvalidArgument("max_bins must lie in [2, 65535]");
}

std::unique_ptr<RegressionLearner> GradientBoostedTrees::clone_unfitted() const {
  return std::make_unique<GradientBoostedTrees>(params_);
}

double GradientBoostedTrees::Tree::predict(std::span<const double> row) const {
  int idx = 0;
  while (nodes[idx].feature >= 0) {
    const Node& nd = nodes[idx];
    idx = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[idx].value;
}

void GradientBoostedTrees::fit(const Matrix& features, std::span<const double> targets) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n == 0) throw FitError("cannot fit on an empty training set");
  if (d == 0) throw FitError("cannot fit without features");
  if (targets.size() != n) {
    throw FitError("feature rows (" + std::to_string(n) + ") and targets (" + std::to_string(targets.size()) +
                   ") disagree");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(targets[i])) throw FitError("target " + std::to_string(i) + " is not finite");
  }
  if (!std::all_of(features.data().begin(), features.data().end(), [](double v) { return std::isfinite(v); })) {
    throw FitError("features contain non-finite values");
  }

  n_features_ = d;
  trees_.clear();
  training_loss_.clear();

  // Bin every feature once.
  std::vector<std::vector<double>> cuts(d);
  std::vector<std::vector<std::uint16_t>> codes(d, std::vector<std::uint16_t>(n));
  std::vector<double> column(n);
  for (std::size_t f = 0; f < d; ++f) {
    for (std::size_t i = 0; i < n; ++i) column[i] = features(i, f);
    cuts[f] = make_cuts(column, params_.max_bins);
    for (std::size_t i = 0; i < n; ++i) {
      codes[f][i] = static_cast<std::uint16_t>(
          std::lower_bound(cuts[f].begin(), cuts[f].end(), column[i]) - cuts[f].begin());
    }
  }

  base_ = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
  std::vector<double> pred(n, base_);
  std::vector<double> resid(n);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = targets[i] - pred[i];
      s += r * r;
    }
    return s / static_cast<double>(n);
  };
  training_loss_.push_back(mse());

  std::mt19937_64 engine(params_.seed);
  std::vector<std::uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0U);
  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params_.subsample * static_cast<double>(n))));

  std::vector<double> hist_sum;
  std::vector<double> hist_cnt;
  const auto min_leaf = static_cast<double>(params_.min_samples_leaf);

  for (int round = 0; round < params_.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = targets[i] - pred[i];

    std::vector<std::uint32_t> rows;
    if (sample_size < n) {
      rows = all_rows;
      std::shuffle(rows.begin(), rows.end(), engine);
      rows.resize(sample_size);
      std::sort(rows.begin(), rows.end());
    } else {
      rows = all_rows;
    }

    Tree tree;
    // Depth-first growth; each frame owns the rows reaching that node.
    struct Frame {
      int node;
      int depth;
      std::vector<std::uint32_t> rows;
    };
    std::vector<Frame> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, 0, std::move(rows)});

    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      const auto& node_rows = frame.rows;
      double total = 0.0;
      double sum_sq = 0.0;
      for (auto r : node_rows) {
        total += resid[r];
        sum_sq += resid[r] * resid[r];
      }
      const auto count = static_cast<double>(node_rows.size());

      SplitCandidate best;
      if (frame.depth < params_.max_depth && count >= 2 * min_leaf) {
        const double parent_score = total * total / count;
        for (std::size_t f = 0; f < d; ++f) {
          const std::size_t nbins = cuts[f].size() + 1;
          if (nbins < 2) continue;
          hist_sum.assign(nbins, 0.0);
          hist_cnt.assign(nbins, 0.0);
          const auto& code = codes[f];
          for (auto r : node_rows) {
            hist_sum[code[r]] += resid[r];
            hist_cnt[code[r]] += 1.0;
          }
          double left_sum = 0.0;
          double left_cnt = 0.0;
          for (std::size_t b = 0; b + 1 < nbins; ++b) {
            left_sum += hist_sum[b];
            left_cnt += hist_cnt[b];
            const double right_cnt = count - left_cnt;
            if (left_cnt < min_leaf) continue;
            if (right_cnt < min_leaf) break;
            const double right_sum = total - left_sum;
            const double gain =
                left_sum * left_sum / left_cnt + right_sum * right_sum / right_cnt - parent_score;
            if (gain > best.gain) {
              best.gain = gain;
              best.feature = static_cast<int>(f);
              best.cut = static_cast<int>(b);
            }
          }
        }
      }

      if (best.feature < 0 || !(best.gain > 1e-12 * sum_sq)) {
        tree.nodes[frame.node].value = params_.learning_rate * (count > 0 ? total / count : 0.0);
        continue;
      }

      std::vector<std::uint32_t> left_rows;
      std::vector<std::uint32_t> right_rows;
      const auto& code = codes[best.feature];
      for (auto r : node_rows) {
        (code[r] <= best.cut ? left_rows : right_rows).push_back(r);
      }
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      const int right = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      Node& nd = tree.nodes[frame.node];
      nd.feature = best.feature;
      nd.threshold = cuts[best.feature][best.cut];
      nd.left = left;
      nd.right = right;
      stack.push_back({right, frame.depth + 1, std::move(right_rows)});
      stack.push_back({left, frame.depth + 1, std::move(left_rows)});
    }

    for (std::size_t i = 0; i < n; ++i) pred[i] += tree.predict(features.row(i));
    trees_.push_back(std::move(tree));
    training_loss_.push_back(mse());
  }
  fitted_ = true;
}

double GradientBoostedTrees::predict_one(std::span<const double> row) const {
  if (!fitted_) throw InvalidArgument("learner has not been fit");
  if (row.size() != n_features_) throw InvalidArgument("feature row has the wrong dimension");
  double out = base_;
  for (const auto& tree : trees_) out += tree.predict(row);
  return out;
}

std::vector<double> GradientBoostedTrees::predict(const Matrix& features) const {
  if (!fitted_) throw InvalidArgument("learner has not been fit");
  if (features.cols() != n_features_) throw InvalidArgument("feature matrix has the wrong dimension");
  std::vector<double> out(features.rows(), base_);
  for (const auto& tree : trees_) {
    for (std::size_t i = 0; i < features.rows(); ++i) out[i] += tree.predict(features.row(i));
  }
  return out;
}

}  // namespace doseconf
