#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace doseconf {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One observation: covariates, treatment dose and outcome.
struct Sample {
  std::vector<double> x;
  double t = 0.0;
  double y = 0.0;
};

enum class SplitRole { Train, Calibration, Test };

/// Index sets of a train/calibration/test partition.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> cal;
  std::vector<std::size_t> test;

  const std::vector<std::size_t>& of(SplitRole role) const;
  bool operator==(const SplitIndices&) const = default;
};

struct SplitFractions {
  double train = 0.5;
  double cal = 0.25;
  double test = 0.25;
};

/// Observations (x, t, y) with a fixed covariate dimension and an optional
/// split labelling. All stored values are finite.
class Dataset {
 public:
  explicit Dataset(std::size_t dim = 0) : dim_(dim) {}

  void add(std::span<const double> x, double t, double y);
  void add(const Sample& s) { add(s.x, s.t, s.y); }
  void reserve(std::size_t n);

  std::size_t size() const { return t_.size(); }
  bool empty() const { return t_.empty(); }
  std::size_t dim() const { return dim_; }

  std::span<const double> x(std::size_t i) const { return {x_.data() + i * dim_, dim_}; }
  double t(std::size_t i) const { return t_[i]; }
  double y(std::size_t i) const { return y_[i]; }
  Sample sample(std::size_t i) const;

  const std::vector<double>& treatments() const { return t_; }
  const std::vector<double>& outcomes() const { return y_; }

  /// Covariates only, n x d.
  Matrix covariates() const;
  /// S-learner layout [x, t], n x (d + 1).
  Matrix features_with_treatment() const;

  Dataset subset(std::span<const std::size_t> indices) const;

  /// Attaches a partition; throws unless it covers every index exactly once.
  void set_split(SplitIndices split);
  const std::optional<SplitIndices>& split() const { return split_; }
  /// Rows belonging to one role of the attached split.
  Dataset part(SplitRole role) const;

 private:
  std::size_t dim_;
  std::vector<double> x_;
  std::vector<double> t_;
  std::vector<double> y_;
  std::optional<SplitIndices> split_;
};

/// Seeded shuffle into train/calibration/test. Calibration and test sizes are
/// round(n * fraction) with a floor of one; training takes the remainder.
Dataset split_dataset(Dataset data, const SplitFractions& fractions, std::uint64_t seed);

/// CSV with header `x0,...,x{d-1},t,y`.
void write_csv(const Dataset& data, std::ostream& out);
Dataset read_csv(std::istream& in);

/// Sidecar JSON `{"train":[...], "cal":[...], "test":[...]}`.
void write_split_json(const SplitIndices& split, std::ostream& out);
SplitIndices read_split_json(std::istream& in);

}  // namespace doseconf
