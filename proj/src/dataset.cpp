#include "doseconf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doseconf/error.hpp"
#include "doseconf/format.hpp"

namespace doseconf {

const std::vector<std::size_t>& SplitIndices::of(SplitRole role) const {
  switch (role) {
    case SplitRole::Train: return train;
    case SplitRole::Calibration: return cal;
    case SplitRole::Test: return test;
  }
  return train;
}

void Dataset::add(std::span<const double> x, double t, double y) {
  if (x.size() != dim_) {
    throw InvalidArgument("sample has " + std::to_string(x.size()) + " covariates, dataset expects " +
                          std::to_string(dim_));
  }
  if (!std::isfinite(t) || !std::isfinite(y) ||
      !std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) {
    throw InvalidArgument("sample contains non-finite values");
  }
  x_.insert(x_.end(), x.begin(), x.end());
  t_.push_back(t);
  y_.push_back(y);
}

void Dataset::reserve(std::size_t n) {
  x_.reserve(n * dim_);
  t_.reserve(n);
  y_.reserve(n);
}

Sample Dataset::sample(std::size_t i) const {
  auto row = x(i);
  return Sample{std::vector<double>(row.begin(), row.end()), t_[i], y_[i]};
}

Matrix Dataset::covariates() const {
  Matrix m(size(), dim_);
  std::copy(x_.begin(), x_.end(), m.row(0).data());
  return m;
}

Matrix Dataset::features_with_treatment() const {
  Matrix m(size(), dim_ + 1);
  for (std::size_t i = 0; i < size(); ++i) {
    auto dst = m.row(i);
    auto src = x(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[dim_] = t_[i];
  }
  return m;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(dim_);
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw InvalidArgument("subset index out of range");
    out.x_.insert(out.x_.end(), x_.begin() + i * dim_, x_.begin() + (i + 1) * dim_);
    out.t_.push_back(t_[i]);
    out.y_.push_back(y_[i]);
  }
  return out;
}

void Dataset::set_split(SplitIndices split) {
  std::vector<int> seen(size(), 0);
  for (const auto* part : {&split.train, &split.cal, &split.test}) {
    for (std::size_t i : *part) {
      if (i >= size()) throw InvalidArgument("split index out of range");
      ++seen[i];
    }
  }
  if (!std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; })) {
    throw InvalidArgument("split labels must partition the dataset indices exactly");
  }
  split_ = std::move(split);
}

Dataset Dataset::part(SplitRole role) const {
  if (!split_) throw InvalidArgument("dataset has no split attached");
  return subset(split_->of(role));
}

Dataset split_dataset(Dataset data, const SplitFractions& fractions, std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n == 0) throw InvalidArgument("cannot split an empty dataset");
  if (fractions.train <= 0 || fractions.cal <= 0 || fractions.test <= 0) {
    throw InvalidArgument("split fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.cal + fractions.test - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1");
  }
  if (n < 3) throw InvalidArgument("need at least 3 samples to form three non-empty splits");

  auto sized = [n](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
  };
  const std::size_t n_cal = sized(fractions.cal);
  const std::size_t n_test = sized(fractions.test);
  if (n_cal + n_test >= n) throw InvalidArgument("split leaves no training samples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 engine(seed);
  std::shuffle(order.begin(), order.end(), engine);

  SplitIndices split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.cal.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                   order.begin() + static_cast<std::ptrdiff_t>(n_test + n_cal));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_cal), order.end());
  for (auto* part : {&split.train, &split.cal, &split.test}) std::sort(part->begin(), part->end());

  data.set_split(std::move(split));
  return data;
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "t,y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x(i)) out << format_double(v) << ',';
    out << format_double(data.t(i)) << ',' << format_double(data.y(i)) << '\n';
  }
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("empty CSV input");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[header.size() - 2] != "t" || header.back() != "y") {
    throw InvalidArgument("CSV header must end with t,y");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != "x" + std::to_string(j)) throw InvalidArgument("unexpected CSV column " + header[j]);
  }
  Dataset data(dim);
  std::vector<double> x(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != dim + 2) {
      throw InvalidArgument("CSV line " + std::to_string(line_no) + " has wrong column count");
    }
    for (std::size_t j = 0; j < dim; ++j) x[j] = parse_double(cells[j]);
    data.add(x, parse_double(cells[dim]), parse_double(cells[dim + 1]));
  }
  return data;
}

void write_split_json(const SplitIndices& split, std::ostream& out) {
  nlohmann::json j{{"train", split.train}, {"cal", split.cal}, {"test", split.test}};
  out << j.dump() << '\n';
}

SplitIndices read_split_json(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  SplitIndices split;
  j.at("train").get_to(split.train);
  j.at("cal").get_to(split.cal);
  j.at("test").get_to(split.test);
  return split;
}

}  // namespace doseconf
