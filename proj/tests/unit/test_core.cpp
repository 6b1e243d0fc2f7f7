#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "doseconf/cadrf.hpp"
#include "doseconf/dataset.hpp"
#include "doseconf/error.hpp"
#include "doseconf/learner.hpp"
#include "doseconf/random.hpp"
#include "support.hpp"

using namespace doseconf;

namespace {

Dataset iota_dataset(std::size_t n, std::size_t dim = 2) {
  Dataset d(dim);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) x[j] = static_cast<double>(i * dim + j);
    d.add(x, static_cast<double>(i), static_cast<double>(2 * i));
  }
  return d;
}

std::size_t total(const SplitIndices& s) { return s.train.size() + s.cal.size() + s.test.size(); }

}  // namespace

TEST_SUITE("split") {
  TEST_CASE("5000 samples split 2500/1250/1250") {
    for (std::uint64_t seed : {0ULL, 1ULL, 12345ULL}) {
      const auto d = split_dataset(iota_dataset(5000), {}, seed);
      const auto& s = *d.split();
      CHECK(s.train.size() == 2500);
      CHECK(s.cal.size() == 1250);
      CHECK(s.test.size() == 1250);
    }
  }

  TEST_CASE("4 samples split 2/1/1") {
    const auto d = split_dataset(iota_dataset(4), {}, 7);
    const auto& s = *d.split();
    CHECK(s.train.size() == 2);
    CHECK(s.cal.size() == 1);
    CHECK(s.test.size() == 1);
  }

  TEST_CASE("partition is disjoint and complete") {
    const auto d = split_dataset(iota_dataset(101), {0.6, 0.3, 0.1}, 3);
    const auto& s = *d.split();
    std::set<std::size_t> seen;
    for (auto role : {SplitRole::Train, SplitRole::Calibration, SplitRole::Test}) {
      for (auto i : s.of(role)) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 101);
    CHECK(total(s) == 101);
    CHECK(*seen.rbegin() == 100);
  }

  TEST_CASE("same seed gives the same assignment; different seeds differ") {
    const auto a = split_dataset(iota_dataset(200), {}, 42);
    const auto b = split_dataset(iota_dataset(200), {}, 42);
    const auto c = split_dataset(iota_dataset(200), {}, 43);
    CHECK(*a.split() == *b.split());
    CHECK_FALSE(*a.split() == *c.split());
  }

  TEST_CASE("parts carry the right rows") {
    const auto d = split_dataset(iota_dataset(40), {}, 5);
    const auto test = d.part(SplitRole::Test);
    const auto& idx = d.split()->test;
    REQUIRE(test.size() == idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      CHECK(test.t(k) == static_cast<double>(idx[k]));
      CHECK(test.y(k) == 2.0 * static_cast<double>(idx[k]));
    }
  }

  TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(split_dataset(Dataset(2), {}, 0), InvalidArgument);
    CHECK_THROWS_AS(split_dataset(iota_dataset(100), {0.5, 0.25, 0.26}, 0), InvalidArgument);
    CHECK_THROWS_AS(split_dataset(iota_dataset(100), {1.0, 0.0, 0.0}, 0), InvalidArgument);
    CHECK_THROWS_AS(split_dataset(iota_dataset(100), {0.5, -0.25, 0.75}, 0), InvalidArgument);
    CHECK_NOTHROW(split_dataset(iota_dataset(100), {0.5, 0.25, 0.25 + 1e-12}, 0));
  }

  TEST_CASE("set_split rejects overlapping or incomplete partitions") {
    auto d = iota_dataset(4);
    CHECK_THROWS_AS(d.set_split({{0, 1}, {1}, {3}}), InvalidArgument);
    CHECK_THROWS_AS(d.set_split({{0, 1}, {2}, {}}), InvalidArgument);
    CHECK_THROWS_AS(d.set_split({{0, 1}, {2}, {4}}), InvalidArgument);
    CHECK_NOTHROW(d.set_split({{0, 1}, {2}, {3}}));
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("rejects non-finite values and wrong dimensions") {
    Dataset d(2);
    const double good[2] = {1.0, 2.0};
    const double bad[2] = {1.0, NAN};
    const double short_row[1] = {1.0};
    CHECK_THROWS_AS(d.add(bad, 0.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(d.add(good, INFINITY, 0.0), InvalidArgument);
    CHECK_THROWS_AS(d.add(short_row, 0.0, 0.0), InvalidArgument);
    d.add(good, 1.0, 2.0);
    CHECK(d.size() == 1);
  }

  TEST_CASE("feature layout is [x, t]") {
    const auto d = iota_dataset(3);
    const auto f = d.features_with_treatment();
    REQUIRE(f.cols() == 3);
    CHECK(f(2, 0) == 4.0);
    CHECK(f(2, 1) == 5.0);
    CHECK(f(2, 2) == 2.0);
  }

  TEST_CASE("CSV and split sidecar round trip") {
    auto d = split_dataset(iota_dataset(12, 3), {}, 9);
    std::stringstream csv;
    write_csv(d, csv);
    CHECK(csv.str().rfind("x0,x1,x2,t,y\n", 0) == 0);
    const auto back = read_csv(csv);
    REQUIRE(back.size() == d.size());
    REQUIRE(back.dim() == 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(back.t(i) == d.t(i));
      CHECK(back.y(i) == d.y(i));
      for (std::size_t j = 0; j < 3; ++j) CHECK(back.x(i)[j] == d.x(i)[j]);
    }
    std::stringstream js;
    write_split_json(*d.split(), js);
    CHECK(read_split_json(js) == *d.split());
  }

  TEST_CASE("CSV preserves doubles exactly") {
    Dataset d(1);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const double x[1] = {rng.normal(0.0, 1e6)};
      d.add(x, rng.normal(), rng.uniform(-1e-300, 1e-300));
    }
    std::stringstream csv;
    write_csv(d, csv);
    const auto back = read_csv(csv);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(back.x(i)[0] == d.x(i)[0]);
      CHECK(back.t(i) == d.t(i));
      CHECK(back.y(i) == d.y(i));
    }
  }
}

TEST_SUITE("random") {
  TEST_CASE("named streams are distinct and reproducible") {
    CHECK(derive_seed(1, "data") == derive_seed(1, "data"));
    CHECK(derive_seed(1, "data") != derive_seed(1, "split"));
    CHECK(derive_seed(1, "data") != derive_seed(2, "data"));
    Rng a(5, "noise");
    Rng b(5, "noise");
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  }

  TEST_CASE("normal with zero sd returns the mean") {
    Rng r(1);
    CHECK(r.normal(3.5, 0.0) == 3.5);
  }
}

TEST_SUITE("gbt") {
  TEST_CASE("constant targets are fitted exactly") {
    Matrix X(200, 2);
    Rng rng(1);
    for (std::size_t i = 0; i < 200; ++i) {
      X(i, 0) = rng.normal();
      X(i, 1) = rng.uniform();
    }
    const std::vector<double> y(200, 4.25);
    GradientBoostedTrees gbt({.n_rounds = 50});
    gbt.fit(X, y);
    for (std::size_t i = 0; i < 200; ++i) CHECK(std::abs(gbt.predict_one(X.row(i)) - 4.25) <= 1e-6);
    const double probe[2] = {100.0, -100.0};
    CHECK(std::abs(gbt.predict_one(probe) - 4.25) <= 1e-6);
  }

  TEST_CASE("S-learner fits y = 2t with small held-out error") {
    Dataset train(1);
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
      const double x[1] = {rng.normal()};
      const double t = rng.uniform(0.0, 10.0);
      train.add(x, t, 2.0 * t);
    }
    const auto model = fit_cadrf(std::make_unique<GradientBoostedTrees>(), train);
    // Held-out grid over the interior of the training range.
    double mae = 0.0;
    std::vector<double> ys;
    int count = 0;
    for (double t = 0.25; t <= 9.75; t += 0.25) {
      for (double xv : {-1.5, 0.0, 1.5}) {
        const double x[1] = {xv};
        mae += std::abs(model.predict(x, t) - 2.0 * t);
        ys.push_back(2.0 * t);
        ++count;
      }
    }
    mae /= count;
    double mean = 0.0;
    for (double v : ys) mean += v;
    mean /= static_cast<double>(ys.size());
    double var = 0.0;
    for (double v : ys) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(ys.size() - 1));
    CHECK(mae <= 0.1 * sd);
  }

  TEST_CASE("fitting twice with one seed gives identical predictions") {
    Matrix X(300, 3);
    std::vector<double> y(300);
    Rng rng(2);
    for (std::size_t i = 0; i < 300; ++i) {
      for (std::size_t j = 0; j < 3; ++j) X(i, j) = rng.normal();
      y[i] = std::sin(X(i, 0)) + X(i, 1) * X(i, 2) + rng.normal(0.0, 0.1);
    }
    GbtParams p{.n_rounds = 100, .subsample = 0.7, .seed = 99};
    GradientBoostedTrees a(p);
    GradientBoostedTrees b(p);
    a.fit(X, y);
    b.fit(X, y);
    const auto pa = a.predict(X);
    const auto pb = b.predict(X);
    for (std::size_t i = 0; i < 300; ++i) CHECK(pa[i] == pb[i]);
  }

  TEST_CASE("training loss never increases") {
    Matrix X(400, 2);
    std::vector<double> y(400);
    Rng rng(3);
    for (std::size_t i = 0; i < 400; ++i) {
      X(i, 0) = rng.uniform(-3, 3);
      X(i, 1) = rng.normal();
      y[i] = X(i, 0) * X(i, 0) + 3.0 * (X(i, 1) > 0) + rng.normal();
    }
    GradientBoostedTrees gbt({.n_rounds = 200});
    gbt.fit(X, y);
    const auto& loss = gbt.training_loss();
    REQUIRE(loss.size() == 201);
    for (std::size_t k = 1; k < loss.size(); ++k) CHECK(loss[k] <= loss[k - 1]);
    CHECK(loss.back() < 0.5 * loss.front());
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(GradientBoostedTrees({.n_rounds = -1}), InvalidArgument);
    CHECK_THROWS_AS(GradientBoostedTrees({.learning_rate = 0.0}), InvalidArgument);
    CHECK_THROWS_AS(GradientBoostedTrees({.subsample = 1.5}), InvalidArgument);
    GradientBoostedTrees gbt;
    const double row[1] = {0.0};
    CHECK_THROWS_AS(gbt.predict_one(row), Error);
    CHECK_THROWS_AS(gbt.fit(Matrix(0, 1), {}), FitError);
    Matrix X(2, 1);
    const std::vector<double> y{1.0, NAN};
    CHECK_THROWS_AS(gbt.fit(X, y), FitError);
  }

  TEST_CASE("fit_cadrf rejects an empty training split") {
    CHECK_THROWS_AS(fit_cadrf(std::make_unique<GradientBoostedTrees>(), Dataset(2)), Error);
  }
}
