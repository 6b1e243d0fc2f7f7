#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "doseconf/bench.hpp"
#include "doseconf/cadrf.hpp"
#include "doseconf/conformal.hpp"
#include "doseconf/cps.hpp"
#include "doseconf/error.hpp"
#include "doseconf/kde.hpp"
#include "doseconf/propensity.hpp"
#include "doseconf/synthgen.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace doseconf;

namespace {

using Rows = std::vector<std::vector<double>>;

Matrix to_matrix(const Rows& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw InvalidArgument("ragged feature rows");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

SplitRole parse_role(const std::string& name) {
  if (name == "train") return SplitRole::Train;
  if (name == "cal") return SplitRole::Calibration;
  if (name == "test") return SplitRole::Test;
  throw InvalidArgument("role must be 'train', 'cal' or 'test'");
}

GbtParams make_params(int n_rounds, double learning_rate, int max_depth, int min_samples_leaf, double subsample,
                      std::uint64_t seed) {
  GbtParams p;
  p.n_rounds = n_rounds;
  p.learning_rate = learning_rate;
  p.max_depth = max_depth;
  p.min_samples_leaf = min_samples_leaf;
  p.subsample = subsample;
  p.seed = seed;
  return p;
}

std::string interval_repr(const PredictionInterval& iv) {
  return "PredictionInterval(" + std::to_string(iv.lower) + ", " + std::to_string(iv.upper) + ")";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conformal prediction intervals for dose-response models under continuous treatments.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", base.ptr());
  py::register_exception<RecalibrationRequired>(m, "RecalibrationRequired", base.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<std::size_t>(), "dim"_a)
      .def(
          "add", [](Dataset& d, const std::vector<double>& x, double t, double y) { d.add(x, t, y); }, "x"_a,
          "t"_a, "y"_a)
      .def("__len__", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim)
      .def("x", [](const Dataset& d, std::size_t i) { return to_vector(d.x(i)); })
      .def("t", &Dataset::t)
      .def("y", &Dataset::y)
      .def_property_readonly("treatments", &Dataset::treatments)
      .def_property_readonly("outcomes", &Dataset::outcomes)
      .def("covariates",
           [](const Dataset& d) {
             Rows rows(d.size());
             for (std::size_t i = 0; i < d.size(); ++i) rows[i] = to_vector(d.x(i));
             return rows;
           })
      .def("split",
           [](const Dataset& d) -> py::object {
             if (!d.split()) return py::none();
             const auto& s = *d.split();
             return py::dict("train"_a = s.train, "cal"_a = s.cal, "test"_a = s.test);
           })
      .def("part", [](const Dataset& d, const std::string& role) { return d.part(parse_role(role)); }, "role"_a);

  m.def("generate",
        [](int setup, int scenario, std::size_t n, std::uint64_t seed, double noise_scale) {
          ScenarioSpec spec;
          spec.setup = setup;
          spec.scenario = scenario;
          spec.n = n;
          spec.seed = seed;
          spec.outcome_noise_scale = noise_scale;
          return generate(spec);
        },
        "setup"_a, "scenario"_a, "n"_a = 1000, "seed"_a = 0, "noise_scale"_a = 1.0);
  m.def("outcome_mean",
        [](int setup, int scenario, const std::vector<double>& x, double t) {
          ScenarioSpec spec;
          spec.setup = setup;
          spec.scenario = scenario;
          return outcome_mean(spec, x, t);
        },
        "setup"_a, "scenario"_a, "x"_a, "t"_a);
  m.def(
      "split_dataset",
      [](Dataset data, std::tuple<double, double, double> f, std::uint64_t seed) {
        return split_dataset(std::move(data), {std::get<0>(f), std::get<1>(f), std::get<2>(f)}, seed);
      },
      "data"_a, "fractions"_a = std::make_tuple(0.5, 0.25, 0.25), "seed"_a = 0);
  m.def("treatment_grid", &treatment_grid, "train"_a, "k"_a = 40);

  py::class_<GradientBoostedTrees>(m, "GradientBoostedTrees")
      .def(py::init([](int n_rounds, double learning_rate, int max_depth, int min_samples_leaf, double subsample,
                       std::uint64_t seed) {
             return GradientBoostedTrees(
                 make_params(n_rounds, learning_rate, max_depth, min_samples_leaf, subsample, seed));
           }),
           "n_rounds"_a = 500, "learning_rate"_a = 0.1, "max_depth"_a = 4, "min_samples_leaf"_a = 10,
           "subsample"_a = 1.0, "seed"_a = 0)
      .def(
          "fit", [](GradientBoostedTrees& g, const Rows& X, const std::vector<double>& y) { g.fit(to_matrix(X), y); },
          "X"_a, "y"_a)
      .def("predict", [](const GradientBoostedTrees& g, const Rows& X) { return g.predict(to_matrix(X)); }, "X"_a)
      .def_property_readonly("training_loss", &GradientBoostedTrees::training_loss)
      .def_property_readonly("n_trees", &GradientBoostedTrees::n_trees);

  py::class_<CadrfModel>(m, "CadrfModel")
      .def("predict", [](const CadrfModel& c, const std::vector<double>& x, double t) { return c.predict(x, t); },
           "x"_a, "t"_a)
      .def("predict_dataset", [](const CadrfModel& c, const Dataset& d) { return c.predict(d); }, "data"_a)
      .def("predict_curve", [](const CadrfModel& c, const std::vector<double>& x,
                               const std::vector<double>& ts) { return c.predict_curve(x, ts); });
  m.def(
      "fit_cadrf",
      [](const Dataset& train, int n_rounds, double learning_rate, int max_depth, std::uint64_t seed) {
        return fit_cadrf(
            std::make_unique<GradientBoostedTrees>(make_params(n_rounds, learning_rate, max_depth, 10, 1.0, seed)),
            train);
      },
      "train"_a, "n_rounds"_a = 500, "learning_rate"_a = 0.1, "max_depth"_a = 4, "seed"_a = 0);

  py::class_<PredictionInterval>(m, "PredictionInterval")
      .def(py::init<double, double>(), "lower"_a, "upper"_a)
      .def_readonly("lower", &PredictionInterval::lower)
      .def_readonly("upper", &PredictionInterval::upper)
      .def_property_readonly("is_infinite", &PredictionInterval::is_infinite)
      .def_property_readonly("width", &PredictionInterval::width)
      .def("contains", &PredictionInterval::contains)
      .def("__eq__", [](const PredictionInterval& a, const PredictionInterval& b) { return a == b; })
      .def("__repr__", &interval_repr);

  m.def("nonconformity_abs", &nonconformity_abs);
  m.def(
      "weighted_quantile",
      [](std::vector<double> scores, std::vector<double> weights, double infinity_mass, double level) {
        return weighted_quantile({std::move(scores), std::move(weights), infinity_mass}, level);
      },
      "scores"_a, "weights"_a, "infinity_mass"_a, "level"_a);
  m.def("standard_radius", [](const std::vector<double>& sorted, double alpha) {
    return standard_radius(sorted, alpha);
  });
  m.def("calibrate_standard", &calibrate_standard, "model"_a, "cal"_a);
  m.def(
      "predict_interval_standard",
      [](const CadrfModel& model, const std::vector<double>& scores, const std::vector<double>& x, double t,
         double alpha) { return predict_interval_standard(model, scores, x, t, alpha); },
      "model"_a, "scores"_a, "x"_a, "t"_a, "alpha"_a);
  m.def(
      "predict_interval_weighted",
      [](const CadrfModel& model, const Dataset& cal, const std::function<double(std::vector<double>, double)>& w,
         const std::vector<double>& x, double t, double alpha) {
        return predict_interval_weighted(
            model, cal, [&](std::span<const double> xi, double ti) { return w(to_vector(xi), ti); }, x, t, alpha);
      },
      "model"_a, "cal"_a, "weight_fn"_a, "x"_a, "t"_a, "alpha"_a);

  m.def("cps_q",
        [](std::vector<double> scores, std::vector<double> weights, double infinity_mass, double r_new, double phi) {
          return cps_q({std::move(scores), std::move(weights), infinity_mass}, r_new, phi);
        },
        "scores"_a, "weights"_a, "infinity_mass"_a, "r_new"_a, "phi"_a);
  py::class_<PredictiveDistribution>(m, "PredictiveDistribution")
      .def_property_readonly("center", &PredictiveDistribution::center)
      .def_property_readonly("support", &PredictiveDistribution::support)
      .def_property_readonly("masses", [](const PredictiveDistribution& p) { return to_vector(p.masses()); })
      .def_property_readonly("infinity_mass", &PredictiveDistribution::infinity_mass)
      .def("cdf", py::overload_cast<double, double>(&PredictiveDistribution::cdf, py::const_), "y"_a, "phi"_a)
      .def("quantile", &PredictiveDistribution::quantile, "level"_a)
      .def("lower_quantile", &PredictiveDistribution::lower_quantile, "level"_a)
      .def("interval", &PredictiveDistribution::interval, "alpha"_a);
  m.def(
      "cps_predictive_distribution",
      [](const CadrfModel& model, const Dataset& cal, const std::function<double(std::vector<double>, double)>& w,
         const std::vector<double>& x, double t, double phi) {
        return cps_predictive_distribution(
            model, cal, [&](std::span<const double> xi, double ti) { return w(to_vector(xi), ti); }, x, t, phi);
      },
      "model"_a, "cal"_a, "weight_fn"_a, "x"_a, "t"_a, "phi"_a = 0.5);

  py::class_<KernelDensity>(m, "KernelDensity")
      .def(py::init<std::vector<double>, double>(), "centers"_a, "bandwidth"_a)
      .def("density", &KernelDensity::density)
      .def("log_density", &KernelDensity::log_density)
      .def_property_readonly("bandwidth", &KernelDensity::bandwidth);
  m.def("kde_fit", [](const std::vector<double>& s) { return kde_fit(s); }, "samples"_a);
  m.def("silverman_bandwidth", [](const std::vector<double>& s) { return silverman_bandwidth(s); });

  py::class_<PropensityModel>(m, "PropensityModel")
      .def("density", [](const PropensityModel& p, const std::vector<double>& x, double t) { return p.density(x, t); })
      .def("log_density",
           [](const PropensityModel& p, const std::vector<double>& x, double t) { return p.log_density(x, t); })
      .def_property_readonly("sigma", &PropensityModel::sigma);
  py::class_<OraclePropensity, PropensityModel>(m, "OraclePropensity")
      .def(py::init<int, int, double>(), "setup"_a, "scenario"_a, "floor"_a = kDefaultDensityFloor);
  py::class_<PropensityEstimator, PropensityModel>(m, "PropensityEstimator")
      .def_static(
          "fit",
          [](const Dataset& train, const Dataset& cal, std::uint64_t seed, int n_rounds, double floor) {
            PropensityOptions opt;
            opt.learner.n_rounds = n_rounds;
            opt.density_floor = floor;
            return PropensityEstimator::fit(train, cal, seed, opt);
          },
          "train"_a, "cal"_a, "seed"_a = 0, "n_rounds"_a = 500, "floor"_a = kDefaultDensityFloor)
      .def("predict_mean", [](const PropensityEstimator& e, const std::vector<double>& x) { return e.predict_mean(x); });
  m.def("oracle_propensity", [](int setup, int scenario, const std::vector<double>& x, double t) {
    return oracle_propensity(setup, scenario, x, t);
  });

  py::class_<TreatmentBounds>(m, "TreatmentBounds")
      .def(py::init([](double lo, double hi) { return TreatmentBounds{lo, hi}; }), "lower"_a, "upper"_a)
      .def_readonly("lower", &TreatmentBounds::lower)
      .def_readonly("upper", &TreatmentBounds::upper);
  py::class_<KernelConfig>(m, "KernelConfig")
      .def(py::init([](double h) {
             KernelConfig c{h, 0.0};
             c.validate();
             return c;
           }),
           "bandwidth"_a)
      .def_static("from_sigma", &KernelConfig::from_sigma)
      .def_readonly("bandwidth", &KernelConfig::bandwidth);
  m.def("w_global", &w_global, "pi"_a, "t"_a, "bounds"_a);
  m.def("w_local", &w_local, "t_i"_a, "t0"_a, "cfg"_a);
  m.def(
      "w_local_prop",
      [](const PropensityModel& p, const std::vector<double>& x, double t_i, double t0, const KernelConfig& cfg,
         const TreatmentBounds& b) { return w_local_prop(p, x, t_i, t0, cfg, b); },
      "propensity"_a, "x"_a, "t_i"_a, "t0"_a, "cfg"_a, "bounds"_a);
  m.def("effective_sample_size", [](const std::vector<double>& w) { return effective_sample_size(w); });

  m.def(
      "run_experiment_json",
      [](const std::string& config) {
        const auto cfg = config_from_json(nlohmann::json::parse(config), ExperimentConfig::desk_profile());
        CoverageReport report;
        {
          py::gil_scoped_release release;
          report = run_experiment(cfg);
        }
        return report_to_json(report).dump();
      },
      "config"_a, "Runs a coverage experiment from a JSON config; returns the report as JSON.");
}
