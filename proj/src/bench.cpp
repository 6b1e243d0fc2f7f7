#include "doseconf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

#include "doseconf/cadrf.hpp"
#include "doseconf/error.hpp"
#include "doseconf/random.hpp"
#include "doseconf/synthgen.hpp"

namespace doseconf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {Method::StandardCp, "standard_cp"},
    {Method::WcpLocal, "wcp_local"},
    {Method::WcpGlobalOracle, "wcp_global_oracle"},
    {Method::WcpGlobalPropensity, "wcp_global_propensity"},
    {Method::WcpLocalOracle, "wcp_local_oracle"},
    {Method::WcpLocalPropensity, "wcp_local_propensity"},
};

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == m) return entry.name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& entry : kMethodNames) {
    if (entry.name == name) return entry.method;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

std::vector<Method> parse_methods(std::string_view list) {
  if (list == "all") return all_methods();
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto pos = list.find(',', start);
    const auto item = list.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!item.empty()) out.push_back(parse_method(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto& entry : kMethodNames) out.push_back(entry.method);
  return out;
}

bool uses_oracle_propensity(Method m) { return m == Method::WcpGlobalOracle || m == Method::WcpLocalOracle; }

bool uses_estimated_propensity(Method m) {
  return m == Method::WcpGlobalPropensity || m == Method::WcpLocalPropensity;
}

std::string_view to_string(PropensityMode m) {
  switch (m) {
    case PropensityMode::Oracle: return "oracle";
    case PropensityMode::Estimated: return "estimated";
    case PropensityMode::Both: return "both";
  }
  return "both";
}

PropensityMode parse_propensity_mode(std::string_view name) {
  if (name == "oracle") return PropensityMode::Oracle;
  if (name == "estimated") return PropensityMode::Estimated;
  if (name == "both") return PropensityMode::Both;
  throw InvalidArgument("unknown propensity mode '" + std::string(name) + "'");
}

std::string_view to_string(EvalMode m) { return m == EvalMode::Grid ? "grid" : "observed"; }

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "grid") return EvalMode::Grid;
  if (name == "observed") return EvalMode::Observed;
  throw InvalidArgument("unknown evaluation mode '" + std::string(name) + "'");
}

// ---- Config ----------------------------------------------------------------

ExperimentConfig ExperimentConfig::desk_profile() {
  ExperimentConfig cfg;
  cfg.n_seeds = 10;
  cfg.n_samples = 1000;
  return cfg;
}

ExperimentConfig ExperimentConfig::full_profile() { return ExperimentConfig{}; }

void ExperimentConfig::validate() const {
  if (!is_valid_scenario(setup, scenario)) {
    throw InvalidArgument("unknown benchmark setup " + std::to_string(setup) + " scenario " +
                          std::to_string(scenario));
  }
  if (n_seeds == 0) throw InvalidArgument("need at least one seed");
  if (n_samples < 10) throw InvalidArgument("need at least 10 samples per dataset");
  if (alphas.empty()) throw InvalidArgument("need at least one alpha");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw InvalidArgument("alphas must lie in (0, 1)");
  }
  if (methods.empty()) throw InvalidArgument("methods list is empty");
  if (active_methods().empty()) {
    throw InvalidArgument("propensity mode '" + std::string(to_string(propensity)) +
                          "' disables every requested method");
  }
  if (eval == EvalMode::Grid && grid_k < 2) throw InvalidArgument("grid needs at least two treatments");
  if (eval == EvalMode::Observed) {
    for (Method m : methods) {
      if (m != Method::StandardCp && m != Method::WcpLocal) {
        throw InvalidArgument("observed-treatment evaluation supports only standard_cp and wcp_local, not " +
                              std::string(to_string(m)));
      }
    }
  }
  if (!(density_floor > 0.0)) throw InvalidArgument("density floor must be positive");
}

std::vector<Method> ExperimentConfig::active_methods() const {
  std::vector<Method> out;
  for (Method m : methods) {
    if (propensity == PropensityMode::Oracle && uses_estimated_propensity(m)) continue;
    if (propensity == PropensityMode::Estimated && uses_oracle_propensity(m)) continue;
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

namespace {

nlohmann::json gbt_to_json(const GbtParams& p) {
  return {{"n_rounds", p.n_rounds},         {"learning_rate", p.learning_rate}, {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf}, {"subsample", p.subsample},     {"max_bins", p.max_bins}};
}

GbtParams gbt_from_json(const nlohmann::json& j, GbtParams p) {
  if (j.contains("n_rounds")) p.n_rounds = j["n_rounds"].get<int>();
  if (j.contains("learning_rate")) p.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("max_depth")) p.max_depth = j["max_depth"].get<int>();
  if (j.contains("min_samples_leaf")) p.min_samples_leaf = j["min_samples_leaf"].get<int>();
  if (j.contains("subsample")) p.subsample = j["subsample"].get<double>();
  if (j.contains("max_bins")) p.max_bins = j["max_bins"].get<int>();
  return p;
}

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  std::vector<std::string> methods;
  for (Method m : cfg.methods) methods.emplace_back(to_string(m));
  return {{"setup", cfg.setup},
          {"scenario", cfg.scenario},
          {"seeds", cfg.n_seeds},
          {"n", cfg.n_samples},
          {"master_seed", cfg.master_seed},
          {"alphas", cfg.alphas},
          {"grid", cfg.grid_k},
          {"methods", methods},
          {"propensity", std::string(to_string(cfg.propensity))},
          {"eval", std::string(to_string(cfg.eval))},
          {"fractions", {cfg.fractions.train, cfg.fractions.cal, cfg.fractions.test}},
          {"cadrf_learner", gbt_to_json(cfg.cadrf_learner)},
          {"propensity_learner", gbt_to_json(cfg.propensity_learner)},
          {"density_floor", cfg.density_floor},
          {"threads", cfg.threads},
          {"out", cfg.output_dir}};
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig cfg) {
  if (j.contains("setup")) cfg.setup = j["setup"].get<int>();
  if (j.contains("scenario")) cfg.scenario = j["scenario"].get<int>();
  if (j.contains("seeds")) cfg.n_seeds = j["seeds"].get<std::size_t>();
  if (j.contains("n")) cfg.n_samples = j["n"].get<std::size_t>();
  if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("alphas")) cfg.alphas = j["alphas"].get<std::vector<double>>();
  if (j.contains("grid")) cfg.grid_k = j["grid"].get<std::size_t>();
  if (j.contains("methods")) {
    const auto& m = j["methods"];
    if (m.is_string()) {
      cfg.methods = parse_methods(m.get<std::string>());
    } else {
      cfg.methods.clear();
      for (const auto& name : m) cfg.methods.push_back(parse_method(name.get<std::string>()));
    }
  }
  if (j.contains("propensity")) cfg.propensity = parse_propensity_mode(j["propensity"].get<std::string>());
  if (j.contains("eval")) cfg.eval = parse_eval_mode(j["eval"].get<std::string>());
  if (j.contains("fractions")) {
    const auto f = j["fractions"].get<std::vector<double>>();
    if (f.size() != 3) throw InvalidArgument("fractions must have three entries");
    cfg.fractions = {f[0], f[1], f[2]};
  }
  if (j.contains("cadrf_learner")) cfg.cadrf_learner = gbt_from_json(j["cadrf_learner"], cfg.cadrf_learner);
  if (j.contains("propensity_learner")) {
    cfg.propensity_learner = gbt_from_json(j["propensity_learner"], cfg.propensity_learner);
  }
  if (j.contains("density_floor")) cfg.density_floor = j["density_floor"].get<double>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<std::size_t>();
  if (j.contains("out")) cfg.output_dir = j["out"].get<std::string>();
  return cfg;
}

// ---- Report aggregation ----------------------------------------------------

bool CoverageRow::operator==(const CoverageRow& o) const {
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  return method == o.method && seed == o.seed && same(alpha, o.alpha) && setup == o.setup &&
         scenario == o.scenario && same(mean_coverage, o.mean_coverage) && same(mean_width, o.mean_width) &&
         same(median_width, o.median_width) && same(inf_fraction, o.inf_fraction) &&
         same(ess_median, o.ess_median);
}

std::vector<MethodSummary> CoverageReport::summarize() const {
  std::vector<MethodSummary> out;
  std::vector<std::vector<const CoverageRow*>> members;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const MethodSummary& s) { return s.method == row.method && s.alpha == row.alpha; });
    if (it == out.end()) {
      out.push_back(MethodSummary{row.method, row.alpha});
      members.emplace_back();
      it = out.end() - 1;
    }
    members[static_cast<std::size_t>(it - out.begin())].push_back(&row);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& s = out[k];
    const auto& group = members[k];
    s.n_seeds = group.size();
    double cov = 0.0;
    double inf = 0.0;
    double width = 0.0;
    std::size_t n_width = 0;
    std::vector<double> ess;
    for (const auto* r : group) {
      cov += r->mean_coverage;
      inf += r->inf_fraction;
      if (!std::isnan(r->mean_width)) {
        width += r->mean_width;
        ++n_width;
      }
      ess.push_back(r->ess_median);
    }
    const auto n = static_cast<double>(group.size());
    s.mean_coverage = cov / n;
    s.inf_fraction = inf / n;
    s.mean_width = n_width > 0 ? width / static_cast<double>(n_width) : kNaN;
    s.ess_median = median_of(ess);
    double var = 0.0;
    for (const auto* r : group) var += (r->mean_coverage - s.mean_coverage) * (r->mean_coverage - s.mean_coverage);
    s.coverage_variance = group.size() > 1 ? var / (n - 1.0) : 0.0;
  }
  return out;
}

const MethodSummary* CoverageReport::find(const std::vector<MethodSummary>& summary, std::string_view method,
                                          double alpha) const {
  for (const auto& s : summary) {
    if (s.method == method && s.alpha == alpha) return &s;
  }
  return nullptr;
}

// ---- Local calibration -----------------------------------------------------

LocalCalibration::LocalCalibration(std::vector<double> grid, std::vector<WeightedCalibration> calibrations) {
  if (grid.size() != calibrations.size()) throw InvalidArgument("grid and calibrations differ in length");
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  for (std::size_t k : order) {
    if (!grid_.empty() && grid_.back() == grid[k]) continue;
    grid_.push_back(grid[k]);
    calibrations_.push_back(std::move(calibrations[k]));
  }
}

const WeightedCalibration& LocalCalibration::at(double t0) const {
  const auto it = std::lower_bound(grid_.begin(), grid_.end(), t0);
  if (it == grid_.end() || *it != t0) {
    throw RecalibrationRequired("treatment " + std::to_string(t0) +
                                " is not in the precalibrated grid; recalibration required");
  }
  return calibrations_[static_cast<std::size_t>(it - grid_.begin())];
}

LocalCalibration precalibrate_local(std::span<const double> scores, const Dataset& cal, std::span<const double> grid,
                                    const TreatmentBounds& bounds, const LogWeightFamily& family) {
  if (grid.empty()) throw InvalidArgument("precalibration grid is empty");
  if (scores.size() != cal.size()) throw InvalidArgument("scores and calibration rows differ in length");
  std::vector<WeightedCalibration> calibrations;
  calibrations.reserve(grid.size());
  std::vector<double> log_weights(cal.size());
  for (double t0 : grid) {
    if (!bounds.contains(t0)) {
      throw InvalidArgument("grid treatment " + std::to_string(t0) + " lies outside the treatment bounds");
    }
    for (std::size_t i = 0; i < cal.size(); ++i) log_weights[i] = family(i, cal.x(i), cal.t(i), t0);
    calibrations.emplace_back(scores, log_weights);
  }
  return LocalCalibration(std::vector<double>(grid.begin(), grid.end()), std::move(calibrations));
}

// ---- Method evaluators -----------------------------------------------------

namespace {

class StandardEvaluator final : public MethodEvaluator {
 public:
  explicit StandardEvaluator(std::span<const double> scores) : sorted_(scores.begin(), scores.end()) {
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::vector<PredictionInterval> intervals(std::span<const double>, double, double center,
                                            std::span<const double> alphas) const override {
    std::vector<PredictionInterval> out;
    out.reserve(alphas.size());
    for (double alpha : alphas) {
      const double r = standard_radius(sorted_, alpha);
      out.push_back(r == kInf ? PredictionInterval{} : PredictionInterval{center - r, center + r});
    }
    return out;
  }

  double effective_sample_size(double) const override { return static_cast<double>(sorted_.size()); }

 private:
  std::vector<double> sorted_;
};

using TestLogWeight = std::function<double(std::span<const double> x, double t0)>;

class GlobalEvaluator final : public MethodEvaluator {
 public:
  GlobalEvaluator(WeightedCalibration calibration, TestLogWeight test_weight)
      : calibration_(std::move(calibration)), test_weight_(std::move(test_weight)) {}

  std::vector<PredictionInterval> intervals(std::span<const double> x, double t0, double center,
                                            std::span<const double> alphas) const override {
    return calibration_.intervals(center, test_weight_(x, t0), alphas);
  }

  double effective_sample_size(double) const override { return calibration_.effective_sample_size(); }

 private:
  WeightedCalibration calibration_;
  TestLogWeight test_weight_;
};

class LocalEvaluator final : public MethodEvaluator {
 public:
  LocalEvaluator(LocalCalibration calibration, TestLogWeight test_weight)
      : calibration_(std::move(calibration)), test_weight_(std::move(test_weight)) {}

  std::vector<PredictionInterval> intervals(std::span<const double> x, double t0, double center,
                                            std::span<const double> alphas) const override {
    return calibration_.at(t0).intervals(center, test_weight_(x, t0), alphas);
  }

  double effective_sample_size(double t0) const override { return calibration_.at(t0).effective_sample_size(); }

 private:
  LocalCalibration calibration_;
  TestLogWeight test_weight_;
};

const PropensityModel& require(const PropensityModel* p, Method m) {
  if (p == nullptr) throw InvalidArgument(std::string(to_string(m)) + " needs a propensity model");
  return *p;
}

// Global propensity weighting; the same formula for oracle and estimate.
std::unique_ptr<MethodEvaluator> make_global(const MethodInputs& in, const PropensityModel& pi) {
  const auto& cal = *in.cal;
  std::vector<double> log_weights(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    log_weights[i] = log_w_global(pi.log_density(cal.x(i), cal.t(i)), cal.t(i), in.bounds);
  }
  const TreatmentBounds bounds = in.bounds;
  return std::make_unique<GlobalEvaluator>(WeightedCalibration(in.scores, log_weights),
                                           [&pi, bounds](std::span<const double> x, double t0) {
                                             return log_w_global(pi.log_density(x, t0), t0, bounds);
                                           });
}

// Local propensity weighting; the same formula for oracle and estimate.
std::unique_ptr<MethodEvaluator> make_local_prop(const MethodInputs& in, const PropensityModel& pi,
                                                 const KernelConfig& kernel) {
  const auto& cal = *in.cal;
  // pi(t_i | x_i) does not depend on the grid point.
  std::vector<double> log_pi(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) log_pi[i] = pi.log_density(cal.x(i), cal.t(i));
  const TreatmentBounds bounds = in.bounds;
  auto local = precalibrate_local(in.scores, cal, in.grid, bounds,
                                  [&](std::size_t i, std::span<const double>, double t_i, double t0) {
                                    return log_w_local_prop(log_pi[i], t_i, t0, kernel, bounds);
                                  });
  return std::make_unique<LocalEvaluator>(std::move(local),
                                          [&pi, kernel, bounds](std::span<const double> x, double t0) {
                                            return log_w_local_prop(pi.log_density(x, t0), t0, t0, kernel, bounds);
                                          });
}

}  // namespace

std::unique_ptr<MethodEvaluator> make_evaluator(Method method, const MethodInputs& in) {
  if (in.cal == nullptr) throw InvalidArgument("method inputs lack calibration data");
  if (in.scores.size() != in.cal->size()) throw InvalidArgument("scores and calibration rows differ in length");
  switch (method) {
    case Method::StandardCp: return std::make_unique<StandardEvaluator>(in.scores);
    case Method::WcpLocal: {
      const KernelConfig kernel = in.local_kernel;
      auto local = precalibrate_local(
          in.scores, *in.cal, in.grid, in.bounds,
          [kernel](std::size_t, std::span<const double>, double t_i, double t0) {
            return log_w_local(t_i, t0, kernel);
          });
      // K(0) = 1 at the test point.
      return std::make_unique<LocalEvaluator>(std::move(local), [](std::span<const double>, double) { return 0.0; });
    }
    case Method::WcpGlobalOracle: return make_global(in, require(in.oracle, method));
    case Method::WcpGlobalPropensity: return make_global(in, require(in.estimated, method));
    case Method::WcpLocalOracle: return make_local_prop(in, require(in.oracle, method), in.oracle_kernel);
    case Method::WcpLocalPropensity: return make_local_prop(in, require(in.estimated, method), in.estimated_kernel);
  }
  throw InvalidArgument("unhandled method");
}

// ---- Harness ---------------------------------------------------------------

namespace {

struct MethodAccumulator {
  std::size_t covered = 0;
  std::size_t total = 0;
  std::size_t infinite = 0;
  std::vector<double> widths;
  std::vector<std::size_t> grid_covered;
  std::vector<std::size_t> grid_total;
};

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.setup = cfg.setup;
  spec.scenario = cfg.scenario;
  spec.n = cfg.n_samples;
  spec.seed = derive_seed(seed, "data");

  const Dataset data = split_dataset(generate(spec), cfg.fractions, derive_seed(seed, "split"));
  const Dataset train = data.part(SplitRole::Train);
  const Dataset cal = data.part(SplitRole::Calibration);
  const Dataset test = data.part(SplitRole::Test);

  GbtParams cadrf_params = cfg.cadrf_learner;
  cadrf_params.seed = derive_seed(seed, "learner");
  const CadrfModel model = fit_cadrf(std::make_unique<GradientBoostedTrees>(cadrf_params), train);
  const std::vector<double> scores = calibration_scores(model, cal);

  const auto methods = cfg.active_methods();
  const OraclePropensity oracle(cfg.setup, cfg.scenario, cfg.density_floor);
  std::optional<PropensityEstimator> estimated;
  if (std::any_of(methods.begin(), methods.end(), uses_estimated_propensity)) {
    PropensityOptions options;
    options.learner = cfg.propensity_learner;
    options.density_floor = cfg.density_floor;
    estimated = PropensityEstimator::fit(train, cal, derive_seed(seed, "propensity"), options);
  }

  // Evaluation points: grid treatments, or each test row's own treatment.
  std::vector<double> grid;
  TreatmentBounds bounds;
  if (cfg.eval == EvalMode::Grid) {
    grid = treatment_grid(train, cfg.grid_k);
    bounds = {grid.front(), grid.back()};
  } else {
    grid = test.treatments();
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    bounds = {-kInf, kInf};
  }

  MethodInputs inputs;
  inputs.scores = scores;
  inputs.cal = &cal;
  inputs.grid = grid;
  inputs.bounds = bounds;
  inputs.oracle = &oracle;
  inputs.estimated = estimated ? &*estimated : nullptr;
  inputs.oracle_kernel = KernelConfig::from_sigma(oracle.sigma());
  inputs.local_kernel = inputs.oracle_kernel;
  if (estimated) inputs.estimated_kernel = KernelConfig::from_sigma(estimated->sigma());

  std::vector<std::unique_ptr<MethodEvaluator>> evaluators;
  for (Method m : methods) evaluators.push_back(make_evaluator(m, inputs));

  const std::size_t n_alpha = cfg.alphas.size();
  const std::size_t n_points = cfg.eval == EvalMode::Grid ? grid.size() : 1;
  std::vector<std::vector<MethodAccumulator>> acc(methods.size(), std::vector<MethodAccumulator>(n_alpha));
  for (auto& per_method : acc) {
    for (auto& a : per_method) {
      a.grid_covered.assign(n_points, 0);
      a.grid_total.assign(n_points, 0);
    }
  }

  auto record = [&](std::size_t m, std::span<const double> x, double t0, double center, double y,
                    std::size_t point) {
    const auto ivs = evaluators[m]->intervals(x, t0, center, cfg.alphas);
    for (std::size_t a = 0; a < n_alpha; ++a) {
      auto& slot = acc[m][a];
      const bool hit = ivs[a].contains(y);
      slot.covered += hit;
      ++slot.total;
      slot.grid_covered[point] += hit;
      ++slot.grid_total[point];
      if (ivs[a].is_infinite()) {
        ++slot.infinite;
      } else {
        slot.widths.push_back(ivs[a].width());
      }
    }
  };

  if (cfg.eval == EvalMode::Grid) {
    Rng noise(seed, "noise");
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto x = test.x(i);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t0 = grid[k];
        const double y = sample_counterfactual(spec, x, t0, noise);
        const double center = model.predict(x, t0);
        for (std::size_t m = 0; m < methods.size(); ++m) record(m, x, t0, center, y, k);
      }
    }
  } else {
    const auto centers = model.predict(test);
    for (std::size_t i = 0; i < test.size(); ++i) {
      for (std::size_t m = 0; m < methods.size(); ++m) record(m, test.x(i), test.t(i), centers[i], test.y(i), 0);
    }
  }

  SeedResult result;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<double> ess;
    ess.reserve(grid.size());
    for (double t0 : grid) ess.push_back(evaluators[m]->effective_sample_size(t0));
    const double ess_median = median_of(ess);
    for (std::size_t a = 0; a < n_alpha; ++a) {
      const auto& slot = acc[m][a];
      CoverageRow row;
      row.method = std::string(to_string(methods[m]));
      row.seed = seed;
      row.alpha = cfg.alphas[a];
      row.setup = cfg.setup;
      row.scenario = cfg.scenario;
      const auto total = static_cast<double>(slot.total);
      row.mean_coverage = static_cast<double>(slot.covered) / total;
      row.inf_fraction = static_cast<double>(slot.infinite) / total;
      if (slot.widths.empty()) {
        row.mean_width = kNaN;
        row.median_width = kNaN;
      } else {
        double sum = 0.0;
        for (double w : slot.widths) sum += w;
        row.mean_width = sum / static_cast<double>(slot.widths.size());
        row.median_width = median_of(slot.widths);
      }
      row.ess_median = ess_median;
      result.rows.push_back(std::move(row));

      if (cfg.eval == EvalMode::Grid) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
          result.grid.push_back(GridCoverageRow{
              std::string(to_string(methods[m])), seed, cfg.alphas[a], grid[k],
              static_cast<double>(slot.grid_covered[k]) / static_cast<double>(slot.grid_total[k])});
        }
      }
    }
  }
  return result;
}

std::size_t resolve_thread_count(const ExperimentConfig& cfg) {
  std::size_t threads = cfg.threads;
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DOSECONF_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) threads = std::min<std::size_t>(threads, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      // Ignore malformed values.
    }
  }
  return std::max<std::size_t>(1, std::min(threads, cfg.n_seeds));
}

CoverageReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_seeds;
  std::vector<std::optional<SeedResult>> results(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    while (true) {
      const std::size_t s = next.fetch_add(1);
      if (s >= n) return;
      try {
        results[s] = run_seed(cfg, cfg.master_seed + s);
      } catch (const std::exception& e) {
        errors[s] = e.what();
      }
    }
  };

  const std::size_t threads = resolve_thread_count(cfg);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  CoverageReport report;
  for (std::size_t s = 0; s < n; ++s) {
    if (!results[s]) {
      report.failures.push_back({cfg.master_seed + s, errors[s]});
      continue;
    }
    auto& r = *results[s];
    std::move(r.rows.begin(), r.rows.end(), std::back_inserter(report.rows));
    std::move(r.grid.begin(), r.grid.end(), std::back_inserter(report.grid));
  }
  return report;
}

}  // namespace doseconf
