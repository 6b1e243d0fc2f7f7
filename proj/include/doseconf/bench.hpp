#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "doseconf/conformal.hpp"
#include "doseconf/dataset.hpp"
#include "doseconf/learner.hpp"
#include "doseconf/propensity.hpp"

namespace doseconf {

enum class Method {
  StandardCp,
  WcpLocal,
  WcpGlobalOracle,
  WcpGlobalPropensity,
  WcpLocalOracle,
  WcpLocalPropensity,
};

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
/// Accepts a comma-separated list or "all".
std::vector<Method> parse_methods(std::string_view list);
std::vector<Method> all_methods();
bool uses_oracle_propensity(Method m);
bool uses_estimated_propensity(Method m);

enum class PropensityMode { Oracle, Estimated, Both };
std::string_view to_string(PropensityMode m);
PropensityMode parse_propensity_mode(std::string_view name);

/// Grid: every test row at each grid treatment against a counterfactual draw.
/// Observed: every test row at its own treatment against its observed outcome.
enum class EvalMode { Grid, Observed };
std::string_view to_string(EvalMode m);
EvalMode parse_eval_mode(std::string_view name);

struct ExperimentConfig {
  int setup = 3;
  int scenario = 1;
  std::size_t n_seeds = 50;
  std::size_t n_samples = 5000;
  std::uint64_t master_seed = 0;
  std::vector<double> alphas{0.1, 0.05};
  std::size_t grid_k = 40;
  std::vector<Method> methods = all_methods();
  PropensityMode propensity = PropensityMode::Both;
  EvalMode eval = EvalMode::Grid;
  SplitFractions fractions{};
  GbtParams cadrf_learner{};
  GbtParams propensity_learner{};
  double density_floor = kDefaultDensityFloor;
  /// Worker threads; 0 picks the hardware concurrency. DOSECONF_THREADS caps it.
  std::size_t threads = 0;
  std::string output_dir;

  /// 10 seeds of 1000 samples.
  static ExperimentConfig desk_profile();
  /// 50 seeds of 5000 samples.
  static ExperimentConfig full_profile();

  void validate() const;
  /// Requested methods that the propensity mode enables, in request order.
  std::vector<Method> active_methods() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Keys present in `j` override `base`.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

struct CoverageRow {
  std::string method;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  int setup = 0;
  int scenario = 0;
  double mean_coverage = 0.0;
  double mean_width = 0.0;    // over finite intervals; nan if none
  double median_width = 0.0;  // over finite intervals; nan if none
  double inf_fraction = 0.0;
  double ess_median = 0.0;

  /// Field-wise equality with nan == nan.
  bool operator==(const CoverageRow& other) const;
};

struct GridCoverageRow {
  std::string method;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double t0 = 0.0;
  double coverage = 0.0;
};

struct SeedFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct MethodSummary {
  std::string method;
  double alpha = 0.0;
  std::size_t n_seeds = 0;
  double mean_coverage = 0.0;
  double coverage_variance = 0.0;  // sample variance across seeds
  double mean_width = 0.0;
  double inf_fraction = 0.0;
  double ess_median = 0.0;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  std::vector<GridCoverageRow> grid;
  std::vector<SeedFailure> failures;

  /// Aggregates over seeds per (method, alpha), in first-seen order.
  std::vector<MethodSummary> summarize() const;
  const MethodSummary* find(const std::vector<MethodSummary>& summary, std::string_view method,
                            double alpha) const;
};

// ---- Method machinery ------------------------------------------------------

/// Weight family for local calibration: log-weight of calibration row i, with
/// covariates x_i and treatment t_i, when targeting treatment t0.
using LogWeightFamily =
    std::function<double(std::size_t i, std::span<const double> x_i, double t_i, double t0)>;

/// Per-treatment weighted calibrations computed once for a fixed grid.
class LocalCalibration {
 public:
  LocalCalibration(std::vector<double> grid, std::vector<WeightedCalibration> calibrations);

  std::span<const double> grid() const { return grid_; }
  /// Throws RecalibrationRequired for a treatment not in the grid.
  const WeightedCalibration& at(double t0) const;

 private:
  std::vector<double> grid_;  // sorted ascending
  std::vector<WeightedCalibration> calibrations_;
};

/// Builds the normalized-on-query calibration for every grid treatment. Each
/// calibration row is passed to `family` exactly once per grid point. Throws
/// if a grid value lies outside `bounds`.
LocalCalibration precalibrate_local(std::span<const double> scores, const Dataset& cal, std::span<const double> grid,
                                    const TreatmentBounds& bounds, const LogWeightFamily& family);

/// Everything a method needs to turn calibration data into intervals.
struct MethodInputs {
  std::span<const double> scores;  // absolute residuals aligned with *cal
  const Dataset* cal = nullptr;
  std::span<const double> grid;
  TreatmentBounds bounds{};
  const PropensityModel* oracle = nullptr;
  const PropensityModel* estimated = nullptr;
  KernelConfig local_kernel{};
  KernelConfig oracle_kernel{};
  KernelConfig estimated_kernel{};
};

class MethodEvaluator {
 public:
  virtual ~MethodEvaluator() = default;
  /// Intervals centred on `center` for covariates x at treatment t0, one per
  /// alpha.
  virtual std::vector<PredictionInterval> intervals(std::span<const double> x, double t0, double center,
                                                    std::span<const double> alphas) const = 0;
  /// Effective sample size of the calibration weights used at t0.
  virtual double effective_sample_size(double t0) const = 0;
};

std::unique_ptr<MethodEvaluator> make_evaluator(Method method, const MethodInputs& inputs);

// ---- Harness ---------------------------------------------------------------

struct SeedResult {
  std::vector<CoverageRow> rows;
  std::vector<GridCoverageRow> grid;
};

/// Full pipeline for one seed; throws on any failure.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed (concurrently when allowed); failed seeds are recorded in
/// the report instead of aborting the sweep.
CoverageReport run_experiment(const ExperimentConfig& cfg);

/// Number of worker threads run_experiment will use.
std::size_t resolve_thread_count(const ExperimentConfig& cfg);

// ---- Report I/O ------------------------------------------------------------

enum class ReportFormat { Csv, Json, Both };

void write_coverage_csv(const CoverageReport& report, std::ostream& out);
void write_grid_csv(const CoverageReport& report, std::ostream& out);
void write_summary_csv(const std::vector<MethodSummary>& summary, std::ostream& out);
nlohmann::json report_to_json(const CoverageReport& report);

/// Reads a coverage CSV (rows and `# failed_seed` footer lines).
CoverageReport read_coverage_csv(std::istream& in);
std::vector<GridCoverageRow> read_grid_csv(std::istream& in);

/// Writes coverage.csv, grid_coverage.csv and summary.csv and/or report.json
/// into `dir`, creating it if needed.
void emit_report(const CoverageReport& report, const std::filesystem::path& dir, ReportFormat format,
                 const std::optional<ExperimentConfig>& cfg = std::nullopt);

}  // namespace doseconf
