#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "doseconf/bench.hpp"
#include "doseconf/error.hpp"
#include "doseconf/format.hpp"
#include "doseconf/synthgen.hpp"

namespace {

using namespace doseconf;

std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_csv_line(text)) out.push_back(parse_double(item));
  return out;
}

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  if (name == "both") return ReportFormat::Both;
  throw InvalidArgument("unknown report format '" + name + "'");
}

void print_summary(const std::vector<MethodSummary>& summary, std::ostream& out) {
  out << "method                  alpha   seeds  coverage  cov_var     width     inf_frac  ess\n";
  for (const auto& s : summary) {
    char line[256];
    std::snprintf(line, sizeof line, "%-23s %-7.3g %-6zu %-9.4f %-11.3e %-9.3f %-9.4f %.1f\n", s.method.c_str(),
                  s.alpha, s.n_seeds, s.mean_coverage, s.coverage_variance, s.mean_width, s.inf_fraction,
                  s.ess_median);
    out << line;
  }
}

struct RunArgs {
  std::string config_path;
  std::string profile = "desk";
  std::optional<int> setup;
  std::optional<int> scenario;
  std::string alphas;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> n;
  std::optional<std::size_t> grid;
  std::string methods;
  std::string propensity;
  std::string eval;
  std::optional<std::uint64_t> master_seed;
  std::optional<std::size_t> threads;
  std::string out;
  std::string format = "both";
};

int run_command(const RunArgs& a) {
  ExperimentConfig cfg;
  if (a.profile == "desk") {
    cfg = ExperimentConfig::desk_profile();
  } else if (a.profile == "full") {
    cfg = ExperimentConfig::full_profile();
  } else {
    throw InvalidArgument("unknown profile '" + a.profile + "'");
  }
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw Error("cannot open config '" + a.config_path + "'");
    cfg = config_from_json(nlohmann::json::parse(in), cfg);
  }
  if (a.setup) cfg.setup = *a.setup;
  if (a.scenario) cfg.scenario = *a.scenario;
  if (!a.alphas.empty()) cfg.alphas = parse_alpha_list(a.alphas);
  if (a.seeds) cfg.n_seeds = *a.seeds;
  if (a.n) cfg.n_samples = *a.n;
  if (a.grid) cfg.grid_k = *a.grid;
  if (!a.methods.empty()) cfg.methods = parse_methods(a.methods);
  if (!a.propensity.empty()) cfg.propensity = parse_propensity_mode(a.propensity);
  if (!a.eval.empty()) cfg.eval = parse_eval_mode(a.eval);
  if (a.master_seed) cfg.master_seed = *a.master_seed;
  if (a.threads) cfg.threads = *a.threads;
  if (!a.out.empty()) cfg.output_dir = a.out;
  cfg.validate();

  std::cerr << "running setup " << cfg.setup << " scenario " << cfg.scenario << ": " << cfg.n_seeds << " seeds x "
            << cfg.n_samples << " samples on " << resolve_thread_count(cfg) << " thread(s)\n";
  const auto start = std::chrono::steady_clock::now();
  const auto report = run_experiment(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  print_summary(report.summarize(), std::cout);
  for (const auto& f : report.failures) std::cerr << "seed " << f.seed << " failed: " << f.message << '\n';
  std::cerr << "finished in " << secs << " s\n";
  if (!cfg.output_dir.empty()) {
    emit_report(report, cfg.output_dir, parse_format(a.format), cfg);
    std::cerr << "report written to " << cfg.output_dir << '\n';
  }
  return report.rows.empty() ? 1 : 0;
}

int generate_command(int setup, int scenario, std::size_t n, std::uint64_t seed, const std::string& out,
                     const std::string& split_out) {
  ScenarioSpec spec;
  spec.setup = setup;
  spec.scenario = scenario;
  spec.n = n;
  spec.seed = seed;
  Dataset data = generate(spec);
  if (!split_out.empty()) {
    data = split_dataset(std::move(data), SplitFractions{}, seed);
    std::ofstream sj(split_out);
    if (!sj) throw Error("cannot open '" + split_out + "' for writing");
    write_split_json(*data.split(), sj);
  }
  if (out.empty() || out == "-") {
    write_csv(data, std::cout);
  } else {
    std::ofstream f(out);
    if (!f) throw Error("cannot open '" + out + "' for writing");
    write_csv(data, f);
  }
  return 0;
}

// `in` is a run directory or a coverage.csv inside one.
int report_command(const std::string& in, const std::string& out_dir) {
  std::filesystem::path cov_path(in);
  if (std::filesystem::is_directory(cov_path)) cov_path /= "coverage.csv";
  const auto dir = cov_path.parent_path();
  std::ifstream cov(cov_path);
  if (!cov) throw Error("cannot open '" + cov_path.string() + "'");
  auto report = read_coverage_csv(cov);
  if (std::ifstream grid(dir / "grid_coverage.csv"); grid) report.grid = read_grid_csv(grid);
  print_summary(report.summarize(), std::cout);
  if (!out_dir.empty()) emit_report(report, out_dir, ReportFormat::Both);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal dose-response benchmark"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a multi-seed coverage experiment");
  run_cmd->add_option("--config", run.config_path, "JSON config; flags override its keys");
  run_cmd->add_option("--profile", run.profile, "desk (10 x 1000) or full (50 x 5000)")
      ->check(CLI::IsMember({"desk", "full"}));
  run_cmd->add_option("--setup", run.setup, "Benchmark setup 1, 2 or 3");
  run_cmd->add_option("--scenario", run.scenario, "Scenario within the setup");
  run_cmd->add_option("--alphas", run.alphas, "Comma-separated miscoverage levels");
  run_cmd->add_option("--seeds", run.seeds, "Number of seeds");
  run_cmd->add_option("--n", run.n, "Samples per dataset");
  run_cmd->add_option("--grid", run.grid, "Number of treatment grid points");
  run_cmd->add_option("--methods", run.methods, "Comma-separated methods or 'all'");
  run_cmd->add_option("--propensity", run.propensity, "oracle, estimated or both")
      ->check(CLI::IsMember({"oracle", "estimated", "both"}));
  run_cmd->add_option("--eval", run.eval, "grid or observed")->check(CLI::IsMember({"grid", "observed"}));
  run_cmd->add_option("--master-seed", run.master_seed, "First seed of the sweep");
  run_cmd->add_option("--threads", run.threads, "Worker threads (0 = all cores)");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--format", run.format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));

  int gen_setup = 3;
  int gen_scenario = 1;
  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  std::string gen_split;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  gen_cmd->add_option("--setup", gen_setup, "Benchmark setup");
  gen_cmd->add_option("--scenario", gen_scenario, "Scenario within the setup");
  gen_cmd->add_option("--n", gen_n, "Number of samples");
  gen_cmd->add_option("--seed", gen_seed, "Generator seed");
  gen_cmd->add_option("--out", gen_out, "CSV path (stdout if omitted)");
  gen_cmd->add_option("--split", gen_split, "Also write a 50/25/25 split sidecar JSON here");

  std::string rep_in;
  std::string rep_out;
  auto* rep_cmd = app.add_subcommand("report", "Re-aggregate a coverage.csv");
  rep_cmd->add_option("--in", rep_in, "Run directory or its coverage.csv")->required();
  rep_cmd->add_option("--out", rep_out, "Directory for regenerated summary files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_command(run);
    if (*gen_cmd) return generate_command(gen_setup, gen_scenario, gen_n, gen_seed, gen_out, gen_split);
    if (*rep_cmd) return report_command(rep_in, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
