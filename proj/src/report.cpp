#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "doseconf/bench.hpp"
#include "doseconf/error.hpp"
#include "doseconf/format.hpp"

namespace doseconf {

namespace {

constexpr std::string_view kCoverageHeader =
    "method,seed,alpha,setup,scenario,mean_coverage,mean_width,median_width,inf_fraction,ess_median";
constexpr std::string_view kGridHeader = "method,seed,alpha,t0,coverage";
constexpr std::string_view kFailurePrefix = "# failed_seed,";

nlohmann::json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::uint64_t parse_seed(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw InvalidArgument("bad seed '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad seed '" + s + "'");
  }
}

int parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw InvalidArgument("bad integer '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad integer '" + s + "'");
  }
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

void write_coverage_csv(const CoverageReport& report, std::ostream& out) {
  out << kCoverageHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.seed << ',' << format_double(r.alpha) << ',' << r.setup << ',' << r.scenario << ','
        << format_double(r.mean_coverage) << ',' << format_double(r.mean_width) << ','
        << format_double(r.median_width) << ',' << format_double(r.inf_fraction) << ','
        << format_double(r.ess_median) << '\n';
  }
  for (const auto& f : report.failures) {
    std::string msg = f.message;
    for (char& c : msg) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    out << kFailurePrefix << f.seed << ',' << msg << '\n';
  }
}

void write_grid_csv(const CoverageReport& report, std::ostream& out) {
  out << kGridHeader << '\n';
  for (const auto& g : report.grid) {
    out << g.method << ',' << g.seed << ',' << format_double(g.alpha) << ',' << format_double(g.t0) << ','
        << format_double(g.coverage) << '\n';
  }
}

void write_summary_csv(const std::vector<MethodSummary>& summary, std::ostream& out) {
  out << "method,alpha,n_seeds,mean_coverage,coverage_variance,mean_width,inf_fraction,ess_median\n";
  for (const auto& s : summary) {
    out << s.method << ',' << format_double(s.alpha) << ',' << s.n_seeds << ',' << format_double(s.mean_coverage)
        << ',' << format_double(s.coverage_variance) << ',' << format_double(s.mean_width) << ','
        << format_double(s.inf_fraction) << ',' << format_double(s.ess_median) << '\n';
  }
}

nlohmann::json report_to_json(const CoverageReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", r.method},
                    {"seed", r.seed},
                    {"alpha", r.alpha},
                    {"setup", r.setup},
                    {"scenario", r.scenario},
                    {"mean_coverage", number_or_null(r.mean_coverage)},
                    {"mean_width", number_or_null(r.mean_width)},
                    {"median_width", number_or_null(r.median_width)},
                    {"inf_fraction", number_or_null(r.inf_fraction)},
                    {"ess_median", number_or_null(r.ess_median)}});
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : report.summarize()) {
    summary.push_back({{"method", s.method},
                       {"alpha", s.alpha},
                       {"n_seeds", s.n_seeds},
                       {"mean_coverage", number_or_null(s.mean_coverage)},
                       {"coverage_variance", number_or_null(s.coverage_variance)},
                       {"mean_width", number_or_null(s.mean_width)},
                       {"inf_fraction", number_or_null(s.inf_fraction)},
                       {"ess_median", number_or_null(s.ess_median)}});
  }
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& g : report.grid) {
    grid.push_back({{"method", g.method},
                    {"seed", g.seed},
                    {"alpha", g.alpha},
                    {"t0", g.t0},
                    {"coverage", number_or_null(g.coverage)}});
  }
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& f : report.failures) failed.push_back({{"seed", f.seed}, {"message", f.message}});
  return {{"rows", rows}, {"summary", summary}, {"grid", grid}, {"failed_seeds", failed}};
}

CoverageReport read_coverage_csv(std::istream& in) {
  CoverageReport report;
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kCoverageHeader) {
    throw InvalidArgument("coverage CSV has an unexpected header");
  }
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line.rfind(kFailurePrefix, 0) == 0) {
      const auto rest = line.substr(kFailurePrefix.size());
      const auto comma = rest.find(',');
      report.failures.push_back(
          {parse_seed(rest.substr(0, comma)), comma == std::string::npos ? "" : rest.substr(comma + 1)});
      continue;
    }
    if (line.front() == '#') continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) throw InvalidArgument("coverage CSV row has " + std::to_string(f.size()) + " fields");
    CoverageRow r;
    r.method = f[0];
    r.seed = parse_seed(f[1]);
    r.alpha = parse_double(f[2]);
    r.setup = parse_int(f[3]);
    r.scenario = parse_int(f[4]);
    r.mean_coverage = parse_double(f[5]);
    r.mean_width = parse_double(f[6]);
    r.median_width = parse_double(f[7]);
    r.inf_fraction = parse_double(f[8]);
    r.ess_median = parse_double(f[9]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::vector<GridCoverageRow> read_grid_csv(std::istream& in) {
  std::vector<GridCoverageRow> rows;
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kGridHeader) {
    throw InvalidArgument("grid coverage CSV has an unexpected header");
  }
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw InvalidArgument("grid coverage CSV row has " + std::to_string(f.size()) + " fields");
    rows.push_back({f[0], parse_seed(f[1]), parse_double(f[2]), parse_double(f[3]), parse_double(f[4])});
  }
  return rows;
}

void emit_report(const CoverageReport& report, const std::filesystem::path& dir, ReportFormat format,
                 const std::optional<ExperimentConfig>& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  if (format == ReportFormat::Csv || format == ReportFormat::Both) {
    write_file(dir / "coverage.csv", [&](std::ostream& out) { write_coverage_csv(report, out); });
    write_file(dir / "grid_coverage.csv", [&](std::ostream& out) { write_grid_csv(report, out); });
    write_file(dir / "summary.csv", [&](std::ostream& out) { write_summary_csv(report.summarize(), out); });
  }
  if (format == ReportFormat::Json || format == ReportFormat::Both) {
    auto j = report_to_json(report);
    if (cfg) j["config"] = config_to_json(*cfg);
    write_file(dir / "report.json", [&](std::ostream& out) { out << j.dump(2) << '\n'; });
  }
}

}  // namespace doseconf
