#pragma once

// Verification records, plots and their on-disk form.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace conlab::report {

enum class Relation { less_equal, equal, greater_equal, less };
std::string to_string(Relation r);

/// One checked inequality or identity: `lhs relation rhs` up to `tolerance`.
struct CheckRecord {
  std::string tag;      // machine-readable name of what was checked
  std::string subject;  // instance / grid point
  Relation relation = Relation::less_equal;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  double slack = 0.0;   // >= 0 iff the check passes
  bool pass = false;
};

CheckRecord make_check(std::string tag, std::string subject, double lhs, Relation rel, double rhs, double tolerance);

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string name;  // file stem
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Curve> curves;
};

/// Standalone SVG polyline chart.
void write_svg(std::ostream& out, const Plot& plot);
/// Long format: curve,x,y
void write_plot_csv(std::ostream& out, const Plot& plot);

struct ExperimentReport {
  std::string experiment;
  std::vector<std::uint64_t> seeds;
  std::vector<CheckRecord> records;
  std::vector<Plot> plots;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;

  void check(std::string tag, std::string subject, double lhs, Relation rel, double rhs, double tolerance);
  bool passed() const;
  std::size_t failures() const;
};

inline constexpr const char* kReportCsvHeader = "experiment,tag,subject,relation,lhs,rhs,tolerance,slack,pass";

void write_report_csv(std::ostream& out, const ExperimentReport& r);
void write_summary(std::ostream& out, const ExperimentReport& r);
/// report.csv, summary.txt, and <plot>.svg / <plot>.csv for each plot.
void write_all(const std::filesystem::path& dir, const ExperimentReport& r);

}  // namespace conlab::report
