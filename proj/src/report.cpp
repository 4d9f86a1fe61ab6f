#include "conlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "conlab/tabular.hpp"

namespace conlab::report {

std::string to_string(Relation r) {
  switch (r) {
    case Relation::less_equal: return "le";
    case Relation::equal: return "eq";
    case Relation::greater_equal: return "ge";
    case Relation::less: return "lt";
  }
  return "?";
}

CheckRecord make_check(std::string tag, std::string subject, double lhs, Relation rel, double rhs, double tolerance) {
  CheckRecord c{std::move(tag), std::move(subject), rel, lhs, rhs, tolerance, 0.0, false};
  switch (rel) {
    case Relation::less_equal: c.slack = rhs + tolerance - lhs; break;
    case Relation::greater_equal: c.slack = lhs - (rhs - tolerance); break;
    case Relation::equal:
      c.slack = (lhs == rhs) ? tolerance : tolerance - std::abs(lhs - rhs);
      break;
    case Relation::less: c.slack = rhs + tolerance - lhs; break;
  }
  if (std::isnan(c.slack)) {
    c.pass = false;
  } else if (rel == Relation::less) {
    c.pass = c.slack > 0.0;
  } else {
    c.pass = c.slack >= 0.0;
  }
  return c;
}

void ExperimentReport::check(std::string tag, std::string subject, double lhs, Relation rel, double rhs,
                             double tolerance) {
  records.push_back(make_check(std::move(tag), std::move(subject), lhs, rel, rhs, tolerance));
}

std::size_t ExperimentReport::failures() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& c) { return !c.pass; }));
}

bool ExperimentReport::passed() const { return failures() == 0; }

void write_report_csv(std::ostream& out, const ExperimentReport& r) {
  out << kReportCsvHeader << '\n';
  for (const auto& c : r.records) {
    out << r.experiment << ',' << c.tag << ',' << c.subject << ',' << to_string(c.relation) << ','
        << tabular::format_real(c.lhs) << ',' << tabular::format_real(c.rhs) << ','
        << tabular::format_real(c.tolerance) << ',' << tabular::format_real(c.slack) << ','
        << (c.pass ? 1 : 0) << '\n';
  }
}

void write_summary(std::ostream& out, const ExperimentReport& r) {
  out << "experiment: " << r.experiment << '\n';
  out << "seeds:";
  for (auto s : r.seeds) out << ' ' << s;
  out << '\n';
  out << "checks: " << r.records.size() << " failed: " << r.failures() << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
  out << "wall_seconds: " << buf << '\n';
  for (const auto& n : r.notes) out << "note: " << n << '\n';
  for (const auto& c : r.records) {
    if (c.pass) continue;
    out << "FAIL " << c.tag << ' ' << c.subject << ": " << tabular::format_real(c.lhs) << ' '
        << to_string(c.relation) << ' ' << tabular::format_real(c.rhs) << " (tol "
        << tabular::format_real(c.tolerance) << ", slack " << tabular::format_real(c.slack) << ")\n";
  }
  out << "status: " << (r.passed() ? "pass" : "fail") << '\n';
}

void write_plot_csv(std::ostream& out, const Plot& plot) {
  out << "curve,x,y\n";
  for (const auto& c : plot.curves) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      out << c.label << ',' << tabular::format_real(c.x[i]) << ',' << tabular::format_real(c.y[i]) << '\n';
    }
  }
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    switch (ch) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      default: o += ch;
    }
  }
  return o;
}

}  // namespace

void write_svg(std::ostream& out, const Plot& plot) {
  constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& c : plot.curves) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.y[i]) || !std::isfinite(tx(c.x[i]))) continue;
      x0 = std::min(x0, tx(c.x[i]));
      x1 = std::max(x1, tx(c.x[i]));
      y0 = std::min(y0, c.y[i]);
      y1 = std::max(y1, c.y[i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(plot.title)
      << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = L + (W - L - R) * k / 4.0;
    const double sy = H - B - (H - T - B) * k / 4.0;
    out << "<text x=\"" << num(sx) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << tick(plot.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << num(sy + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << tick(fy) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(plot.x_label) << (plot.log_x ? " (log)" : "") << "</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.curves.size(); ++k) {
    const auto& c = plot.curves[k];
    const char* color = colors[k % 7];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.y[i]) || !std::isfinite(tx(c.x[i]))) continue;
      out << num(px(c.x[i])) << ',' << num(py(c.y[i])) << ' ';
    }
    out << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << num(ly) << "\" x2=\"" << W - R + 30 << "\" y2=\"" << num(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 35 << "\" y=\"" << num(ly + 4) << "\" font-size=\"11\">" << escape(c.label)
        << "</text>\n";
  }
  out << "</svg>\n";
}

void write_all(const std::filesystem::path& dir, const ExperimentReport& r) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "report.csv");
    write_report_csv(f, r);
  }
  {
    std::ofstream f(dir / "summary.txt");
    write_summary(f, r);
  }
  for (const auto& p : r.plots) {
    std::ofstream svg(dir / (p.name + ".svg"));
    write_svg(svg, p);
    std::ofstream csv(dir / (p.name + ".csv"));
    write_plot_csv(csv, p);
  }
}

}  // namespace conlab::report
