#include "conlab/tabular.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "conlab/errors.hpp"

namespace conlab::tabular {
namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> fields;
};

std::vector<Line> read_lines(std::istream& in) {
  std::vector<Line> lines;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    std::istringstream ss(raw);
    Line line{number, {}};
    std::string field;
    while (ss >> field) line.fields.push_back(field);
    if (line.fields.empty() || line.fields.front().starts_with('#')) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

template <class Int>
Int parse_int(const std::string& text, std::size_t line) {
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("expected a nonnegative integer, got '" + text + "'", line);
  }
  return v;
}

double parse_real_at(const std::string& text, std::size_t line) {
  try {
    return parse_real(text);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), line);
  }
}

/// Consumes leading `key value` lines whose key is in `keys`.
std::map<std::string, std::size_t> read_header(const std::vector<Line>& lines, std::size_t& pos,
                                               std::initializer_list<const char*> keys) {
  std::map<std::string, std::size_t> header;
  for (const char* key : keys) {
    if (pos >= lines.size()) throw ParseError(std::string("missing header '") + key + "'", 0);
    const Line& l = lines[pos];
    if (l.fields.size() != 2 || l.fields[0] != key) {
      throw ParseError(std::string("expected header '") + key + " <n>'", l.number);
    }
    header[key] = parse_int<std::size_t>(l.fields[1], l.number);
    ++pos;
  }
  return header;
}

void expect_width(const Line& l, std::size_t width) {
  if (l.fields.size() != width) {
    throw ParseError("expected " + std::to_string(width) + " fields, got " + std::to_string(l.fields.size()),
                     l.number);
  }
}

std::vector<double> parse_features(const Line& l, std::size_t from) {
  std::vector<double> x;
  x.reserve(l.fields.size() - from);
  for (std::size_t k = from; k < l.fields.size(); ++k) x.push_back(parse_real_at(l.fields[k], l.number));
  return x;
}

void write_features(std::ostream& out, std::span<const double> x) {
  for (double v : x) out << ' ' << format_real(v);
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_real(std::string_view text) {
  if (text.empty()) throw ParseError("empty real field", 0);
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw ParseError("malformed real '" + std::string(text) + "'", 0);
  return v;
}

void write_distribution(std::ostream& out, const FiniteDistribution& dist) {
  out << "# weight oracle admissible-mask features...\n";
  out << "labels " << dist.labels().count() << "\npoints " << dist.size() << "\nfeatures "
      << dist.feature_dim() << '\n';
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const SupportPoint& p = dist.point(i);
    out << format_real(p.weight) << ' ' << p.oracle << ' ' << dist.admissible(i).bits();
    write_features(out, p.features);
    out << '\n';
  }
}

FiniteDistribution read_distribution(std::istream& in) {
  const auto lines = read_lines(in);
  std::size_t pos = 0;
  auto h = read_header(lines, pos, {"labels", "points", "features"});
  const std::size_t c = h["labels"], n = h["points"], p = h["features"];
  if (c < 2 || c > kMaxLabels) throw ParseError("label count out of range", lines[0].number);
  if (lines.size() - pos != n) {
    throw ParseError("expected " + std::to_string(n) + " point rows, got " + std::to_string(lines.size() - pos), 0);
  }
  std::vector<SupportPoint> points;
  std::vector<LabelSet> sets;
  for (; pos < lines.size(); ++pos) {
    const Line& l = lines[pos];
    expect_width(l, 3 + p);
    SupportPoint sp;
    sp.weight = parse_real_at(l.fields[0], l.number);
    sp.oracle = parse_int<std::size_t>(l.fields[1], l.number);
    sets.emplace_back(parse_int<std::uint64_t>(l.fields[2], l.number));
    sp.features = parse_features(l, 3);
    points.push_back(std::move(sp));
  }
  try {
    LabelSpace labels(c);
    return FiniteDistribution(labels, std::move(points), ConstraintMap(labels, std::move(sets)));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), 0);
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  std::size_t p = 0;
  if (!data.labeled.empty()) p = data.labeled.front().instance.features.size();
  else if (!data.unlabeled.empty()) p = data.unlabeled.front().features.size();
  out << "# split id label features...\nfeatures " << p << '\n';
  for (const auto& s : data.labeled) {
    out << "L " << s.instance.id << ' ' << s.label;
    write_features(out, s.instance.features);
    out << '\n';
  }
  for (const auto& x : data.unlabeled) {
    out << "U " << x.id << " -";
    write_features(out, x.features);
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  const auto lines = read_lines(in);
  std::size_t pos = 0;
  const std::size_t p = read_header(lines, pos, {"features"})["features"];
  Dataset data;
  for (; pos < lines.size(); ++pos) {
    const Line& l = lines[pos];
    expect_width(l, 3 + p);
    Instance x{parse_int<std::size_t>(l.fields[1], l.number), parse_features(l, 3)};
    if (l.fields[0] == "L") {
      data.labeled.push_back({std::move(x), parse_int<std::size_t>(l.fields[2], l.number)});
    } else if (l.fields[0] == "U") {
      if (l.fields[2] != "-") throw ParseError("unlabeled row must carry '-' as label", l.number);
      data.unlabeled.push_back(std::move(x));
    } else {
      throw ParseError("split must be L or U", l.number);
    }
  }
  return data;
}

void write_score_table(std::ostream& out, const ScoreTable& table) {
  out << "# f_0 .. f_{c-1} per instance\nlabels " << table.labels() << "\ninstances " << table.instances()
      << '\n';
  for (std::size_t i = 0; i < table.instances(); ++i) {
    auto r = table.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? " " : "") << format_real(r[j]);
    out << '\n';
  }
}

ScoreTable read_score_table(std::istream& in) {
  const auto lines = read_lines(in);
  std::size_t pos = 0;
  auto h = read_header(lines, pos, {"labels", "instances"});
  const std::size_t c = h["labels"], n = h["instances"];
  if (lines.size() - pos != n) throw ParseError("row count does not match 'instances'", 0);
  std::vector<double> s;
  s.reserve(c * n);
  for (; pos < lines.size(); ++pos) {
    expect_width(lines[pos], c);
    for (double v : parse_features(lines[pos], 0)) s.push_back(v);
  }
  try {
    return ScoreTable(c, std::move(s));
  } catch (const std::exception& e) {
    throw ParseError(e.what(), 0);
  }
}

FiniteDistribution load_distribution(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_distribution(in);
}

void save_distribution(const std::filesystem::path& path, const FiniteDistribution& dist) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_distribution(out, dist);
}

}  // namespace conlab::tabular
