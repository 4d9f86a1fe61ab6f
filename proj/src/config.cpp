#include "conlab/config.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <fstream>
#include <istream>

#include "conlab/errors.hpp"
#include "conlab/tabular.hpp"

namespace conlab::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char ch : k) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) return false;
  }
  return true;
}

}  // namespace

Config Config::parse(std::istream& in) {
  Config cfg;
  cfg.sections_[""];
  std::string current;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header", line);
      current = trim(s.substr(1, s.size() - 2));
      if (!valid_key(current)) throw ParseError("invalid section name '" + current + "'", line);
      cfg.sections_[current];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!valid_key(key)) throw ParseError("invalid key '" + key + "'", line);
    if (value.empty()) throw ParseError("key '" + key + "' has no value", line);
    auto& sec = cfg.sections_[current];
    if (sec.count(key)) throw ParseError("duplicate key '" + key + "'", line);
    sec[key] = Entry{value, line};
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string(), 0);
  return parse(in);
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key);
}

const std::map<std::string, Entry>& Config::section(const std::string& name) const {
  static const std::map<std::string, Entry> empty;
  auto it = sections_.find(name);
  return it == sections_.end() ? empty : it->second;
}

std::vector<std::string> Config::section_names() const {
  std::vector<std::string> names;
  for (const auto& [k, v] : sections_) names.push_back(k);
  return names;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? this->section(section).at(key).value : fallback;
}

double Config::get_real(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  const Entry& e = this->section(section).at(key);
  return to_real(e.value, e.line);
}

std::uint64_t Config::get_unsigned(const std::string& section, const std::string& key, std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const Entry& e = this->section(section).at(key);
  return to_unsigned(e.value, e.line);
}

std::vector<double> Config::get_reals(const std::string& section, const std::string& key,
                                      const std::vector<double>& fallback) const {
  if (!has(section, key)) return fallback;
  const Entry& e = this->section(section).at(key);
  return to_reals(e.value, e.line);
}

double to_real(const std::string& text, std::size_t line) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  try {
    return tabular::parse_real(text);
  } catch (const ParseError&) {
    throw ParseError("expected a real number, got '" + text + "'", line);
  }
}

std::uint64_t to_unsigned(const std::string& text, std::size_t line) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("expected a nonnegative integer, got '" + text + "'", line);
  }
  return v;
}

std::vector<double> to_reals(const std::string& text, std::size_t line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) throw ParseError("empty item in list '" + text + "'", line);
    out.push_back(to_real(item, line));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ParseError("list must not be empty", line);
  return out;
}

}  // namespace conlab::config
