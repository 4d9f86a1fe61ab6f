#pragma once

// Flat `key = value` configuration files with optional [section] headers.
// '#' starts a comment line. Keys before the first header belong to the
// unnamed section "".

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace conlab::config {

struct Entry {
  std::string value;
  std::size_t line = 0;
};

class Config {
 public:
  /// Throws ParseError with the offending line.
  static Config parse(std::istream& in);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  const std::map<std::string, Entry>& section(const std::string& name) const;
  std::vector<std::string> section_names() const;

  /// Typed getters; conversion failures throw ParseError at the entry's line.
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& section, const std::string& key, double fallback) const;
  std::uint64_t get_unsigned(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  /// Comma separated reals; throws ParseError for an empty list.
  std::vector<double> get_reals(const std::string& section, const std::string& key,
                                const std::vector<double>& fallback) const;

 private:
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

double to_real(const std::string& text, std::size_t line);
std::uint64_t to_unsigned(const std::string& text, std::size_t line);
std::vector<double> to_reals(const std::string& text, std::size_t line);

}  // namespace conlab::config
