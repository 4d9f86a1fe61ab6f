#pragma once

// Experiment catalog and config-driven runner.
//
// Config layout:
//   experiment = <id>
//   seed = <u64>                 (default 1)
//   output_dir = <path>          (default out/<id>; LAB_OUTPUT_DIR overrides)
//   distribution = <path>        (optional, tabular distribution file)
//   [params]      experiment-specific keys, see `lab list --verbose`
//   [tolerances]  overrides for the documented tolerances

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "conlab/config.hpp"
#include "conlab/constraint.hpp"
#include "conlab/report.hpp"

namespace conlab::experiments {

struct ParamSpec {
  std::string key;
  std::string fallback;
  std::string help;
};

/// Typed view of [params] and [tolerances] with catalog defaults.
class Params {
 public:
  Params(const config::Config& cfg, const std::vector<ParamSpec>& params, const std::vector<ParamSpec>& tolerances,
         std::uint64_t seed);

  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  double tolerance(const std::string& key) const;
  std::uint64_t seed() const { return seed_; }

  /// Set when the config names a distribution file.
  std::optional<FiniteDistribution> distribution;

 private:
  const config::Entry& lookup(const std::string& section, const std::string& key) const;
  std::vector<std::pair<std::string, config::Entry>> params_;
  std::vector<std::pair<std::string, config::Entry>> tolerances_;
  std::uint64_t seed_;
};

using Runner = void (*)(const Params&, report::ExperimentReport&);

struct CatalogEntry {
  std::string id;
  std::string alias;        // empty when none
  std::string tag;          // result the experiment checks
  std::string anchor;       // where the result lives, in words
  std::string description;
  std::vector<ParamSpec> params;
  std::vector<ParamSpec> tolerances;
  Runner run;
};

const std::vector<CatalogEntry>& catalog();
/// Looks up ids and aliases.
const CatalogEntry* find(const std::string& id);

struct ExperimentConfig {
  std::string id;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> distribution;
  config::Config raw;
};

/// Parses and validates; every problem is a ParseError carrying its line.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(std::istream& in);

/// Runs deterministically; the report's wall time is the only varying field.
report::ExperimentReport run_experiment(const ExperimentConfig& cfg);
/// Runs with catalog defaults.
report::ExperimentReport run_default(const std::string& id, std::uint64_t seed = 1);

void write_catalog(std::ostream& out, bool verbose);

}  // namespace conlab::experiments
