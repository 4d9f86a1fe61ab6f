#pragma once

// Plain-text tables for distributions, datasets and score tables.
//
// Lines starting with '#' and blank lines are ignored. A header of
// `key value` lines precedes the rows; fields are whitespace separated and
// reals are written with 17 significant digits, so a write/read cycle is
// bit-exact.
//
//   distribution:  labels C / points N / features P, then per point
//                  weight oracle admissible-mask x_1 .. x_P
//   dataset:       features P, then per sample
//                  L|U id label|- x_1 .. x_P
//   score table:   labels C / instances N, then per instance f_0 .. f_{C-1}
//
// The admissible mask is the decimal value of the label bit set.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "conlab/constraint.hpp"
#include "conlab/scoring.hpp"

namespace conlab::tabular {

/// %.17g rendering; round-trips every finite double.
std::string format_real(double value);
/// Throws ParseError (without a line) on trailing garbage or an empty field.
double parse_real(std::string_view text);

void write_distribution(std::ostream& out, const FiniteDistribution& dist);
FiniteDistribution read_distribution(std::istream& in);

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);

void write_score_table(std::ostream& out, const ScoreTable& table);
ScoreTable read_score_table(std::istream& in);

FiniteDistribution load_distribution(const std::filesystem::path& path);
void save_distribution(const std::filesystem::path& path, const FiniteDistribution& dist);

}  // namespace conlab::tabular
