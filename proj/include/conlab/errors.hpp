#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conlab {

/// A score vector contained NaN or an infinity.
class InvalidScore : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A documented precondition of an analysis routine does not hold. `value()`
/// carries the offending quantity (for example the risk change that should
/// have been positive).
class PreconditionError : public std::invalid_argument {
 public:
  PreconditionError(const std::string& what, double value)
      : std::invalid_argument(what), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Parameters of a synthetic construction violate its own constraints.
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sampler cannot meet its targets (e.g. moments too close to the sphere).
class FeasibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input; `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace conlab
