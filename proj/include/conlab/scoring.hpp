#pragma once

// Scoring functions, softmax inference and the constrained conditional model
// f^mu(x, y) = f(x, y) - mu * v(x, y).

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "conlab/constraint.hpp"

namespace conlab {

/// f(x, j) = w_j . x with an optional budget sum_j |w_j|^2 <= B.
class LinearScorer {
 public:
  LinearScorer(std::size_t labels, std::size_t dim, std::optional<double> norm_budget = std::nullopt);
  /// `weights` is row-major, labels x dim.
  LinearScorer(std::size_t labels, std::size_t dim, std::vector<double> weights,
               std::optional<double> norm_budget = std::nullopt);

  std::size_t labels() const noexcept { return labels_; }
  std::size_t dim() const noexcept { return dim_; }
  std::optional<double> norm_budget() const noexcept { return budget_; }

  std::span<const double> weights() const noexcept { return w_; }
  std::span<double> weights() noexcept { return w_; }
  std::span<const double> row(std::size_t label) const { return std::span(w_).subspan(label * dim_, dim_); }
  std::span<double> row(std::size_t label) { return std::span(w_).subspan(label * dim_, dim_); }

  double squared_norm() const;

  /// Radial projection onto the budget ball; no-op without a budget.
  void project();

  void scores(std::span<const double> x, std::span<double> out) const;

  friend bool operator==(const LinearScorer&, const LinearScorer&) = default;

 private:
  std::size_t labels_;
  std::size_t dim_;
  std::vector<double> w_;
  std::optional<double> budget_;
};

/// Tabulated scores, one finite row of length `labels` per instance id.
class ScoreTable {
 public:
  /// `scores` is row-major, instances x labels; throws InvalidScore on
  /// non-finite entries.
  ScoreTable(std::size_t labels, std::vector<double> scores);
  static ScoreTable from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t labels() const noexcept { return labels_; }
  std::size_t instances() const noexcept { return labels_ ? s_.size() / labels_ : 0; }

  std::span<const double> values() const noexcept { return s_; }
  std::span<double> values() noexcept { return s_; }
  std::span<const double> row(std::size_t id) const;
  std::span<double> row(std::size_t id);

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;

 private:
  std::size_t labels_;
  std::vector<double> s_;
};

/// Either scorer kind behind one value type.
class Scorer {
 public:
  Scorer(LinearScorer s) : impl_(std::move(s)) {}  // NOLINT(google-explicit-constructor)
  Scorer(ScoreTable s) : impl_(std::move(s)) {}    // NOLINT(google-explicit-constructor)

  std::size_t labels() const;

  /// Writes f(x, .) into `out` (length labels()).
  void scores(InstanceView x, std::span<double> out) const;
  std::vector<double> scores(InstanceView x) const;

  const LinearScorer* linear() const { return std::get_if<LinearScorer>(&impl_); }
  LinearScorer* linear() { return std::get_if<LinearScorer>(&impl_); }
  const ScoreTable* table() const { return std::get_if<ScoreTable>(&impl_); }
  ScoreTable* table() { return std::get_if<ScoreTable>(&impl_); }

  friend bool operator==(const Scorer&, const Scorer&) = default;

 private:
  std::variant<LinearScorer, ScoreTable> impl_;
};

/// CCM trade-off in [0, inf]. Infinity is a distinct state that selects the
/// strict-inference code paths; it is never a large finite number.
class Mu {
 public:
  constexpr Mu() = default;
  /// Throws std::invalid_argument for negative or NaN values; +inf maps to
  /// infinite().
  static Mu from(double value);
  static constexpr Mu infinite() { return Mu(true, 0.0); }

  constexpr bool is_infinite() const noexcept { return infinite_; }
  constexpr bool is_zero() const noexcept { return !infinite_ && value_ == 0.0; }
  /// +inf when infinite.
  constexpr double value() const noexcept {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr bool operator==(Mu, Mu) = default;

 private:
  constexpr Mu(bool inf, double v) : infinite_(inf), value_(v) {}
  bool infinite_ = false;
  double value_ = 0.0;
};

struct CcmModel {
  Scorer base;
  Mu mu;
  ConstraintMap constraint;
};

double log_sum_exp(std::span<const double> values);
/// log sum over the labels in `subset` only; -inf for an empty subset.
double log_sum_exp(std::span<const double> values, LabelSet subset);

/// Max-shifted softmax; throws InvalidScore on non-finite scores.
void softmax(std::span<const double> scores, std::span<double> out);
std::vector<double> softmax(std::span<const double> scores);

/// Softmax of f - mu*v for finite mu; for mu = inf the softmax restricted to
/// the admissible labels with exact zeros elsewhere.
void ccm_softmax(std::span<const double> scores, LabelSet admissible, Mu mu, std::span<double> out);

/// Writes f^mu scores; inadmissible labels get -inf under strict inference.
void ccm_scores(std::span<const double> scores, LabelSet admissible, Mu mu, std::span<double> out);

/// Index of the largest score, lowest index on ties.
std::size_t argmax(std::span<const double> scores);
/// argmax of f^mu; under strict inference only admissible labels compete.
std::size_t ccm_argmax(std::span<const double> scores, LabelSet admissible, Mu mu);

std::vector<double> softmax_predict(const Scorer& scorer, InstanceView x);
std::vector<double> ccm_predict(const CcmModel& model, InstanceView x);
std::size_t argmax_label(const Scorer& scorer, InstanceView x);
std::size_t argmax_label(const CcmModel& model, InstanceView x);

}  // namespace conlab
