#pragma once

// Label spaces, constraint mappings and the finite distributions every
// population quantity in this library is computed over.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace conlab {

/// Labels are packed into one 64-bit mask per instance.
inline constexpr std::size_t kMaxLabels = 64;

class LabelSpace {
 public:
  /// Throws std::invalid_argument unless 2 <= count <= kMaxLabels.
  explicit LabelSpace(std::size_t count);

  std::size_t count() const noexcept { return count_; }
  bool contains(std::size_t label) const noexcept { return label < count_; }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  std::size_t count_;
};

/// A subset of labels; bit y is set iff label y belongs to the set.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr explicit LabelSet(std::uint64_t bits) : bits_(bits) {}

  static LabelSet all(std::size_t count);
  static LabelSet of(std::initializer_list<std::size_t> labels);

  constexpr bool contains(std::size_t label) const noexcept {
    return label < kMaxLabels && ((bits_ >> label) & 1u) != 0;
  }
  constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::uint64_t bits() const noexcept { return bits_; }

  /// Labels of 0..count-1 outside this set.
  LabelSet complement(std::size_t count) const;

  friend constexpr bool operator==(LabelSet, LabelSet) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Non-owning view of one instance: its identity (index into constraint maps
/// and score tables) and its feature vector (empty for tabulated instances).
struct InstanceView {
  std::size_t id = 0;
  std::span<const double> features;
};

struct Instance {
  std::size_t id = 0;
  std::vector<double> features;

  InstanceView view() const { return {id, features}; }
  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Per-instance admissible label sets, keyed by instance id.
class ConstraintMap {
 public:
  /// Rejects empty sets and sets reaching outside the label space.
  ConstraintMap(LabelSpace labels, std::vector<LabelSet> admissible);

  /// The same admissible set at every one of `instances` ids.
  static ConstraintMap uniform(LabelSpace labels, std::size_t instances, LabelSet admissible);

  /// Evaluates `rule` on each feature vector once; id i gets rule(features[i]).
  static ConstraintMap from_rule(LabelSpace labels, std::span<const std::vector<double>> features,
                                 const std::function<LabelSet(std::span<const double>)>& rule);

  LabelSpace labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return sets_.size(); }

  /// Throws std::out_of_range for an unknown id.
  LabelSet admissible(std::size_t instance_id) const;

  friend bool operator==(const ConstraintMap&, const ConstraintMap&) = default;

 private:
  LabelSpace labels_;
  std::vector<LabelSet> sets_;
};

/// 1 iff `label` is outside the admissible set of `instance_id`.
int violation_indicator(const ConstraintMap& cmap, std::size_t instance_id, std::size_t label);

struct LabeledSample {
  Instance instance;
  std::size_t label = 0;
  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct Dataset {
  std::vector<LabeledSample> labeled;
  std::vector<Instance> unlabeled;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SupportPoint {
  double weight = 0.0;
  std::size_t oracle = 0;
  std::vector<double> features;
  friend bool operator==(const SupportPoint&, const SupportPoint&) = default;
};

/// An enumerable instance space: point i has id i, probability weight,
/// deterministic oracle label and admissible set constraint().admissible(i).
class FiniteDistribution {
 public:
  /// Validates weights (nonnegative, summing to 1 within 1e-12), oracle
  /// labels, feature dimensions and that the constraint covers every point.
  FiniteDistribution(LabelSpace labels, std::vector<SupportPoint> points, ConstraintMap constraint);

  LabelSpace labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return points_.size(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::span<const SupportPoint> points() const noexcept { return points_; }
  const SupportPoint& point(std::size_t i) const { return points_.at(i); }
  const ConstraintMap& constraint() const noexcept { return constraint_; }

  InstanceView instance(std::size_t i) const { return {i, points_[i].features}; }
  LabelSet admissible(std::size_t i) const { return constraint_.admissible(i); }
  bool oracle_violates(std::size_t i) const { return !admissible(i).contains(points_[i].oracle); }

  FiniteDistribution with_constraint(ConstraintMap constraint) const;

  friend bool operator==(const FiniteDistribution&, const FiniteDistribution&) = default;

 private:
  LabelSpace labels_;
  std::vector<SupportPoint> points_;
  ConstraintMap constraint_;
  std::size_t feature_dim_ = 0;
};

/// Probability that the oracle label falls outside the constraint.
double oracle_noise_rate(const FiniteDistribution& dist);

/// i.i.d. draws; labeled samples carry the oracle label, unlabeled ones do
/// not. Deterministic given `seed`.
Dataset sample_dataset(const FiniteDistribution& dist, std::size_t labeled, std::size_t unlabeled,
                       std::uint64_t seed);

/// Draws `count` support-point ids i.i.d. from the weights.
std::vector<std::size_t> sample_ids(const FiniteDistribution& dist, std::size_t count, std::uint64_t seed);

}  // namespace conlab
