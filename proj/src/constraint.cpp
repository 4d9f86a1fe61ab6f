#include "conlab/constraint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "conlab/kernels.hpp"
#include "conlab/rng.hpp"

namespace conlab {

LabelSpace::LabelSpace(std::size_t count) : count_(count) {
  if (count < 2 || count > kMaxLabels) {
    throw std::invalid_argument("label count must be in [2, 64], got " + std::to_string(count));
  }
}

LabelSet LabelSet::all(std::size_t count) {
  return LabelSet(count >= kMaxLabels ? ~std::uint64_t{0} : (std::uint64_t{1} << count) - 1);
}

LabelSet LabelSet::of(std::initializer_list<std::size_t> labels) {
  std::uint64_t bits = 0;
  for (std::size_t y : labels) {
    if (y >= kMaxLabels) throw std::invalid_argument("label index out of range");
    bits |= std::uint64_t{1} << y;
  }
  return LabelSet(bits);
}

LabelSet LabelSet::complement(std::size_t count) const { return LabelSet(~bits_ & all(count).bits()); }

ConstraintMap::ConstraintMap(LabelSpace labels, std::vector<LabelSet> admissible)
    : labels_(labels), sets_(std::move(admissible)) {
  const auto full = LabelSet::all(labels_.count()).bits();
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    if (sets_[i].empty()) {
      throw std::invalid_argument("empty admissible set at instance " + std::to_string(i));
    }
    if ((sets_[i].bits() & ~full) != 0) {
      throw std::invalid_argument("admissible set at instance " + std::to_string(i) +
                                  " names a label outside the label space");
    }
  }
}

ConstraintMap ConstraintMap::uniform(LabelSpace labels, std::size_t instances, LabelSet admissible) {
  return ConstraintMap(labels, std::vector<LabelSet>(instances, admissible));
}

ConstraintMap ConstraintMap::from_rule(LabelSpace labels, std::span<const std::vector<double>> features,
                                       const std::function<LabelSet(std::span<const double>)>& rule) {
  std::vector<LabelSet> sets;
  sets.reserve(features.size());
  for (const auto& x : features) sets.push_back(rule(x));
  return ConstraintMap(labels, std::move(sets));
}

LabelSet ConstraintMap::admissible(std::size_t instance_id) const {
  if (instance_id >= sets_.size()) {
    throw std::out_of_range("unknown instance id " + std::to_string(instance_id));
  }
  return sets_[instance_id];
}

int violation_indicator(const ConstraintMap& cmap, std::size_t instance_id, std::size_t label) {
  const LabelSet allowed = cmap.admissible(instance_id);
  if (!cmap.labels().contains(label)) throw std::out_of_range("label " + std::to_string(label) + " out of range");
  return allowed.contains(label) ? 0 : 1;
}

FiniteDistribution::FiniteDistribution(LabelSpace labels, std::vector<SupportPoint> points,
                                       ConstraintMap constraint)
    : labels_(labels), points_(std::move(points)), constraint_(std::move(constraint)) {
  if (points_.empty()) throw std::invalid_argument("distribution needs at least one support point");
  if (!(constraint_.labels() == labels_)) throw std::invalid_argument("constraint label space mismatch");
  if (constraint_.size() != points_.size()) {
    throw std::invalid_argument("constraint covers " + std::to_string(constraint_.size()) + " instances, expected " +
                                std::to_string(points_.size()));
  }
  feature_dim_ = points_.front().features.size();
  std::vector<double> weights(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!std::isfinite(p.weight) || p.weight < 0.0) {
      throw std::invalid_argument("weight of point " + std::to_string(i) + " is negative or not finite");
    }
    if (!labels_.contains(p.oracle)) throw std::invalid_argument("oracle label out of range at point " + std::to_string(i));
    if (p.features.size() != feature_dim_) throw std::invalid_argument("ragged feature dimensions");
    weights[i] = p.weight;
  }
  const double total = kernels::pairwise_sum(weights);
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("weights sum to " + std::to_string(total) + ", expected 1");
  }
}

FiniteDistribution FiniteDistribution::with_constraint(ConstraintMap constraint) const {
  return FiniteDistribution(labels_, points_, std::move(constraint));
}

double oracle_noise_rate(const FiniteDistribution& dist) {
  return kernels::sum_parallel(dist.size(), [&](std::size_t i) {
    return dist.oracle_violates(i) ? dist.point(i).weight : 0.0;
  });
}

namespace {

std::vector<double> cumulative_weights(const FiniteDistribution& dist) {
  std::vector<double> cdf(dist.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist.point(i).weight;
    cdf[i] = acc;
  }
  return cdf;
}

std::size_t draw(const std::vector<double>& cdf, rng::Engine& g) {
  // Scale by the realized total so rounding in the cumulative sum never
  // leaves the last point unreachable.
  const double u = rng::uniform01(g) * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

std::vector<std::size_t> sample_ids(const FiniteDistribution& dist, std::size_t count, std::uint64_t seed) {
  const auto cdf = cumulative_weights(dist);
  rng::Engine g(seed);
  std::vector<std::size_t> ids(count);
  for (auto& id : ids) id = draw(cdf, g);
  return ids;
}

Dataset sample_dataset(const FiniteDistribution& dist, std::size_t labeled, std::size_t unlabeled,
                       std::uint64_t seed) {
  const auto cdf = cumulative_weights(dist);
  // Separate streams so growing one split never reshuffles the other.
  rng::Engine g_labeled(rng::derive_seed(seed, 0));
  rng::Engine g_unlabeled(rng::derive_seed(seed, 1));
  Dataset out;
  out.labeled.reserve(labeled);
  out.unlabeled.reserve(unlabeled);
  for (std::size_t k = 0; k < labeled; ++k) {
    const std::size_t i = draw(cdf, g_labeled);
    out.labeled.push_back({Instance{i, dist.point(i).features}, dist.point(i).oracle});
  }
  for (std::size_t k = 0; k < unlabeled; ++k) {
    const std::size_t i = draw(cdf, g_unlabeled);
    out.unlabeled.push_back(Instance{i, dist.point(i).features});
  }
  return out;
}

}  // namespace conlab
