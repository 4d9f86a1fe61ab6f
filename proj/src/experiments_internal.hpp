#pragma once

#include <cstdint>
#include <string>

#include "conlab/constraint.hpp"
#include "conlab/experiments.hpp"
#include "conlab/report.hpp"
#include "conlab/rng.hpp"
#include "conlab/scoring.hpp"

namespace conlab::experiments::detail {

/// Random FiniteDistribution with 2..max_labels labels and 2..max_points
/// points. noise < 0 picks a random positive rate.
FiniteDistribution random_instance(std::uint64_t seed, std::size_t max_labels, std::size_t max_points, double noise,
                                   std::size_t feature_dim = 0);

/// Standard normal scores times `scale`.
ScoreTable random_table(const FiniteDistribution& dist, rng::Engine& g, double scale);

/// Scores whose probability outside C(x) is exactly v[i] at point i, with
/// random within-set proportions.
ScoreTable table_with_violation(const FiniteDistribution& dist, rng::Engine& g, const std::vector<double>& v);

std::string subject(const std::string& key, std::size_t value);
std::string subject(const std::string& key, std::size_t value, const std::string& key2, double value2);

std::vector<double> geometric_grid(double lo, double hi, std::size_t n);

// ccm
void noise_free_ccm_identity(const Params&, report::ExperimentReport&);
void ccm_risk_lower_bound(const Params&, report::ExperimentReport&);
void ccm_marginal_benefit(const Params&, report::ExperimentReport&);
void mu_selection_curve(const Params&, report::ExperimentReport&);
void mu_selection_safety(const Params&, report::ExperimentReport&);
void lambert_w_accuracy(const Params&, report::ExperimentReport&);
void margin_and_l1_changes(const Params&, report::ExperimentReport&);
void gradient_agreement(const Params&, report::ExperimentReport&);
void loss_relations(const Params&, report::ExperimentReport&);

// regularization and combination
void regularization_deviation(const Params&, report::ExperimentReport&);
void regularization_violation_bound(const Params&, report::ExperimentReport&);
void on_training_ordering(const Params&, report::ExperimentReport&);
void combined_objective_gain(const Params&, report::ExperimentReport&);
void post_training_futility(const Params&, report::ExperimentReport&);

// complexity
void ccm_complexity_shift(const Params&, report::ExperimentReport&);
void generalization_gap(const Params&, report::ExperimentReport&);
void capped_linear_complexity(const Params&, report::ExperimentReport&);

}  // namespace conlab::experiments::detail
