#pragma once

// Losses and violations: pointwise, empirical and exact population versions,
// each evaluated on the CCM scores f^mu (mu = 0 gives the plain scorer).

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conlab/constraint.hpp"
#include "conlab/scoring.hpp"

namespace conlab {

enum class LossKind { ell1, cross_entropy, hinge_margin };

std::string to_string(LossKind kind);
/// Accepts "ell1", "cross_entropy", "hinge_margin"; throws std::invalid_argument.
LossKind parse_loss_kind(const std::string& name);

/// Upper clamp for -log P(gold) when strict inference gives the gold label
/// probability exactly 0. The margin loss is clamped the same way.
inline constexpr double kCrossEntropyCap = 1e4;

/// Everything one support point contributes, computed from one score vector.
struct PointMetrics {
  double loss_l1 = 0.0;       // 1 - P(gold)
  double loss_ce = 0.0;       // -log P(gold), clamped
  double hinge = 0.0;         // max_y {f + 1[y != gold]} - f(gold)
  double margin = 0.0;        // max_y f - f(gold)
  double violation_l1 = 0.0;  // P(not C)
  double violation_ce = 0.0;  // -log P(C)
  double violation_01 = 0.0;  // 1[argmax not in C]
  double p_gold = 0.0;
};

/// Metrics of the scores f^mu built from `scores`.
PointMetrics point_metrics(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold);

/// (violation_l1, violation_ce) of f^mu; exact zeros under strict inference
/// or when nothing is excluded.
struct PointViolation {
  double l1 = 0.0;
  double ce = 0.0;
};
PointViolation point_violation(std::span<const double> scores, LabelSet admissible, Mu mu);

double pointwise_loss(LossKind kind, const Scorer& scorer, InstanceView x, std::size_t gold);
double pointwise_loss(LossKind kind, const CcmModel& model, InstanceView x, std::size_t gold);
/// kind must be ell1 or cross_entropy.
double pointwise_violation(LossKind kind, const Scorer& scorer, const ConstraintMap& cmap, InstanceView x,
                           Mu mu = {});

struct RiskReport {
  enum class Basis { empirical, exact_population };

  LossKind kind = LossKind::ell1;
  double risk = 0.0;
  std::optional<double> violation_l1;
  std::optional<double> violation_ce;
  std::optional<double> margin;
  Basis basis = Basis::exact_population;
  std::size_t sample_size = 0;  // m for empirical reports, support size otherwise
};

/// `key value` lines: kind risk violation_l1 violation_ce margin basis sample_size;
/// absent optionals print as "na".
void write_key_value(std::ostream& out, const RiskReport& report);
/// Column order: kind,risk,violation_l1,violation_ce,margin,basis,sample_size.
std::string csv_header_risk_report();
std::string csv_row(const RiskReport& report);

/// Weighted population averages of every PointMetrics field.
struct PopulationMetrics {
  double risk_l1 = 0.0;
  double risk_ce = 0.0;
  double risk_hinge = 0.0;
  double margin = 0.0;
  double violation_l1 = 0.0;
  double violation_ce = 0.0;
  double violation_01 = 0.0;
  double gold_times_outside = 0.0;  // E[P(gold) P(not C)] of the base scorer
};

/// Exact expectations over the support, for f^mu.
PopulationMetrics population_metrics(const FiniteDistribution& dist, const Scorer& scorer, Mu mu = {});

/// Reference twin of population_metrics: one thread, plain reverse-order loop.
PopulationMetrics population_metrics_serial(const FiniteDistribution& dist, const Scorer& scorer, Mu mu = {});

RiskReport population_risk(const FiniteDistribution& dist, const Scorer& scorer, LossKind kind, Mu mu = {});

/// Mean loss over S_L. With a constraint map the violations are averaged
/// over S_U when it is nonempty and over S_L otherwise. Throws
/// std::invalid_argument when S_L is empty.
RiskReport empirical_risk(const Dataset& data, const Scorer& scorer, LossKind kind,
                          const ConstraintMap* cmap = nullptr, Mu mu = {});

/// Mean violation over S_U; throws std::invalid_argument when S_U is empty.
double empirical_violation(const Dataset& data, const Scorer& scorer, const ConstraintMap& cmap, LossKind kind,
                           Mu mu = {});

// Gradients with respect to the score vector of one instance, all for f^mu.

/// d(-log P(gold)) = P^mu - e_gold; zero when the loss is clamped.
void ce_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold,
                       std::span<double> out);
/// d(1 - P(gold)) = -P(gold) (e_gold - P^mu).
void l1_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold,
                       std::span<double> out);
/// Subgradient e_yhat - e_gold of the hinge, yhat the loss-augmented argmax.
void hinge_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold,
                          std::span<double> out);
/// d(-log P(C)) = P^mu - P restricted and renormalized to C.
void violation_ce_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu,
                                 std::span<double> out);
/// d P(not C) = P^mu_j (1[j not in C] - P^mu(not C)).
void violation_l1_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu,
                                 std::span<double> out);

/// Gradient of the pointwise loss over the weights of a linear scorer
/// (row-major like LinearScorer::weights()).
std::vector<double> loss_gradient(LossKind kind, const LinearScorer& scorer, InstanceView x, std::size_t gold,
                                  LabelSet admissible = {}, Mu mu = {});
std::vector<double> violation_gradient(LossKind kind, const LinearScorer& scorer, InstanceView x,
                                       LabelSet admissible, Mu mu = {});

/// Accumulates out_j += g_j * x for every label j.
void accumulate_linear_gradient(std::span<const double> score_grad, std::span<const double> x, double weight,
                                std::span<double> out);

}  // namespace conlab
