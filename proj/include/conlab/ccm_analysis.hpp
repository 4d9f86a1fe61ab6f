#pragma once

// How constrained inference changes the risk of a fixed scorer: exact risk
// deltas, their closed-form lower bounds, the Lambert-W rule for choosing
// mu, and the thresholds on rho for combining CCM with regularization.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "conlab/constraint.hpp"
#include "conlab/scoring.hpp"

namespace conlab {

struct RiskDelta {
  Mu mu;
  double delta_ce = 0.0;        // R_ce(f) - R_ce(f^mu)
  double lower_bound_ce = 0.0;  // V(f)(1 - e^-mu) - mu V_ora
  double delta_l1 = 0.0;        // R(f) - R(f^mu)
  double lower_bound_l1 = 0.0;  // (1 - e^-2mu)/2 E[P(gold) P(not C)] - mu V_ora
  double delta_margin = 0.0;    // M(f) - M(f^mu)
  double violation = 0.0;       // V(f)
  double noise_rate = 0.0;      // V_ora
  double eta = 0.0;             // V(f) / V_ora, +inf when V_ora = 0
  bool lower_bound_holds = true;  // delta_ce >= lower_bound_ce - 1e-10
};

/// Exact population deltas of f^mu against f. At mu = inf the l1 bound is
/// E[P(gold) P(not C)] for a noise-free constraint and -inf otherwise.
RiskDelta risk_delta(const FiniteDistribution& dist, const Scorer& scorer, Mu mu);

/// d/dmu of R_ce(f) - R_ce(f^mu), which equals V(f^mu) - V_ora.
double delta_ce_derivative(const FiniteDistribution& dist, const Scorer& scorer, Mu mu);

enum class Benefit { improves, degrades, neutral };
std::string to_string(Benefit b);

struct BenefitReport {
  Benefit sign = Benefit::neutral;
  double derivative = 0.0;     // V(f) - V_ora
  double fd_derivative = 0.0;  // second-order forward difference of the delta at 0, step 1e-6
};

/// improves iff V(f) > V_ora + 1e-12, degrades iff V(f) < V_ora - 1e-12.
BenefitReport marginal_benefit(const FiniteDistribution& dist, const Scorer& scorer);
Benefit marginal_benefit_sign(const FiniteDistribution& dist, const Scorer& scorer);

/// Principal branch W0 by Halley iteration. Initial guess: the branch-point
/// series for t < -0.25, log1p(t) up to t = 3, and log t - log log t above.
/// Throws std::domain_error for t < -1/e (1e-15 grace maps to -1).
double lambert_w(double t);

/// Largest mu with R_ce(f^mu) <= R_ce(f) guaranteed by the lower bound:
/// W0(-eta e^-eta) + eta. +inf when V_ora = 0, 0 when eta = 1. Throws
/// PreconditionError when violation < noise.
double select_mu(double violation, double noise);

/// (V_ce(f_post) - mu V_ora) / V_ce(f_post^mu) - 1; +inf when the
/// denominator vanishes and 0 for mu = 0. Throws PreconditionError carrying
/// the delta when mu > 0 and the delta is not positive.
double combo_rho_threshold(const FiniteDistribution& dist, const Scorer& f_post, Mu mu);

struct FutilityThreshold {
  double rho = 0.0;            // 1 / (V_ora - V(f_inf)), +inf at equality
  std::size_t f_inf_index = 0;
  double min_violation = 0.0;  // V(f_inf)
  double noise_rate = 0.0;
};

/// f_inf found by enumerating the grid. Throws PreconditionError when
/// V_ora < V(f_inf).
FutilityThreshold post_training_futility_rho(const FiniteDistribution& dist, const std::vector<Scorer>& grid);

struct FutilityCheck {
  double max_delta = 0.0;        // max over the grid and mu = inf of R_ce(f) - R_ce(f^mu)
  double derivative_at_zero = 0.0;  // V(f) - V_ora
  bool holds = true;             // max_delta <= 1e-10 and derivative <= 0
};

FutilityCheck futility_check(const FiniteDistribution& dist, const Scorer& scorer, const std::vector<double>& mu_grid);

double margin_delta(const FiniteDistribution& dist, const Scorer& scorer, Mu mu);
double l1_delta(const FiniteDistribution& dist, const Scorer& scorer, Mu mu);
double l1_lower_bound(const FiniteDistribution& dist, const Scorer& scorer, Mu mu);
/// E[(max_{y not in C} f - max_{y in C} f)_+]; 0 at points where C = Y.
double margin_positive_part(const FiniteDistribution& dist, const Scorer& scorer);
/// E[1[argmax f not in C]].
double zero_one_violation(const FiniteDistribution& dist, const Scorer& scorer);

/// dP_{f^mu}(y)/dmu = P_{f^mu}(y) (P_{f^mu}(not C) - v(y)) for finite mu.
void ccm_probability_derivative(std::span<const double> scores, LabelSet admissible, Mu mu, std::span<double> out);

/// 64 geometric points from 1e-3 to 40.
std::vector<double> default_mu_grid();

/// Columns: instance_set,mu,delta_ce,lower_bound_ce,delta_l1,lower_bound_l1,delta_margin,eta,lower_bound_holds.
void write_risk_delta_csv(std::ostream& out, const std::string& instance_set, const std::vector<RiskDelta>& rows,
                          bool header = true);

}  // namespace conlab
