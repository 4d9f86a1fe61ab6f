#pragma once

// Monte-Carlo Rademacher complexity of scorer families,
//
//   R_m(F; S) = (1/m) E_eps sup_{f in F} sum_i sum_y eps_iy f(x_i, y),
//
// with antithetic draws: every draw averages the suprema for eps and -eps,
// so a singleton family contributes exactly 0. Draw d is seeded with
// derive_seed(seed, d) and draws may run in parallel.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "conlab/constraint.hpp"
#include "conlab/scoring.hpp"

namespace conlab {

struct EnumeratedFamily {
  std::vector<Scorer> scorers;
};

/// f(x, j) = w_j . x with sum_j |w_j|^2 <= budget, optionally restricted to
/// population violation E[P_w(not C)] <= cap over `population`.
struct LinearBallFamily {
  std::size_t labels = 2;
  std::size_t dim = 1;
  double budget = 1.0;
  std::optional<double> violation_cap{};
  const FiniteDistribution* population = nullptr;  // required with a cap
  std::size_t restarts = 10;
  std::size_t max_iters = 40;
};

using FamilyDescriptor = std::variant<EnumeratedFamily, LinearBallFamily>;

enum class SupSolver { automatic, enumeration, closed_form, projected_gradient };
std::string to_string(SupSolver s);

/// Optional CCM shift: the family becomes { f - mu v_C }.
struct CcmShift {
  const ConstraintMap* cmap = nullptr;
  Mu mu;
};

struct ComplexityEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(num_draws)
  std::size_t num_draws = 0;
  SupSolver sup_solver = SupSolver::automatic;
  std::vector<double> per_draw_values;
};

/// Throws std::invalid_argument for an unsupported (family, solver) pair,
/// an empty sample or a cap without a population.
ComplexityEstimate empirical_rademacher(const FamilyDescriptor& family, std::span<const InstanceView> sample,
                                        std::size_t num_draws, std::uint64_t seed,
                                        SupSolver solver = SupSolver::automatic,
                                        std::optional<CcmShift> shift = std::nullopt);

/// E_S of the above: every draw samples a fresh S of size m from `dist`.
ComplexityEstimate expected_rademacher(const FamilyDescriptor& family, const FiniteDistribution& dist, std::size_t m,
                                       std::size_t num_draws, std::uint64_t seed,
                                       SupSolver solver = SupSolver::automatic);

struct CcmIdentityReport {
  double max_abs_discrepancy = 0.0;  // max over eps of |sup F^mu - (sup F - mu sum eps v)|
  ComplexityEstimate base;
  ComplexityEstimate shifted;
  double mean_difference = 0.0;      // shifted.mean - base.mean
  double pooled_std_error = 0.0;     // sqrt(se_base^2 + se_shifted^2)
};

/// Sup over F^mu is computed by evaluating the CCM scores directly
/// (enumeration, or projected gradient for the linear ball); sup over F by
/// enumeration or closed form. Throws std::invalid_argument for infinite mu.
CcmIdentityReport ccm_complexity_identity_check(const FamilyDescriptor& family, const ConstraintMap& cmap, Mu mu,
                                                std::span<const InstanceView> sample, std::size_t num_draws,
                                                std::uint64_t seed);

struct Moments {
  std::vector<double> mean;  // alpha
  double sigma2 = 0.0;       // trace(Cov) / p
  double mean_sq_norm = 0.0; // |alpha|^2
  double max_norm = 0.0;     // max |x| over the support
};
Moments feature_moments(const FiniteDistribution& dist);

/// (1/2)(sqrt(c/m) + sqrt((c - sigma2 - |alpha|^2)/m)).
double capped_family_bound(std::size_t c, std::size_t m, double sigma2, double alpha_sq);

struct SubsetComplexityReport {
  double t = 0.0;
  std::size_t m = 0;
  double analytic_bound = 0.0;
  double unconstrained_bound = 0.0;  // sqrt(c/m)
  ComplexityEstimate primal;         // capped family, projected gradient
  ComplexityEstimate dual;           // per-draw weak-duality value
  ComplexityEstimate unconstrained;  // closed form on the same draws
  bool bound_holds = false;          // primal.mean <= analytic + 3 se
};

/// Expected complexity of F_t = { sum |w_j|^2 <= 1, E[P_w(not C)] <= t } over
/// `dist`, whose constraint removes one label. Throws PreconditionError for
/// t >= 1/(c+2), FeasibilityError when no weight meets the cap.
SubsetComplexityReport constrained_subset_complexity_bound(const FiniteDistribution& dist, double t, std::size_t m,
                                                           std::size_t num_draws, std::uint64_t seed);

struct GapTerms {
  double log_term_labeled = 0.0;    // sqrt(log(1/delta)/(2 m_L))
  double log_term_unlabeled = 0.0;  // sqrt(log(1/delta)/(2 m_U))
  double risk_gap = 0.0;            // R_{m_L}(F) + log_term_labeled
  double violation_constant = 1.0;  // (sqrt2/2) sqrt(1/(c-c0) + 1/c0) when |C| = c0
  double violation_gap = 0.0;       // constant * R_{m_U}(F) + log_term_unlabeled
  double b_unlabeled = 0.0;         // B(delta, m_U, F) = R_{m_U}(F) + 2 log_term_unlabeled
};

/// Throws std::invalid_argument unless 0 < delta <= 1 and 0 < c0 < c.
GapTerms generalization_gap_terms(std::size_t m_labeled, std::size_t m_unlabeled, double delta,
                                  double complexity_labeled, double complexity_unlabeled,
                                  std::optional<std::pair<std::size_t, std::size_t>> c_and_c0 = std::nullopt);

double improved_violation_constant(std::size_t c, std::size_t c0);

/// Columns: draw,value.
void write_draws_csv(std::ostream& out, const ComplexityEstimate& est);
/// `key value` lines: mean std_error num_draws sup_solver.
void write_summary(std::ostream& out, const ComplexityEstimate& est);

}  // namespace conlab
