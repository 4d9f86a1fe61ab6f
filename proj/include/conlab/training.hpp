#pragma once

// Full-batch gradient descent with Armijo backtracking for the learning
// objectives built from risk and violation terms:
//
//   erm                       R(f)
//   ervm_surrogate            R(f) + rho V(f)
//   on_training_ccm           R(f^mu)           (mu = inf: strict inference)
//   combined_ccm_regularized  R(f^mu) + rho V(f^mu)
//   violation                 V(f)
//
// R and V are cross-entropy terms by default, or l1 terms with
// `loss = ell1`. A ScoreTable is trained entry-wise, which is the same as a
// linear model over one-hot instance features.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "conlab/constraint.hpp"
#include "conlab/losses.hpp"
#include "conlab/scoring.hpp"

namespace conlab {

enum class Objective { erm, ervm_surrogate, on_training_ccm, combined_ccm_regularized, violation };

std::string to_string(Objective objective);
Objective parse_objective(const std::string& name);

struct TrainConfig {
  double rho = 0.0;
  Mu mu = Mu::infinite();
  double learning_rate = 1.0;
  std::size_t max_iters = 5000;
  double grad_tol = 1e-8;
  std::uint64_t seed = 0;
  Objective objective = Objective::erm;
  LossKind loss = LossKind::cross_entropy;
  /// Known upper bound u on the smallest achievable violation; recorded only.
  double baseline_u = 0.0;
  /// Standard deviation of a seeded Gaussian initialization; 0 keeps `init`.
  double init_scale = 0.0;

  /// Throws std::invalid_argument for rho < 0, lr <= 0, tol <= 0,
  /// max_iters == 0, or a hinge loss.
  void validate() const;
};

struct TracePoint {
  std::size_t iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct TrainResult {
  Scorer scorer;
  std::vector<TracePoint> trace;
  bool converged = false;
  double final_grad_norm = 0.0;
};

/// The objective became NaN or infinite; the trace up to that point is kept.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, std::vector<TracePoint> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<TracePoint>& trace() const noexcept { return trace_; }

 private:
  std::vector<TracePoint> trace_;
};

/// Called with every accepted iterate, including the initial one.
using IterateObserver = std::function<void(std::size_t iteration, const Scorer& scorer, double objective)>;

/// Minimizes the exact population objective over `dist`.
TrainResult train(const TrainConfig& cfg, const FiniteDistribution& dist, const Scorer& init,
                  const IterateObserver& observer = {});

/// Minimizes the empirical objective: risk terms average over S_L, violation
/// terms over S_U. Throws std::invalid_argument when a required split is empty.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const ConstraintMap& cmap, const Scorer& init,
                  const IterateObserver& observer = {});

/// Population value of the objective `cfg` minimizes.
double training_objective(const TrainConfig& cfg, const FiniteDistribution& dist, const Scorer& scorer);

/// R + rho V of the scorer (or of its CCM with `mu`).
double evaluate_regularized_objective(const Scorer& scorer, const FiniteDistribution& dist, double rho,
                                      LossKind kind, Mu mu = {});

/// f_t(x, y) = t 1[y in C(x)] as a score table over the support.
ScoreTable baseline_scorer(const FiniteDistribution& dist, double t);

/// Exact minimizers over an enumerated grid for the l1 objective R + rho V.
struct DeviationReport {
  std::vector<std::size_t> argmin_risk;       // f_0 ties
  std::vector<std::size_t> argmin_objective;  // f_rho ties
  std::vector<std::size_t> argmin_violation;  // f_inf ties
  double risk_f0 = 0.0, risk_frho = 0.0, risk_finf = 0.0;
  double violation_f0 = 0.0, violation_frho = 0.0, violation_finf = 0.0;
  /// The largest right-hand side R(f_0) + rho (V(f_0) - V(f_inf)) over ties.
  double upper_bound = 0.0;
  bool lower_holds = true;
  bool upper_holds = true;
};

/// Checks R(f_0) <= R(f_rho) <= R(f_0) + rho (V(f_0) - V(f_inf)) for every
/// combination of minimizers tied within 1e-10. Throws std::invalid_argument
/// for an empty grid.
DeviationReport deviation_bound_check(const FiniteDistribution& dist, double rho, const std::vector<Scorer>& grid,
                                      double slack = 1e-10);

/// CSV columns: iteration,objective,grad_norm,step.
void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);

}  // namespace conlab
