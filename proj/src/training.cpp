#include "conlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "conlab/errors.hpp"
#include "conlab/kernels.hpp"
#include "conlab/rng.hpp"
#include "conlab/tabular.hpp"

namespace conlab {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxHalvings = 80;
constexpr double kStepCapFactor = 1e3;

struct Term {
  InstanceView x;
  double weight;
  std::size_t gold;  // unused for violation terms
  LabelSet admissible;
};

struct Problem {
  std::vector<Term> risk;
  std::vector<Term> violation;
};

struct Coefficients {
  double risk;
  double violation;
  Mu mu;
};

Coefficients coefficients(const TrainConfig& cfg) {
  switch (cfg.objective) {
    case Objective::erm: return {1.0, 0.0, Mu{}};
    case Objective::ervm_surrogate: return {1.0, cfg.rho, Mu{}};
    case Objective::on_training_ccm: return {1.0, 0.0, cfg.mu};
    case Objective::combined_ccm_regularized: return {1.0, cfg.rho, cfg.mu};
    case Objective::violation: return {0.0, 1.0, Mu{}};
  }
  return {1.0, 0.0, Mu{}};
}

std::span<double> params(Scorer& s) {
  if (auto* lin = s.linear()) return lin->weights();
  return s.table()->values();
}

std::span<const double> params(const Scorer& s) {
  if (const auto* lin = s.linear()) return lin->weights();
  return s.table()->values();
}

void project(Scorer& s) {
  if (auto* lin = s.linear()) lin->project();
}

/// Adds weight * score_grad to the parameter gradient of instance x.
void scatter(const Scorer& s, InstanceView x, std::span<const double> score_grad, double weight,
             std::span<double> grad) {
  if (s.linear()) {
    accumulate_linear_gradient(score_grad, x.features, weight, grad);
    return;
  }
  const std::size_t c = score_grad.size();
  double* row = grad.data() + x.id * c;
  for (std::size_t j = 0; j < c; ++j) row[j] += weight * score_grad[j];
}

/// Objective value; the gradient is written when `grad` is nonempty.
double evaluate(const TrainConfig& cfg, const Problem& prob, const Scorer& s, std::span<double> grad) {
  const Coefficients k = coefficients(cfg);
  const std::size_t c = s.labels();
  const bool want_grad = !grad.empty();
  const bool use_risk = k.risk != 0.0;
  const bool use_viol = k.violation != 0.0;
  const std::size_t nr = use_risk ? prob.risk.size() : 0;
  const std::size_t nv = use_viol ? prob.violation.size() : 0;
  const std::size_t n = nr + nv;

  std::vector<double> values(n);
  std::vector<double> score_grads(want_grad ? n * c : 0);
  kernels::map_parallel(n, [&](std::size_t i) {
    const bool is_risk = i < nr;
    const Term& t = is_risk ? prob.risk[i] : prob.violation[i - nr];
    const auto scores = s.scores(t.x);
    std::span<double> g;
    if (want_grad) g = std::span(score_grads).subspan(i * c, c);
    if (is_risk) {
      const PointMetrics m = point_metrics(scores, t.admissible, k.mu, t.gold);
      const bool l1 = cfg.loss == LossKind::ell1;
      values[i] = k.risk * t.weight * (l1 ? m.loss_l1 : m.loss_ce);
      if (want_grad) {
        if (l1) l1_score_gradient(scores, t.admissible, k.mu, t.gold, g);
        else ce_score_gradient(scores, t.admissible, k.mu, t.gold, g);
      }
    } else {
      const PointViolation v = point_violation(scores, t.admissible, k.mu);
      const bool l1 = cfg.loss == LossKind::ell1;
      values[i] = k.violation * t.weight * (l1 ? v.l1 : v.ce);
      if (want_grad) {
        if (l1) violation_l1_score_gradient(scores, t.admissible, k.mu, g);
        else violation_ce_score_gradient(scores, t.admissible, k.mu, g);
      }
    }
  });

  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const bool is_risk = i < nr;
      const Term& t = is_risk ? prob.risk[i] : prob.violation[i - nr];
      const double coef = (is_risk ? k.risk : k.violation) * t.weight;
      scatter(s, t.x, std::span<const double>(score_grads).subspan(i * c, c), coef, grad);
    }
  }
  return kernels::pairwise_sum(values);
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Norm of the projected-gradient mapping x - P(x - g); ||g|| without a budget.
double stationarity(const Scorer& s, std::span<const double> grad) {
  const LinearScorer* lin = s.linear();
  if (!lin || !lin->norm_budget()) return norm2(grad);
  Scorer probe = s;
  auto w = params(probe);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= grad[i];
  project(probe);
  auto x = params(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += (x[i] - w[i]) * (x[i] - w[i]);
  return std::sqrt(acc);
}

Scorer initial_point(const TrainConfig& cfg, const Scorer& init) {
  Scorer s = init;
  if (cfg.init_scale > 0.0) {
    rng::Engine g(cfg.seed);
    for (double& w : params(s)) w = cfg.init_scale * rng::normal(g);
  }
  project(s);
  return s;
}

TrainResult run(const TrainConfig& cfg, const Problem& prob, const Scorer& init, const IterateObserver& observer) {
  cfg.validate();
  TrainResult result{initial_point(cfg, init), {}, false, 0.0};
  Scorer& x = result.scorer;
  const std::size_t dim = params(x).size();
  std::vector<double> grad(dim), cand_grad(dim);

  double f = 0.0;
  try {
    f = evaluate(cfg, prob, x, grad);
  } catch (const InvalidScore& e) {
    throw OptimizationError(std::string("initial point: ") + e.what(), {});
  }
  if (!std::isfinite(f)) throw OptimizationError("objective is not finite at the initial point", {});
  double gn = stationarity(x, grad);
  result.trace.push_back({0, f, gn, 0.0});
  if (observer) observer(0, x, f);

  double last_step = cfg.learning_rate;
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    if (gn < cfg.grad_tol) {
      result.converged = true;
      break;
    }
    double alpha = it == 1 ? cfg.learning_rate : std::min(2.0 * last_step, kStepCapFactor * cfg.learning_rate);
    bool accepted = false;
    Scorer cand = x;
    double fc = 0.0;
    for (int h = 0; h < kMaxHalvings; ++h, alpha *= kShrink) {
      auto xc = params(cand);
      auto x0 = params(x);
      for (std::size_t i = 0; i < dim; ++i) xc[i] = x0[i] - alpha * grad[i];
      project(cand);
      double decrease = 0.0;  // g . (x_cand - x), nonpositive
      for (std::size_t i = 0; i < dim; ++i) decrease += grad[i] * (xc[i] - x0[i]);
      if (decrease >= 0.0) break;
      try {
        fc = evaluate(cfg, prob, cand, cand_grad);
      } catch (const InvalidScore&) {
        continue;
      }
      if (std::isnan(fc)) throw OptimizationError("objective became NaN", result.trace);
      if (fc <= f + kArmijo * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    last_step = alpha;
    x = std::move(cand);
    f = fc;
    grad.swap(cand_grad);
    gn = stationarity(x, grad);
    result.trace.push_back({it, f, gn, alpha});
    if (observer) observer(it, x, f);
  }
  if (gn < cfg.grad_tol) result.converged = true;
  result.final_grad_norm = gn;
  return result;
}

Problem population_problem(const FiniteDistribution& dist) {
  Problem p;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const Term t{dist.instance(i), dist.point(i).weight, dist.point(i).oracle, dist.admissible(i)};
    p.risk.push_back(t);
    p.violation.push_back(t);
  }
  return p;
}

}  // namespace

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::erm: return "erm";
    case Objective::ervm_surrogate: return "ervm_surrogate";
    case Objective::on_training_ccm: return "on_training_ccm";
    case Objective::combined_ccm_regularized: return "combined_ccm_regularized";
    case Objective::violation: return "violation";
  }
  return "?";
}

Objective parse_objective(const std::string& name) {
  for (Objective o : {Objective::erm, Objective::ervm_surrogate, Objective::on_training_ccm,
                      Objective::combined_ccm_regularized, Objective::violation}) {
    if (to_string(o) == name) return o;
  }
  throw std::invalid_argument("unknown objective '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (max_iters == 0) throw std::invalid_argument("max_iters must be positive");
  if (!(baseline_u >= 0.0)) throw std::invalid_argument("baseline_u must be nonnegative");
  if (loss == LossKind::hinge_margin) throw std::invalid_argument("training supports ell1 and cross_entropy");
}

TrainResult train(const TrainConfig& cfg, const FiniteDistribution& dist, const Scorer& init,
                  const IterateObserver& observer) {
  return run(cfg, population_problem(dist), init, observer);
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const ConstraintMap& cmap, const Scorer& init,
                  const IterateObserver& observer) {
  const Coefficients k = coefficients(cfg);
  if (k.risk != 0.0 && data.labeled.empty()) throw std::invalid_argument("objective needs labeled samples");
  if (k.violation != 0.0 && data.unlabeled.empty()) throw std::invalid_argument("objective needs unlabeled samples");
  Problem p;
  const double wl = data.labeled.empty() ? 0.0 : 1.0 / static_cast<double>(data.labeled.size());
  const double wu = data.unlabeled.empty() ? 0.0 : 1.0 / static_cast<double>(data.unlabeled.size());
  for (const auto& s : data.labeled) {
    p.risk.push_back({s.instance.view(), wl, s.label, cmap.admissible(s.instance.id)});
  }
  for (const auto& x : data.unlabeled) p.violation.push_back({x.view(), wu, 0, cmap.admissible(x.id)});
  return run(cfg, p, init, observer);
}

double training_objective(const TrainConfig& cfg, const FiniteDistribution& dist, const Scorer& scorer) {
  return evaluate(cfg, population_problem(dist), scorer, {});
}

double evaluate_regularized_objective(const Scorer& scorer, const FiniteDistribution& dist, double rho,
                                      LossKind kind, Mu mu) {
  const PopulationMetrics m = population_metrics(dist, scorer, mu);
  switch (kind) {
    case LossKind::ell1: return m.risk_l1 + rho * m.violation_l1;
    case LossKind::cross_entropy: return m.risk_ce + rho * m.violation_ce;
    case LossKind::hinge_margin: break;
  }
  throw std::invalid_argument("regularized objective is defined for ell1 and cross_entropy");
}

ScoreTable baseline_scorer(const FiniteDistribution& dist, double t) {
  const std::size_t c = dist.labels().count();
  std::vector<double> s(dist.size() * c, 0.0);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (dist.admissible(i).contains(j)) s[i * c + j] = t;
    }
  }
  return ScoreTable(c, std::move(s));
}

DeviationReport deviation_bound_check(const FiniteDistribution& dist, double rho, const std::vector<Scorer>& grid,
                                      double slack) {
  if (grid.empty()) throw std::invalid_argument("deviation check needs a nonempty grid");
  constexpr double kTie = 1e-10;
  std::vector<double> risk(grid.size()), viol(grid.size()), obj(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const PopulationMetrics m = population_metrics(dist, grid[k]);
    risk[k] = m.risk_l1;
    viol[k] = m.violation_l1;
    obj[k] = risk[k] + rho * viol[k];
  }
  auto ties = [&](const std::vector<double>& v) {
    const double lo = *std::min_element(v.begin(), v.end());
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] <= lo + kTie) idx.push_back(k);
    }
    return idx;
  };
  DeviationReport r;
  r.argmin_risk = ties(risk);
  r.argmin_objective = ties(obj);
  r.argmin_violation = ties(viol);
  r.risk_f0 = risk[r.argmin_risk.front()];
  r.risk_frho = risk[r.argmin_objective.front()];
  r.risk_finf = risk[r.argmin_violation.front()];
  r.violation_f0 = viol[r.argmin_risk.front()];
  r.violation_frho = viol[r.argmin_objective.front()];
  r.violation_finf = viol[r.argmin_violation.front()];

  // Tied minimizers are within kTie of the minimum; that width joins the slack.
  const double tol = slack + kTie * (1.0 + rho);
  const double min_risk = r.risk_f0;
  const double min_viol = *std::min_element(viol.begin(), viol.end());
  r.upper_bound = -std::numeric_limits<double>::infinity();
  for (std::size_t f0 : r.argmin_risk) {
    r.upper_bound = std::max(r.upper_bound, risk[f0] + rho * (viol[f0] - min_viol));
  }
  for (std::size_t fr : r.argmin_objective) {
    if (risk[fr] < min_risk - tol) r.lower_holds = false;
    for (std::size_t f0 : r.argmin_risk) {
      for (std::size_t fi : r.argmin_violation) {
        if (risk[fr] > risk[f0] + rho * (viol[f0] - viol[fi]) + tol) r.upper_holds = false;
      }
    }
  }
  return r;
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
  out << "iteration,objective,grad_norm,step\n";
  for (const auto& t : trace) {
    out << t.iteration << ',' << tabular::format_real(t.objective) << ',' << tabular::format_real(t.grad_norm)
        << ',' << tabular::format_real(t.step) << '\n';
  }
}

}  // namespace conlab
