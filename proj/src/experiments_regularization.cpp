#include <algorithm>
#include <cmath>
#include <limits>

#include "conlab/ccm_analysis.hpp"
#include "conlab/losses.hpp"
#include "conlab/synthgen.hpp"
#include "conlab/tabular.hpp"
#include "conlab/training.hpp"
#include "experiments_internal.hpp"

namespace conlab::experiments::detail {
namespace {

using report::Relation;
constexpr double kInf = std::numeric_limits<double>::infinity();

FiniteDistribution linear_instance(std::uint64_t seed, std::size_t labels, std::size_t points, std::size_t dim,
                                   double noise) {
  FiniteSpec spec;
  spec.labels = labels;
  spec.points = points;
  spec.noise = noise;
  spec.seed = seed;
  spec.feature_dim = dim;
  spec.bias = true;
  return make_finite(spec).dist;
}

Scorer zero_linear(const FiniteDistribution& dist) { return LinearScorer(dist.labels().count(), dist.feature_dim()); }

TrainConfig config_for(Objective objective, LossKind loss, std::size_t max_iters) {
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.loss = loss;
  cfg.max_iters = max_iters;
  cfg.grad_tol = 1e-10;
  return cfg;
}

}  // namespace

void regularization_deviation(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("bound");
  const double arith = p.tolerance("arithmetic");
  const double rho = p.real("rho");
  for (std::size_t k = 0; k < p.count("grids"); ++k) {
    FiniteSpec spec;
    spec.labels = p.count("labels");
    spec.points = p.count("points");
    spec.noise = p.real("noise");
    spec.seed = rng::derive_seed(p.seed(), k);
    const FiniteDistribution dist = make_finite(spec).dist;
    rng::Engine g(rng::derive_seed(p.seed(), 1000 + k));
    std::vector<Scorer> grid;
    for (std::size_t j = 0; j < p.count("grid_size"); ++j) grid.emplace_back(random_table(dist, g, p.real("score_scale")));
    const DeviationReport d = deviation_bound_check(dist, rho, grid, tol);
    r.check("risk_f0_le_risk_frho", subject("grid", k), d.risk_frho, Relation::greater_equal, d.risk_f0, tol);
    r.check("risk_frho_le_upper_bound", subject("grid", k), d.risk_frho, Relation::less_equal, d.upper_bound, tol);
    r.check("all_ties_hold", subject("grid", k), d.lower_holds && d.upper_holds ? 1.0 : 0.0, Relation::equal, 1.0, 0.0);
  }

  // Two-scorer construction: the gap to the upper bound is rho eps2 - eps1.
  Prop32Params pp;
  pp.a = p.real("a");
  pp.b = p.real("b");
  pp.eps2 = p.real("eps2");
  pp.rho = rho;
  report::Curve gap{"upper_bound - R(f_rho)", {}, {}};
  for (int k = 1; k <= 10; ++k) {
    pp.eps1 = rho * pp.eps2 * (1.0 - std::ldexp(1.0, -k));
    const ProofConstruction pc = make_prop32_tightness(pp);
    const DeviationReport d = deviation_bound_check(pc.dist, rho, pc.scorers, tol);
    const std::string subj = "eps1=" + tabular::format_real(pp.eps1);
    const double l0 = evaluate_regularized_objective(pc.scorers[0], pc.dist, rho, LossKind::ell1);
    const double li = evaluate_regularized_objective(pc.scorers[1], pc.dist, rho, LossKind::ell1);
    r.check("objective_prefers_f_inf", subj, li, Relation::less, l0, 0.0);
    r.check("risk_frho_minus_risk_f0_eq_eps1", subj, d.risk_frho - d.risk_f0, Relation::equal, pp.eps1, arith);
    r.check("gap_to_upper_bound", subj, d.upper_bound - d.risk_frho, Relation::equal, rho * pp.eps2 - pp.eps1, arith);
    gap.x.push_back(pp.eps1);
    gap.y.push_back(d.upper_bound - d.risk_frho);
  }
  r.plots.push_back({"tightness_gap", "upper deviation bound minus R(f_rho), two-scorer construction", "eps1",
                     "gap", false, {gap}});
}

void regularization_violation_bound(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("bound");
  const auto rhos = p.reals("rhos");
  for (std::size_t i = 0; i < p.count("instances"); ++i) {
    FiniteSpec spec;
    spec.labels = p.count("labels");
    spec.points = p.count("points");
    spec.noise = p.real("noise");
    spec.seed = rng::derive_seed(p.seed(), i);
    const FiniteDistribution dist = make_finite(spec).dist;
    const double t = std::log(static_cast<double>(spec.labels - 1) / p.real("baseline_u"));
    const ProofConstruction base = make_lemma33_baseline(dist, t);
    const Scorer& f_t = base.scorers[0];
    const double u = population_metrics(dist, f_t).violation_l1;
    const Scorer zero = ScoreTable(spec.labels, std::vector<double>(dist.size() * spec.labels, 0.0));

    report::Curve risk{"R(f_rho)", {}, {}}, viol{"V(f_rho)", {}, {}}, bound{"1/rho + u", {}, {}};
    for (double rho : rhos) {
      TrainConfig cfg = config_for(Objective::ervm_surrogate, LossKind::ell1, p.count("max_iters"));
      cfg.rho = rho;
      cfg.baseline_u = u;
      // Both starts; descent from f_t keeps the objective below L(f_t).
      Scorer best = train(cfg, dist, zero).scorer;
      const Scorer alt = train(cfg, dist, f_t).scorer;
      const double l_best = evaluate_regularized_objective(best, dist, rho, LossKind::ell1);
      const double l_alt = evaluate_regularized_objective(alt, dist, rho, LossKind::ell1);
      if (l_alt < l_best) best = alt;
      const PopulationMetrics m = population_metrics(dist, best);
      r.check("violation_le_inv_rho_plus_u", subject("instance", i, "rho", rho), m.violation_l1, Relation::less_equal,
              1.0 / rho + u, tol);
      if (i == 0) {
        risk.x.push_back(rho), risk.y.push_back(m.risk_l1);
        viol.x.push_back(rho), viol.y.push_back(m.violation_l1);
        bound.x.push_back(rho), bound.y.push_back(std::min(1.0, 1.0 / rho + u));
      }
    }
    if (i == 0) {
      r.plots.push_back({"risk_violation_vs_rho", "l1 risk and violation of the regularized minimizer (instance 0)",
                         "rho", "value", true, {risk, viol, bound}});
    }
  }
}

void on_training_ordering(const Params& p, report::ExperimentReport& r) {
  const double id_tol = p.tolerance("identity");
  const double order_tol = p.tolerance("order");
  const std::size_t iters = p.count("max_iters");
  for (std::size_t i = 0; i < p.count("instances"); ++i) {
    const FiniteDistribution dist =
        linear_instance(rng::derive_seed(p.seed(), i), p.count("labels"), p.count("points"), p.count("dim"), 0.0);
    const Scorer zero = zero_linear(dist);

    TrainConfig on_cfg = config_for(Objective::on_training_ccm, LossKind::cross_entropy, iters);
    on_cfg.mu = Mu::infinite();
    double worst = 0.0;
    const auto observe = [&](std::size_t, const Scorer& f, double objective) {
      const PopulationMetrics m = population_metrics(dist, f);
      worst = std::max(worst, std::abs(objective - (m.risk_ce - m.violation_ce)));
    };
    const Scorer f_on = train(on_cfg, dist, zero, observe).scorer;
    r.check("objective_eq_risk_minus_violation", subject("instance", i), worst, Relation::less_equal, 0.0, id_tol);

    const Scorer f_post = train(config_for(Objective::erm, LossKind::cross_entropy, iters), dist, zero).scorer;

    // min V_ce over several starts; any found value upper-bounds the infimum,
    // which only makes the right-hand side smaller.
    TrainConfig vcfg = config_for(Objective::violation, LossKind::cross_entropy, iters);
    std::vector<Scorer> starts = {zero, f_post, f_on};
    for (std::size_t k = 0; k < p.count("restarts"); ++k) {
      TrainConfig rcfg = vcfg;
      rcfg.init_scale = 1.0;
      rcfg.seed = rng::derive_seed(p.seed(), 100 * i + k);
      starts.push_back(train(rcfg, dist, zero).scorer);
    }
    double min_vce = kInf;
    for (const Scorer& s : starts) {
      min_vce = std::min(min_vce, population_metrics(dist, s).violation_ce);
      min_vce = std::min(min_vce, population_metrics(dist, train(vcfg, dist, s).scorer).violation_ce);
    }

    const double on_strict = population_metrics(dist, f_on, Mu::infinite()).risk_ce;
    const double post_strict = population_metrics(dist, f_post, Mu::infinite()).risk_ce;
    const double on_base = population_metrics(dist, f_on).risk_ce;
    r.check("on_strict_le_post_strict", subject("instance", i), on_strict, Relation::less_equal, post_strict,
            order_tol);
    r.check("post_strict_le_on_base_minus_min_vce", subject("instance", i), post_strict, Relation::less_equal,
            on_base - min_vce, order_tol);
  }
}

void combined_objective_gain(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("risk");
  const std::size_t wanted = p.count("instances");
  const std::size_t iters = p.count("max_iters");
  std::size_t found = 0, tried = 0;
  for (std::size_t a = 0; a < p.count("attempts") && found < wanted; ++a, ++tried) {
    const FiniteDistribution dist = linear_instance(rng::derive_seed(p.seed(), a), p.count("labels"),
                                                    p.count("points"), p.count("dim"), p.real("noise"));
    const Scorer f_post = train(config_for(Objective::erm, LossKind::cross_entropy, iters), dist, zero_linear(dist)).scorer;
    const double v = population_metrics(dist, f_post).violation_l1;
    const double noise = oracle_noise_rate(dist);
    if (!(v > noise)) continue;
    const Mu mu = Mu::from(p.real("mu_fraction") * select_mu(v, noise));
    if (!(risk_delta(dist, f_post, mu).delta_ce > 0.0)) continue;
    const double threshold = combo_rho_threshold(dist, f_post, mu);
    if (!(threshold > 0.0) || !std::isfinite(threshold)) continue;

    TrainConfig cfg = config_for(Objective::combined_ccm_regularized, LossKind::cross_entropy, iters);
    cfg.mu = mu;
    cfg.rho = p.real("rho_fraction") * threshold;
    const Scorer f_star = train(cfg, dist, f_post).scorer;
    const double post_risk = population_metrics(dist, f_post).risk_ce;
    const double star_risk = population_metrics(dist, f_star, mu).risk_ce;
    r.check("combined_risk_below_erm_risk", subject("attempt", a, "rho", cfg.rho), star_risk, Relation::less,
            post_risk, tol);
    ++found;
  }
  r.notes.push_back("qualifying instances " + std::to_string(found) + " of " + std::to_string(tried) + " tried");
  r.check("qualifying_instances", "attempts=" + std::to_string(tried), static_cast<double>(found),
          Relation::greater_equal, static_cast<double>(wanted), 0.0);
}

void post_training_futility(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("delta");
  const auto grid = geometric_grid(p.real("mu_min"), p.real("mu_max"), p.count("mu_points"));
  const auto vmins = p.reals("min_violations");
  report::Plot plot{"futility_delta_vs_mu", "cross-entropy risk change of f_rho vs mu", "mu", "risk change", true, {}};
  for (std::size_t s = 0; s < vmins.size(); ++s) {
    Thm52Params tp;
    tp.noise = p.real("noise");
    tp.min_violation = vmins[s];
    tp.points = p.count("points");
    const ProofConstruction pc = make_thm52_grid(tp);
    const FutilityThreshold ft = post_training_futility_rho(pc.dist, pc.scorers);
    for (double factor : p.reals("rho_factors")) {
      const double rho = factor * ft.rho;
      std::size_t best = 0;
      double best_obj = kInf;
      for (std::size_t k = 0; k < pc.scorers.size(); ++k) {
        const double obj = evaluate_regularized_objective(pc.scorers[k], pc.dist, rho, LossKind::ell1);
        if (obj < best_obj) best_obj = obj, best = k;
      }
      const Scorer& f_rho = pc.scorers[best];
      const FutilityCheck fc = futility_check(pc.dist, f_rho, grid);
      const std::string subj = "vmin=" + tabular::format_real(vmins[s]) + ";rho=" + tabular::format_real(rho);
      r.check("max_delta_ce_le_zero", subj, fc.max_delta, Relation::less_equal, 0.0, tol);
      r.check("derivative_at_zero_le_zero", subj, fc.derivative_at_zero, Relation::less_equal, 0.0, tol);
      if (s == 0) {
        report::Curve c{"rho=" + tabular::format_real(rho), {}, {}};
        for (double mu : grid) {
          c.x.push_back(mu);
          c.y.push_back(risk_delta(pc.dist, f_rho, Mu::from(mu)).delta_ce);
        }
        plot.curves.push_back(std::move(c));
      }
    }
  }
  r.plots.push_back(std::move(plot));
}

}  // namespace conlab::experiments::detail
