#include <algorithm>
#include <cmath>
#include <limits>

#include "conlab/complexity.hpp"
#include "conlab/errors.hpp"
#include "conlab/losses.hpp"
#include "conlab/synthgen.hpp"
#include "conlab/tabular.hpp"
#include "experiments_internal.hpp"

namespace conlab::experiments::detail {
namespace {

using report::Relation;

std::vector<InstanceView> draw_sample(const FiniteDistribution& dist, std::size_t m, std::uint64_t seed) {
  std::vector<InstanceView> out;
  for (std::size_t id : sample_ids(dist, m, seed)) out.push_back(dist.instance(id));
  return out;
}

}  // namespace

void ccm_complexity_shift(const Params& p, report::ExperimentReport& r) {
  const double id_tol = p.tolerance("identity");
  const double z = p.tolerance("z");
  FiniteSpec spec;
  spec.labels = p.count("labels");
  spec.points = p.count("points");
  spec.noise = 0.2;
  spec.seed = rng::derive_seed(p.seed(), 0);
  spec.feature_dim = p.count("dim");
  const FiniteDistribution dist = make_finite(spec).dist;

  rng::Engine g(rng::derive_seed(p.seed(), 1));
  EnumeratedFamily family;
  for (std::size_t k = 0; k < p.count("family_size"); ++k) family.scorers.emplace_back(random_table(dist, g, 1.0));
  const LinearBallFamily ball{spec.labels, dist.feature_dim(), 1.0, std::nullopt, nullptr};

  const auto sample = draw_sample(dist, p.count("m"), rng::derive_seed(p.seed(), 2));
  for (double mu : p.reals("mus")) {
    const CcmIdentityReport e =
        ccm_complexity_identity_check(family, dist.constraint(), Mu::from(mu), sample, p.count("draws"),
                                      rng::derive_seed(p.seed(), 3));
    const std::string se = "family=enumerated;mu=" + tabular::format_real(mu);
    r.check("per_draw_shift_identity", se, e.max_abs_discrepancy, Relation::less_equal, 0.0, id_tol);
    r.check("mean_difference_within_z_se", se, std::abs(e.mean_difference), Relation::less_equal,
            z * e.pooled_std_error, 0.0);

    const CcmIdentityReport l =
        ccm_complexity_identity_check(ball, dist.constraint(), Mu::from(mu), sample, p.count("linear_draws"),
                                      rng::derive_seed(p.seed(), 4));
    const std::string sl = "family=linear_ball;mu=" + tabular::format_real(mu);
    r.check("per_draw_shift_identity", sl, l.max_abs_discrepancy, Relation::less_equal, 0.0, id_tol);
    r.check("mean_difference_within_z_se", sl, std::abs(l.mean_difference), Relation::less_equal,
            z * l.pooled_std_error, 0.0);
  }
}

void generalization_gap(const Params& p, report::ExperimentReport& r) {
  const double slack = p.tolerance("fraction");
  FiniteSpec spec;
  spec.labels = p.count("labels");
  spec.points = p.count("points");
  spec.noise = p.real("noise");
  spec.seed = rng::derive_seed(p.seed(), 0);
  const FiniteDistribution dist = make_finite(spec).dist;
  rng::Engine g(rng::derive_seed(p.seed(), 1));
  EnumeratedFamily family;
  for (std::size_t k = 0; k < p.count("family_size"); ++k) {
    family.scorers.emplace_back(random_table(dist, g, p.real("score_scale")));
  }

  const std::size_t ml = p.count("m_labeled"), mu = p.count("m_unlabeled");
  const double delta = p.real("delta");
  const double rl = expected_rademacher(family, dist, ml, p.count("draws"), rng::derive_seed(p.seed(), 2)).mean;
  const double ru = expected_rademacher(family, dist, mu, p.count("draws"), rng::derive_seed(p.seed(), 3)).mean;
  const GapTerms terms = generalization_gap_terms(ml, mu, delta, rl, ru);

  std::vector<double> risk, viol;
  for (const Scorer& f : family.scorers) {
    const PopulationMetrics m = population_metrics(dist, f);
    risk.push_back(m.risk_l1);
    viol.push_back(m.violation_l1);
  }
  const std::size_t n = p.count("resamples");
  std::size_t risk_exceed = 0, viol_exceed = 0;
  report::Curve risk_gaps{"risk gap", {}, {}}, viol_gaps{"violation gap", {}, {}};
  for (std::size_t s = 0; s < n; ++s) {
    const Dataset data = sample_dataset(dist, ml, mu, rng::derive_seed(p.seed(), 100 + s));
    double gr = -1.0, gv = -1.0;
    for (std::size_t k = 0; k < family.scorers.size(); ++k) {
      const Scorer& f = family.scorers[k];
      gr = std::max(gr, risk[k] - empirical_risk(data, f, LossKind::ell1).risk);
      gv = std::max(gv, viol[k] - empirical_violation(data, f, dist.constraint(), LossKind::ell1));
    }
    risk_exceed += gr > terms.risk_gap;
    viol_exceed += gv > terms.violation_gap;
    risk_gaps.x.push_back(static_cast<double>(s)), risk_gaps.y.push_back(gr);
    viol_gaps.x.push_back(static_cast<double>(s)), viol_gaps.y.push_back(gv);
  }
  const double nn = static_cast<double>(n);
  r.check("risk_gap_exceedance_fraction", subject("resamples", n), risk_exceed / nn, Relation::less, delta, slack);
  r.check("violation_gap_exceedance_fraction", subject("resamples", n), viol_exceed / nn, Relation::less, delta,
          slack);
  r.notes.push_back("risk bound " + tabular::format_real(terms.risk_gap) + ", violation bound " +
                    tabular::format_real(terms.violation_gap));
  report::Curve rb{"risk bound", {0.0, nn - 1}, {terms.risk_gap, terms.risk_gap}};
  report::Curve vb{"violation bound", {0.0, nn - 1}, {terms.violation_gap, terms.violation_gap}};
  r.plots.push_back({"uniform_gaps", "uniform deviation per resample against the bounds", "resample", "gap", false,
                     {risk_gaps, viol_gaps, rb, vb}});

  // The improved constant is symmetric in c0 <-> c - c0 and never exceeds 1.
  for (std::size_t c0 = 1; c0 < spec.labels; ++c0) {
    const double k = improved_violation_constant(spec.labels, c0);
    r.check("improved_constant_symmetric", subject("c0", c0), k, Relation::equal,
            improved_violation_constant(spec.labels, spec.labels - c0), 1e-15);
    r.check("improved_constant_le_one", subject("c0", c0), k, Relation::less_equal, 1.0, 1e-15);
  }
}

void capped_linear_complexity(const Params& p, report::ExperimentReport& r) {
  const double z = p.tolerance("z");
  GaussianSpec spec;
  spec.labels = p.count("labels");
  spec.dim = p.count("dim");
  spec.mean = p.reals("mean");
  if (spec.mean.size() != spec.dim) throw PreconditionError("mean must have dim entries", static_cast<double>(spec.mean.size()));
  spec.sigma2 = p.real("sigma2");
  spec.m = p.count("population");
  spec.seed = rng::derive_seed(p.seed(), 0);
  const GaussianFeatures gf = make_gaussian_features(spec);
  const std::size_t m = p.count("m");
  const SubsetComplexityReport rep =
      constrained_subset_complexity_bound(gf.dist, p.real("t"), m, p.count("draws"), rng::derive_seed(p.seed(), 1));

  const std::string subj = "t=" + tabular::format_real(rep.t) + ";m=" + std::to_string(m);
  r.check("capped_complexity_le_bound", subj, rep.primal.mean, Relation::less_equal,
          rep.analytic_bound + z * rep.primal.std_error, 0.0);
  r.check("dual_complexity_le_bound", subj, rep.dual.mean, Relation::less_equal,
          rep.analytic_bound + z * rep.dual.std_error, 0.0);
  r.check("bound_below_unconstrained", subj, rep.analytic_bound, Relation::less, rep.unconstrained_bound, 0.0);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < rep.primal.per_draw_values.size(); ++d) {
    worst = std::min(worst, rep.dual.per_draw_values[d] - rep.primal.per_draw_values[d]);
  }
  r.check("dual_ge_primal_per_draw", subj, worst, Relation::greater_equal, 0.0, 1e-9);
  r.notes.push_back("primal " + tabular::format_real(rep.primal.mean) + " +- " +
                    tabular::format_real(rep.primal.std_error) + ", dual " + tabular::format_real(rep.dual.mean) +
                    ", unconstrained " + tabular::format_real(rep.unconstrained.mean));

  const Moments mo = feature_moments(gf.dist);
  report::Curve bound{"capped bound", {}, {}}, flat{"sqrt(c/m)", {}, {}};
  for (int k = 0; k <= 50; ++k) {
    const double s2 = 0.02 * k * (1.0 - mo.mean_sq_norm);
    bound.x.push_back(s2), bound.y.push_back(capped_family_bound(spec.labels, m, s2, mo.mean_sq_norm));
    flat.x.push_back(s2), flat.y.push_back(rep.unconstrained_bound);
  }
  r.plots.push_back({"capped_bound_vs_sigma2", "closed-form complexity bound vs feature variance", "sigma^2",
                     "complexity bound", false, {bound, flat}});
}

}  // namespace conlab::experiments::detail
