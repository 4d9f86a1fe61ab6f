#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "conlab/ccm_analysis.hpp"
#include "conlab/losses.hpp"
#include "conlab/synthgen.hpp"
#include "conlab/tabular.hpp"
#include "experiments_internal.hpp"

namespace conlab::experiments::detail {
namespace {

using report::Relation;
constexpr double kInf = std::numeric_limits<double>::infinity();

FiniteDistribution instance_or_override(const Params& p, std::size_t i, double noise) {
  if (p.distribution) return *p.distribution;
  return random_instance(rng::derive_seed(p.seed(), i), p.count("max_labels"), p.count("max_points"), noise);
}

/// Root of (1 - e^-mu) eta - mu on (0, eta] by bisection.
double bisect_mu(double eta) {
  double lo = 0.0, hi = eta;
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double g = -std::expm1(-mid) * eta - mid;
    (g > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void noise_free_ccm_identity(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("identity");
  const std::size_t n = p.distribution ? 1 : p.count("instances");
  for (std::size_t i = 0; i < n; ++i) {
    const FiniteDistribution dist = instance_or_override(p, i, 0.0);
    r.check("noise_rate_is_zero", subject("instance", i), oracle_noise_rate(dist), Relation::equal, 0.0, 0.0);
    rng::Engine g(rng::derive_seed(p.seed(), 1000 + i));
    for (std::size_t k = 0; k < p.count("scorers"); ++k) {
      const Scorer f = random_table(dist, g, p.real("score_scale"));
      const RiskDelta d = risk_delta(dist, f, Mu::infinite());
      const double vce = population_metrics(dist, f).violation_ce;
      r.check("delta_inf_ce_eq_violation_ce", subject("instance", i, "scorer", static_cast<double>(k)), d.delta_ce,
              Relation::equal, vce, tol);
    }
  }
}

void ccm_risk_lower_bound(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("bound");
  const auto grid = geometric_grid(p.real("mu_min"), p.real("mu_max"), p.count("mu_points"));
  const std::size_t n = p.distribution ? 1 : p.count("instances");
  for (std::size_t i = 0; i < n; ++i) {
    const FiniteDistribution dist = instance_or_override(p, i, -1.0);
    rng::Engine g(rng::derive_seed(p.seed(), 1000 + i));
    const Scorer f = random_table(dist, g, p.real("score_scale"));
    report::Curve delta{"delta_ce", {}, {}}, bound{"lower_bound", {}, {}};
    for (double mu : grid) {
      const RiskDelta d = risk_delta(dist, f, Mu::from(mu));
      r.check("delta_ce_ge_lower_bound", subject("instance", i, "mu", mu), d.delta_ce, Relation::greater_equal,
              d.lower_bound_ce, tol);
      if (i == 0) {
        delta.x.push_back(mu), delta.y.push_back(d.delta_ce);
        bound.x.push_back(mu), bound.y.push_back(d.lower_bound_ce);
      }
    }
    if (i == 0) {
      r.plots.push_back({"delta_ce_vs_mu", "cross-entropy risk change vs mu (instance 0)", "mu", "risk change", true,
                         {delta, bound}});
    }
  }
}

void ccm_marginal_benefit(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("derivative");
  const double offset = p.real("offset");
  const auto rates = p.reals("noise_rates");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    FiniteSpec spec;
    spec.labels = p.count("labels");
    spec.points = p.count("points");
    spec.noise = rates[i];
    spec.seed = rng::derive_seed(p.seed(), i);
    const GeneratedDistribution gen = make_finite(spec);
    const double noise = gen.noise_rate;
    rng::Engine g(rng::derive_seed(p.seed(), 1000 + i));
    const struct {
      const char* name;
      double v;
      Benefit expect;
    } cases[] = {{"above", noise + offset, Benefit::improves},
                 {"equal", noise, Benefit::neutral},
                 {"below", noise - offset, Benefit::degrades}};
    for (const auto& c : cases) {
      if (!(c.v > 0.0 && c.v < 1.0)) {
        r.notes.push_back("skipped " + std::string(c.name) + " case at noise " + std::to_string(noise));
        continue;
      }
      const Scorer f = table_with_violation(gen.dist, g, std::vector<double>(gen.dist.size(), c.v));
      const BenefitReport b = marginal_benefit(gen.dist, f);
      const std::string subj = subject("set", i) + ";case=" + c.name;
      r.check("sign_" + to_string(c.expect), subj, b.sign == c.expect ? 1.0 : 0.0, Relation::equal, 1.0, 0.0);
      const double v = population_metrics(gen.dist, f).violation_l1;
      r.check("fd_derivative_eq_v_minus_vora", subj, b.fd_derivative, Relation::equal, v - noise, tol);
    }
  }
}

void mu_selection_curve(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("root");
  auto etas = p.reals("etas");
  std::sort(etas.begin(), etas.end());
  double prev = -kInf;
  for (std::size_t k = 0; k < etas.size(); ++k) {
    const double eta = etas[k];
    const double mu = select_mu(eta, 1.0);
    const std::string subj = "eta=" + tabular::format_real(eta);
    if (eta == 1.0) r.check("mu_vanishes_at_eta_one", subj, mu, Relation::equal, 0.0, 0.0);
    r.check("root_residual", subj, -std::expm1(-mu) * eta - mu, Relation::equal, 0.0, tol);
    if (k > 0) r.check("mu_increasing_in_eta", subj, prev, Relation::less, mu, 0.0);
    prev = mu;
  }
  report::Curve curve{"mu(eta)", {}, {}};
  const std::size_t n = p.count("plot_points");
  const double hi = p.real("plot_max_eta");
  for (std::size_t k = 0; k < n; ++k) {
    const double eta = 1.0 + (hi - 1.0) * static_cast<double>(k) / static_cast<double>(n - 1);
    curve.x.push_back(eta);
    curve.y.push_back(select_mu(eta, 1.0));
  }
  r.plots.push_back({"mu_vs_eta", "largest safe mu vs relative violation rate", "eta = V(f)/V_ora", "mu", false,
                     {curve}});
}

void mu_selection_safety(const Params& p, report::ExperimentReport& r) {
  const double risk_tol = p.tolerance("risk");
  const double root_tol = p.tolerance("root");
  const double eta_lo = p.real("eta_min"), eta_hi = p.real("eta_max");
  for (std::size_t i = 0; i < p.count("instances"); ++i) {
    rng::Engine g(rng::derive_seed(p.seed(), i));
    FiniteSpec spec;
    spec.labels = p.count("labels");
    spec.points = p.count("points");
    spec.noise = static_cast<double>(1 + rng::uniform_index(g, 2)) / static_cast<double>(spec.points);
    spec.seed = g();
    const GeneratedDistribution gen = make_finite(spec);
    const double eta_target = rng::uniform(g, eta_lo, eta_hi);
    // Per-point violations around eta * V_ora with that exact mean.
    std::vector<double> v(gen.dist.size());
    double mean = 0.0;
    for (double& x : v) mean += (x = rng::uniform(g, 0.75, 1.25)) / static_cast<double>(v.size());
    for (double& x : v) x *= eta_target * gen.noise_rate / mean;
    const Scorer f = table_with_violation(gen.dist, g, v);

    const double viol = population_metrics(gen.dist, f).violation_l1;
    const double eta = viol / gen.noise_rate;
    const double mu = select_mu(viol, gen.noise_rate);
    const std::string subj = subject("instance", i, "eta", eta);
    const double risk_f = population_metrics(gen.dist, f).risk_ce;
    const double risk_mu = population_metrics(gen.dist, f, Mu::from(mu)).risk_ce;
    r.check("risk_not_increased", subj, risk_mu, Relation::less_equal, risk_f, risk_tol);
    r.check("root_residual", subj, -std::expm1(-mu) * viol - mu * gen.noise_rate, Relation::equal, 0.0, root_tol);
    r.check("matches_bisection", subj, mu, Relation::equal, bisect_mu(eta), root_tol);
  }
}

void lambert_w_accuracy(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("residual");
  const double anchor = p.tolerance("anchor");
  const double lo = -1.0 / std::numbers::e, hi = p.real("t_max");
  const std::size_t n = p.count("points");
  double worst = 0.0, worst_t = lo;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
    // Cubic spacing concentrates points near the branch point.
    const double t = std::min(hi, lo + (hi - lo) * u * u * u);
    const double w = lambert_w(t);
    const double res = std::abs(w * std::exp(w) - t) / std::max(1.0, std::abs(t));
    if (res > worst) worst = res, worst_t = t;
  }
  r.check("max_relative_residual", "worst_t=" + tabular::format_real(worst_t), worst, Relation::less_equal, 0.0, tol);
  r.check("anchor_zero", "t=0", lambert_w(0.0), Relation::equal, 0.0, anchor);
  r.check("anchor_e", "t=e", lambert_w(std::numbers::e), Relation::equal, 1.0, anchor);
  r.check("anchor_branch", "t=-1/e", lambert_w(lo), Relation::equal, -1.0, anchor);
}

void margin_and_l1_changes(const Params& p, report::ExperimentReport& r) {
  const double id_tol = p.tolerance("identity");
  const double bound_tol = p.tolerance("bound");
  const double d_tol = p.tolerance("derivative");
  const auto grid = geometric_grid(1e-3, 40.0, p.count("mu_points"));
  const double scale = p.real("score_scale");
  for (std::size_t i = 0; i < p.count("instances"); ++i) {
    const FiniteDistribution clean =
        random_instance(rng::derive_seed(p.seed(), i), p.count("max_labels"), p.count("max_points"), 0.0);
    rng::Engine g(rng::derive_seed(p.seed(), 1000 + i));
    const Scorer f = random_table(clean, g, scale);
    r.check("margin_delta_inf_eq_positive_gap", subject("clean", i), margin_delta(clean, f, Mu::infinite()),
            Relation::equal, margin_positive_part(clean, f), id_tol);
    r.check("l1_delta_inf_ge_gold_times_outside", subject("clean", i), l1_delta(clean, f, Mu::infinite()),
            Relation::greater_equal, population_metrics(clean, f).gold_times_outside, bound_tol);

    const FiniteDistribution noisy =
        random_instance(rng::derive_seed(p.seed(), 500 + i), p.count("max_labels"), p.count("max_points"), -1.0);
    const Scorer h = random_table(noisy, g, scale);
    double worst = kInf, worst_mu = 0.0;
    for (double mu : grid) {
      const RiskDelta d = risk_delta(noisy, h, Mu::from(mu));
      if (d.delta_l1 - d.lower_bound_l1 < worst) worst = d.delta_l1 - d.lower_bound_l1, worst_mu = mu;
    }
    r.check("l1_delta_minus_lower_bound", subject("noisy", i, "worst_mu", worst_mu), worst, Relation::greater_equal,
            0.0, bound_tol);
  }

  const double h = p.real("step");
  for (std::size_t k = 0; k < p.count("derivative_points"); ++k) {
    rng::Engine g(rng::derive_seed(p.seed(), 2000 + k));
    const std::size_t c = 2 + rng::uniform_index(g, p.count("max_labels") - 1);
    std::vector<double> s(c);
    for (double& x : s) x = scale * rng::normal(g);
    std::uint64_t bits = 0;
    while (bits == 0) bits = g() & ((std::uint64_t{1} << c) - 1);
    const LabelSet adm(bits);
    const double mu = rng::uniform(g, 0.0, 5.0);
    std::vector<double> an(c), plus(c), minus(c);
    ccm_probability_derivative(s, adm, Mu::from(mu), an);
    ccm_softmax(s, adm, Mu::from(mu + h), plus);
    ccm_softmax(s, adm, Mu::from(std::max(mu - h, 0.0)), minus);
    const double span = mu + h - std::max(mu - h, 0.0);
    double err = 0.0;
    for (std::size_t j = 0; j < c; ++j) err = std::max(err, std::abs(an[j] - (plus[j] - minus[j]) / span));
    r.check("probability_mu_derivative", subject("point", k, "mu", mu), err, Relation::less_equal, 0.0, d_tol);
  }
}

void gradient_agreement(const Params& p, report::ExperimentReport& r) {
  const double tol = p.tolerance("relative");
  const double h = p.real("step");
  const std::size_t dim = p.count("dim");
  for (std::size_t k = 0; k < p.count("pairs"); ++k) {
    rng::Engine g(rng::derive_seed(p.seed(), k));
    const std::size_t c = 2 + rng::uniform_index(g, p.count("max_labels") - 1);
    LinearScorer w(c, dim);
    for (double& x : w.weights()) x = rng::normal(g);
    std::vector<double> feat(dim);
    for (double& x : feat) x = rng::normal(g);
    std::uint64_t bits = 0;
    while (bits == 0 || bits == (std::uint64_t{1} << c) - 1) bits = g() & ((std::uint64_t{1} << c) - 1);
    const LabelSet adm(bits);
    std::vector<std::size_t> in;
    for (std::size_t j = 0; j < c; ++j) {
      if (adm.contains(j)) in.push_back(j);
    }
    const std::size_t gold = in[rng::uniform_index(g, in.size())];
    const InstanceView x{0, feat};

    struct Case {
      const char* name;
      std::vector<double> grad;
      double (*value)(std::span<const double>, LabelSet, std::size_t);
    };
    const Case cases[] = {
        {"cross_entropy", loss_gradient(LossKind::cross_entropy, w, x, gold),
         [](std::span<const double> s, LabelSet a, std::size_t y) { return point_metrics(s, a, Mu{}, y).loss_ce; }},
        {"violation_ce", violation_gradient(LossKind::cross_entropy, w, x, adm),
         [](std::span<const double> s, LabelSet a, std::size_t) { return point_violation(s, a, Mu{}).ce; }},
        {"strict_cross_entropy", loss_gradient(LossKind::cross_entropy, w, x, gold, adm, Mu::infinite()),
         [](std::span<const double> s, LabelSet a, std::size_t y) {
           return point_metrics(s, a, Mu::infinite(), y).loss_ce;
         }},
    };
    for (const Case& cs : cases) {
      std::vector<double> fd(cs.grad.size());
      std::vector<double> sc(c);
      for (std::size_t q = 0; q < fd.size(); ++q) {
        LinearScorer probe = w;
        const double orig = probe.weights()[q];
        probe.weights()[q] = orig + h;
        probe.scores(feat, sc);
        const double up = cs.value(sc, adm, gold);
        probe.weights()[q] = orig - h;
        probe.scores(feat, sc);
        const double down = cs.value(sc, adm, gold);
        fd[q] = (up - down) / (2.0 * h);
      }
      double diff = 0.0, ref = 0.0;
      for (std::size_t q = 0; q < fd.size(); ++q) {
        diff += (cs.grad[q] - fd[q]) * (cs.grad[q] - fd[q]);
        ref += fd[q] * fd[q];
      }
      const double rel = std::sqrt(diff) / std::max(std::sqrt(ref), 1e-8);
      r.check(std::string("gradient_") + cs.name, subject("pair", k), rel, Relation::less_equal, 0.0, tol);
    }
  }
}

void loss_relations(const Params& p, report::ExperimentReport& r) {
  const double half_tol = p.tolerance("half_norm");
  const double limit_tol = p.tolerance("limit");
  const double t = p.real("scale");
  const double min_gap = p.real("min_gap");
  double worst_order = -kInf, worst_half = 0.0, worst_limit = 0.0;
  std::size_t limit_cases = 0;
  const std::size_t n = p.count("evaluations");
  for (std::size_t k = 0; k < n; ++k) {
    rng::Engine g(rng::derive_seed(p.seed(), k));
    const std::size_t c = 2 + rng::uniform_index(g, p.count("max_labels") - 1);
    std::vector<double> s(c);
    for (double& x : s) x = p.real("score_scale") * rng::normal(g);
    const std::size_t gold = rng::uniform_index(g, c);
    const LabelSet all = LabelSet::all(c);
    const PointMetrics m = point_metrics(s, all, Mu{}, gold);
    worst_order = std::max(worst_order, m.loss_l1 - m.loss_ce);

    const auto prob = softmax(s);
    double half = 0.0;
    for (std::size_t j = 0; j < c; ++j) half += std::abs(prob[j] - (j == gold ? 1.0 : 0.0));
    worst_half = std::max(worst_half, std::abs(m.loss_l1 - 0.5 * half));

    auto sorted = s;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (sorted[0] - sorted[1] >= min_gap) {
      ++limit_cases;
      std::vector<double> scaled(c);
      for (std::size_t j = 0; j < c; ++j) scaled[j] = t * s[j];
      const double l1 = point_metrics(scaled, all, Mu{}, gold).loss_l1;
      const double zero_one = argmax(s) == gold ? 0.0 : 1.0;
      worst_limit = std::max(worst_limit, std::abs(l1 - zero_one));
    }
  }
  r.check("l1_le_cross_entropy", subject("evaluations", n), worst_order, Relation::less_equal, 0.0, 0.0);
  r.check("l1_eq_half_one_norm", subject("evaluations", n), worst_half, Relation::less_equal, 0.0, half_tol);
  r.check("scaled_l1_eq_zero_one", subject("gapped_evaluations", limit_cases), worst_limit, Relation::less_equal, 0.0,
          limit_tol);
}

}  // namespace conlab::experiments::detail
