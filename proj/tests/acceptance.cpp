// Acceptance suite: one PASS/FAIL line per criterion. Reference values come
// from the 50-digit evaluations in support.hpp, brute-force enumeration or
// bisection, never from the quantity under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "conlab/ccm_analysis.hpp"
#include "conlab/complexity.hpp"
#include "conlab/errors.hpp"
#include "conlab/losses.hpp"
#include "conlab/rng.hpp"
#include "conlab/synthgen.hpp"
#include "conlab/training.hpp"
#include "support.hpp"

using namespace conlab;
namespace ts = testing_support;
using ts::Real;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Scores of any scorer over the support, with linear scores recomputed here.
ScoreTable table_of(const FiniteDistribution& d, const Scorer& f) {
  if (const ScoreTable* t = f.table()) return *t;
  const LinearScorer& lin = *f.linear();
  std::vector<double> s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& x = d.point(i).features;
    for (std::size_t j = 0; j < lin.labels(); ++j) {
      double v = 0;
      for (std::size_t k = 0; k < lin.dim(); ++k) v += lin.weights()[j * lin.dim() + k] * x[k];
      s.push_back(v);
    }
  }
  return ScoreTable(lin.labels(), std::move(s));
}

ts::Population oracle(const FiniteDistribution& d, const Scorer& f, double mu = 0.0) {
  return ts::population(d, table_of(d, f), mu);
}

/// Adds `shift` to every inadmissible score, which moves V(f) monotonically.
ScoreTable shifted(const FiniteDistribution& d, const ScoreTable& t, double shift) {
  ScoreTable out = t;
  const std::size_t c = d.labels().count();
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t y = 0; y < c; ++y) {
      if (!d.admissible(i).contains(y)) out.row(i)[y] += shift;
    }
  }
  return out;
}

double shift_for_violation(const FiniteDistribution& d, const ScoreTable& t, double target) {
  return ts::bisect([&](double s) { return ts::to_double(ts::population(d, shifted(d, t, s), 0.0).violation_l1) - target; },
                    -60.0, 60.0, 120);
}

FiniteDistribution linear_instance(std::uint64_t seed, std::size_t labels, std::size_t points, double noise) {
  FiniteSpec spec;
  spec.labels = labels;
  spec.points = points;
  spec.noise = noise;
  spec.seed = seed;
  spec.feature_dim = 2;
  spec.bias = true;
  return make_finite(spec).dist;
}

TrainConfig config(Objective o, LossKind loss, std::size_t iters) {
  TrainConfig cfg;
  cfg.objective = o;
  cfg.loss = loss;
  cfg.max_iters = iters;
  cfg.grad_tol = 1e-10;
  return cfg;
}

// ---------------------------------------------------------------------------

void noise_free_identity(Outcome& o) {
  rng::Engine g(101);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    const auto d = ts::random_distribution(g, 6, 50, 0.0);
    const ScoreTable t = ts::random_table(d, g, 3.0);
    const double delta = risk_delta(d, t, Mu::infinite()).delta_ce;
    const double vce = ts::to_double(ts::population(d, t, 0.0).violation_ce);
    worst = std::max(worst, std::abs(delta - vce));
  }
  o.require(worst < 1e-9, "identity");
  o.detail << "max |delta - V_ce| " << fmt(worst);
}

void ce_lower_bound(Outcome& o) {
  rng::Engine g(202);
  const auto grid = default_mu_grid();
  double worst_gap = kInf, worst_agree = 0;
  std::size_t checks = 0;
  for (int k = 0; k < 20; ++k) {
    const auto d = ts::random_distribution(g, 6, 40, -1.0);
    const ScoreTable t = ts::random_table(d, g, 2.0);
    const auto base = ts::population(d, t, 0.0);
    const double v = ts::to_double(base.violation_l1);
    const double nr = ts::to_double(ts::noise_rate(d));
    for (double mu : grid) {
      const double exact = ts::to_double(base.risk_ce - ts::population(d, t, mu).risk_ce);
      const double bound = v * (1.0 - std::exp(-mu)) - mu * nr;
      worst_gap = std::min(worst_gap, exact - bound);
      const RiskDelta rd = risk_delta(d, t, Mu::from(mu));
      worst_agree = std::max(worst_agree, std::abs(rd.delta_ce - exact));
      o.require(exact >= bound - 1e-10, "bound at mu=" + fmt(mu));
      o.require(rd.lower_bound_holds, "library flag");
      ++checks;
    }
  }
  o.require(worst_agree < 1e-9, "library delta vs reference");
  o.detail << checks << " grid points, min(delta - bound) " << fmt(worst_gap) << ", max library error "
           << fmt(worst_agree);
}

/// Second-order forward difference of R_ce(f) - R_ce(f^mu) at mu = 0, in 50 digits.
double fd_slope(const FiniteDistribution& d, const ScoreTable& t) {
  const double h = 1e-5;
  const Real r0 = ts::population(d, t, 0.0).risk_ce;
  const Real d1 = r0 - ts::population(d, t, h).risk_ce;
  const Real d2 = r0 - ts::population(d, t, 2 * h).risk_ce;
  return ts::to_double((4 * d1 - d2) / (2 * h));
}

void benefit_sign(Outcome& o) {
  rng::Engine g(303);
  double worst = 0;
  int triples = 0;
  for (int k = 0; k < 10; ++k) {
    const auto d = ts::random_distribution(g, 6, 30, -1.0);
    const double nr = ts::to_double(ts::noise_rate(d));
    if (nr >= 0.9) continue;
    const ScoreTable t = ts::random_table(d, g, 2.0);
    const double s0 = shift_for_violation(d, t, nr);
    const std::pair<double, Benefit> cases[] = {
        {s0 + 2.0, Benefit::improves}, {s0, Benefit::neutral}, {s0 - 2.0, Benefit::degrades}};
    for (const auto& [s, want] : cases) {
      const ScoreTable f = shifted(d, t, s);
      const double slope = ts::to_double(ts::population(d, f, 0.0).violation_l1) - nr;
      const BenefitReport b = marginal_benefit(d, f);
      o.require(b.sign == want, "sign " + to_string(b.sign) + " expected " + to_string(want));
      const double fd = fd_slope(d, f);
      worst = std::max({worst, std::abs(fd - slope), std::abs(b.fd_derivative - slope), std::abs(b.derivative - slope)});
    }
    ++triples;
  }
  o.require(triples >= 5, "too few triples");
  o.require(worst <= 1e-6, "finite difference");
  o.detail << triples << " triples, max |fd - (V - V_ora)| " << fmt(worst);
}

void mu_selection(Outcome& o) {
  rng::Engine g(404);
  double worst_risk = -kInf, worst_root = 0;
  int n = 0;
  while (n < 20) {
    const auto d = ts::random_distribution(g, 6, 30, -1.0);
    const double nr = ts::to_double(ts::noise_rate(d));
    const double eta_max = std::min(10.0, 0.95 / nr);
    if (eta_max < 1.1) continue;
    const double eta = rng::uniform(g, 1.1, eta_max);
    const ScoreTable t0 = ts::random_table(d, g, 2.0);
    const ScoreTable t = shifted(d, t0, shift_for_violation(d, t0, eta * nr));
    const double v = ts::to_double(ts::population(d, t, 0.0).violation_l1);
    const double mu = select_mu(v, nr);
    const double change = ts::to_double(ts::population(d, t, mu).risk_ce - ts::population(d, t, 0.0).risk_ce);
    worst_risk = std::max(worst_risk, change);
    o.require(change <= 1e-10, "risk increased at eta=" + fmt(eta));
    const auto gfun = [&](double m) { return (1.0 - std::exp(-m)) * v - m * nr; };
    const double root = ts::bisect(gfun, 1e-6, v / nr, 200);
    worst_root = std::max({worst_root, std::abs(root - mu), std::abs(gfun(mu))});
    ++n;
  }
  o.require(worst_root <= 1e-8, "root");
  o.detail << "20 instances, max risk change " << fmt(worst_risk) << ", max root error " << fmt(worst_root);
}

void lambert(Outcome& o) {
  const double lo = -std::exp(-1.0);
  double worst = 0;
  const auto residual = [](double t) {
    const double w = lambert_w(t);
    return ts::to_double(abs(Real(w) * exp(Real(w)) - Real(t))) / std::max(1.0, std::abs(t));
  };
  rng::Engine g(505);
  for (int k = 0; k < 10000; ++k) {
    double t;
    if (k == 0) {
      t = lo;
    } else if (k == 1) {
      t = 1e3;
    } else if (k % 2) {
      t = rng::uniform(g, lo, 1.0);
    } else {
      t = std::exp(rng::uniform(g, 0.0, std::log(1e3)));
    }
    worst = std::max(worst, residual(t));
  }
  o.require(worst <= 1e-12, "residual");
  const double a0 = std::abs(lambert_w(0.0)), a1 = std::abs(lambert_w(std::numbers::e) - 1.0),
               a2 = std::abs(lambert_w(lo) + 1.0);
  // -1/e is not representable; W has a square-root branch point there.
  o.require(a0 == 0.0 && a1 <= 1e-15 && a2 <= 1e-7, "anchors");
  o.detail << "max scaled residual " << fmt(worst) << ", anchor errors " << fmt(a0) << " " << fmt(a1) << " "
           << fmt(a2);
}

void deviation_bound(Outcome& o) {
  rng::Engine g(606);
  const double slack = 1e-10;
  std::size_t combos = 0;
  for (int k = 0; k < 50; ++k) {
    const auto d = ts::random_distribution(g, 5, 20, -1.0);
    const double rho = std::exp(rng::uniform(g, std::log(0.1), std::log(10.0)));
    std::vector<Scorer> grid;
    std::vector<double> r, v;
    for (int j = 0; j < 30; ++j) {
      // Duplicates create exact ties.
      ScoreTable t = (j > 0 && j % 7 == 0) ? *grid[j - 1].table() : ts::random_table(d, g, 2.0);
      const auto p = ts::population(d, t, 0.0);
      r.push_back(ts::to_double(p.risk_l1));
      v.push_back(ts::to_double(p.violation_l1));
      grid.emplace_back(std::move(t));
    }
    const auto argmins = [&](const std::function<double(std::size_t)>& f) {
      double best = kInf;
      for (std::size_t j = 0; j < grid.size(); ++j) best = std::min(best, f(j));
      std::vector<std::size_t> out;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        if (f(j) <= best + slack) out.push_back(j);
      }
      return out;
    };
    const auto f0 = argmins([&](std::size_t j) { return r[j]; });
    const auto frho = argmins([&](std::size_t j) { return r[j] + rho * v[j]; });
    const auto finf = argmins([&](std::size_t j) { return v[j]; });
    for (auto a : f0) {
      for (auto b : frho) {
        for (auto c : finf) {
          o.require(r[a] <= r[b] + slack, "lower inequality");
          o.require(r[b] <= r[a] + rho * (v[a] - v[c]) + slack, "upper inequality");
          ++combos;
        }
      }
    }
    const DeviationReport lib = deviation_bound_check(d, rho, grid);
    o.require(lib.lower_holds && lib.upper_holds, "library check");
  }
  Prop32Params pp;
  pp.rho = 2.0;
  pp.eps2 = 0.1;
  double worst = 0;
  for (int k = 1; k <= 10; ++k) {
    pp.eps1 = pp.rho * pp.eps2 * (1.0 - std::ldexp(1.0, -k));
    const ProofConstruction pc = make_prop32_tightness(pp);
    const auto p0 = oracle(pc.dist, pc.scorers[0]), pi = oracle(pc.dist, pc.scorers[1]);
    const double r0 = ts::to_double(p0.risk_l1), ri = ts::to_double(pi.risk_l1);
    const double v0 = ts::to_double(p0.violation_l1), vi = ts::to_double(pi.violation_l1);
    o.require(ri + pp.rho * vi < r0 + pp.rho * v0, "f_inf minimizes the objective");
    worst = std::max({worst, std::abs((ri - r0) - pp.eps1),
                      std::abs((r0 + pp.rho * (v0 - vi) - ri) - (pp.rho * pp.eps2 - pp.eps1))});
  }
  o.require(worst <= 1e-12, "tightness arithmetic");
  o.detail << combos << " minimizer combinations, tightness error " << fmt(worst);
}

void ervm_violation(Outcome& o) {
  double worst = -kInf;
  for (std::uint64_t i = 0; i < 5; ++i) {
    FiniteSpec spec;
    spec.labels = 3 + i % 3;
    spec.points = 12;
    spec.noise = 0.25;
    spec.seed = 700 + i;
    const auto d = make_finite(spec).dist;
    const double t = std::log(static_cast<double>(spec.labels - 1) / 1e-6);
    const ScoreTable f_t = baseline_scorer(d, t);
    const double u = ts::to_double(ts::population(d, f_t, 0.0).violation_l1);
    o.require(u <= 1e-6, "baseline u");
    const Scorer zero = ScoreTable(spec.labels, std::vector<double>(d.size() * spec.labels, 0.0));
    for (double rho : {0.5, 1.0, 2.0, 5.0, 10.0}) {
      TrainConfig cfg = config(Objective::ervm_surrogate, LossKind::ell1, 3000);
      cfg.rho = rho;
      const Scorer a = train(cfg, d, zero).scorer;
      const Scorer b = train(cfg, d, f_t).scorer;
      const auto pa = oracle(d, a), pb = oracle(d, b);
      const auto& best = (pb.risk_l1 + rho * pb.violation_l1 < pa.risk_l1 + rho * pa.violation_l1) ? pb : pa;
      const double v = ts::to_double(best.violation_l1);
      worst = std::max(worst, v - (1.0 / rho + u));
      o.require(v <= 1.0 / rho + u + 1e-6, "rho=" + fmt(rho));
    }
  }
  o.detail << "max V(f_rho) - (1/rho + u) " << fmt(worst);
}

void complexity_shift(Outcome& o) {
  rng::Engine g(808);
  double worst = 0;
  for (int k = 0; k < 5; ++k) {
    const auto d = ts::random_distribution(g, 5, 20, -1.0);
    const std::size_t c = d.labels().count();
    EnumeratedFamily fam;
    for (int j = 0; j < 15; ++j) fam.scorers.emplace_back(ts::random_table(d, g, 1.0));
    std::vector<InstanceView> s;
    for (std::size_t i = 0; i < d.size(); ++i) s.push_back(d.instance(i));
    for (double mu : {0.3, 2.0}) {
      const auto r = ccm_complexity_identity_check(fam, d.constraint(), Mu::from(mu), s, 100, 17 + k);
      worst = std::max(worst, r.max_abs_discrepancy);
      // Brute force on the same draws: sup over shifted members vs shifted sup.
      for (std::size_t dr = 0; dr < 100; ++dr) {
        rng::Engine eg(rng::derive_seed(17 + k, dr));
        std::vector<double> eps(s.size() * c);
        for (double& e : eps) e = rng::rademacher(eg);
        double sup = -kInf, sup_shift = -kInf, ev = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          for (std::size_t y = 0; y < c; ++y) ev += eps[i * c + y] * (d.admissible(i).contains(y) ? 0.0 : 1.0);
        }
        for (const Scorer& f : fam.scorers) {
          double a = 0, as = 0;
          for (std::size_t i = 0; i < s.size(); ++i) {
            const auto row = f.table()->row(i);
            for (std::size_t y = 0; y < c; ++y) {
              a += eps[i * c + y] * row[y];
              as += eps[i * c + y] * (row[y] - (d.admissible(i).contains(y) ? 0.0 : mu));
            }
          }
          sup = std::max(sup, a);
          sup_shift = std::max(sup_shift, as);
        }
        worst = std::max(worst, std::abs(sup_shift - (sup - mu * ev)));
      }
    }
  }
  o.require(worst < 1e-10, "per-draw identity");
  FiniteSpec spec;
  spec.labels = 4;
  spec.points = 30;
  spec.feature_dim = 3;
  spec.noise = 0.2;
  spec.seed = 809;
  const auto d = make_finite(spec).dist;
  std::vector<InstanceView> s;
  for (std::size_t i = 0; i < d.size(); ++i) s.push_back(d.instance(i));
  const auto r = ccm_complexity_identity_check(LinearBallFamily{.labels = 4, .dim = 3}, d.constraint(), Mu::from(1.0), s, 2000, 810);
  const bool paired = std::abs(r.mean_difference) <= 3 * r.pooled_std_error;
  o.require(paired, "linear paired difference");
  o.detail << "enumerated max discrepancy " << fmt(worst) << ", linear |diff| " << fmt(std::abs(r.mean_difference))
           << " vs 3se " << fmt(3 * r.pooled_std_error);
}

void on_training(Outcome& o) {
  double worst_id = 0, worst_a = -kInf, worst_b = -kInf;
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto d = linear_instance(rng::derive_seed(909, i), 3, 30, 0.0);
    const Scorer zero = LinearScorer(3, d.feature_dim());
    TrainConfig on_cfg = config(Objective::on_training_ccm, LossKind::cross_entropy, 5000);
    on_cfg.mu = Mu::infinite();
    const auto observe = [&](std::size_t, const Scorer& f, double objective) {
      const auto p = oracle(d, f);
      worst_id = std::max(worst_id, std::abs(objective - ts::to_double(p.risk_ce - p.violation_ce)));
    };
    const Scorer f_on = train(on_cfg, d, zero, observe).scorer;
    const Scorer f_post = train(config(Objective::erm, LossKind::cross_entropy, 5000), d, zero).scorer;

    // Any value found upper-bounds the infimum, which makes the last
    // inequality harder to satisfy, not easier.
    const TrainConfig vcfg = config(Objective::violation, LossKind::cross_entropy, 5000);
    std::vector<Scorer> starts = {zero, f_post, f_on};
    for (std::uint64_t k = 0; k < 3; ++k) {
      TrainConfig r = vcfg;
      r.init_scale = 1.0;
      r.seed = rng::derive_seed(910, 100 * i + k);
      starts.push_back(train(r, d, zero).scorer);
    }
    double min_vce = kInf;
    for (const Scorer& s : starts) {
      min_vce = std::min(min_vce, ts::to_double(oracle(d, s).violation_ce));
      min_vce = std::min(min_vce, ts::to_double(oracle(d, train(vcfg, d, s).scorer).violation_ce));
    }
    const double on_strict = ts::to_double(oracle(d, f_on, kInf).risk_ce);
    const double post_strict = ts::to_double(oracle(d, f_post, kInf).risk_ce);
    const double on_base = ts::to_double(oracle(d, f_on).risk_ce);
    worst_a = std::max(worst_a, on_strict - post_strict);
    worst_b = std::max(worst_b, post_strict + 1e-4 - (on_base - min_vce));
    o.require(on_strict <= post_strict + 1e-4, "on vs post");
    o.require(post_strict + 1e-4 <= on_base - min_vce + 2e-4, "post vs on minus min V_ce");
  }
  o.require(worst_id <= 1e-9, "objective identity");
  o.detail << "identity error " << fmt(worst_id) << ", max on-post " << fmt(worst_a) << ", max second slack use "
           << fmt(worst_b);
}

void combined_gain(Outcome& o) {
  std::size_t found = 0, tried = 0;
  double worst = -kInf;
  for (std::uint64_t a = 0; a < 200 && found < 10; ++a, ++tried) {
    const auto d = linear_instance(rng::derive_seed(1010, a), 3, 20, 0.2);
    const Scorer zero = LinearScorer(3, d.feature_dim());
    const Scorer f_post = train(config(Objective::erm, LossKind::cross_entropy, 3000), d, zero).scorer;
    const auto post = oracle(d, f_post);
    const double v = ts::to_double(post.violation_l1), nr = ts::to_double(ts::noise_rate(d));
    if (!(v > nr)) continue;
    const double mu = 0.5 * select_mu(v, nr);
    if (!(ts::to_double(post.risk_ce - oracle(d, f_post, mu).risk_ce) > 0.0)) continue;
    const double threshold = combo_rho_threshold(d, f_post, Mu::from(mu));
    if (!(threshold > 0.0) || !std::isfinite(threshold)) continue;
    TrainConfig cfg = config(Objective::combined_ccm_regularized, LossKind::cross_entropy, 3000);
    cfg.mu = Mu::from(mu);
    cfg.rho = 0.9 * threshold;
    const Scorer f_star = train(cfg, d, f_post).scorer;
    const double diff = ts::to_double(oracle(d, f_star, mu).risk_ce - post.risk_ce);
    worst = std::max(worst, diff);
    o.require(diff < 1e-4, "instance " + std::to_string(a));
    ++found;
  }
  o.require(found == 10, "only " + std::to_string(found) + " qualifying instances");
  o.detail << found << " of " << tried << " candidates qualified, max R_ce(f*^mu) - R_ce(f_post) " << fmt(worst);
}

void futility(Outcome& o) {
  const auto grid = default_mu_grid();
  double worst_delta = -kInf, worst_slope = -kInf;
  const std::pair<double, double> cases[] = {{0.3, 0.1}, {0.3, 0.2}, {0.4, 0.1}, {0.2, 0.05}};
  for (const auto& [noise, vmin] : cases) {
    Thm52Params tp;
    tp.noise = noise;
    tp.min_violation = vmin;
    tp.points = 20;
    const ProofConstruction pc = make_thm52_grid(tp);
    std::vector<double> r, v;
    for (const Scorer& f : pc.scorers) {
      const auto p = oracle(pc.dist, f);
      r.push_back(ts::to_double(p.risk_l1));
      v.push_back(ts::to_double(p.violation_l1));
    }
    const double nr = ts::to_double(ts::noise_rate(pc.dist));
    const double threshold = 1.0 / (nr - *std::min_element(v.begin(), v.end()));
    for (double factor : {1.0, 2.0, 5.0}) {
      const double rho = factor * threshold;
      std::size_t best = 0;
      for (std::size_t k = 1; k < r.size(); ++k) {
        if (r[k] + rho * v[k] < r[best] + rho * v[best]) best = k;
      }
      const ScoreTable t = table_of(pc.dist, pc.scorers[best]);
      const Real base = ts::population(pc.dist, t, 0.0).risk_ce;
      std::vector<double> mus = grid;
      mus.push_back(kInf);
      for (double mu : mus) {
        const double delta = ts::to_double(base - ts::population(pc.dist, t, mu).risk_ce);
        worst_delta = std::max(worst_delta, delta);
        o.require(delta <= 1e-10, "delta at mu=" + fmt(mu));
      }
      worst_slope = std::max(worst_slope, v[best] - nr);
      o.require(v[best] - nr <= 0.0, "derivative");
      o.require(futility_check(pc.dist, pc.scorers[best], grid).holds, "library check");
    }
  }
  o.detail << "max delta " << fmt(worst_delta) << ", max derivative " << fmt(worst_slope);
}

void margin_l1_changes(Outcome& o) {
  rng::Engine g(1212);
  const auto grid = default_mu_grid();
  double worst_margin = 0, worst_l1 = kInf, worst_deriv = 0;
  for (int k = 0; k < 20; ++k) {
    // Margin identity and the strict l1 bound, noise-free.
    const auto d = ts::random_distribution(g, 6, 50, 0.0);
    const ScoreTable t = ts::random_table(d, g, 3.0);
    const std::size_t c = d.labels().count();
    Real pos = 0, gold_out = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto s = ts::row(t, i);
      double in = -kInf, out = -kInf;
      for (std::size_t y = 0; y < c; ++y) {
        double& side = d.admissible(i).contains(y) ? in : out;
        side = std::max(side, s[y]);
      }
      pos += Real(d.point(i).weight) * Real(std::max(0.0, out - in));
      const auto q = ts::ccm_probs(s, d.admissible(i), 0.0);
      Real q_out = 0;
      for (std::size_t y = 0; y < c; ++y) {
        if (!d.admissible(i).contains(y)) q_out += q[y];
      }
      gold_out += Real(d.point(i).weight) * q[d.point(i).oracle] * q_out;
    }
    const auto p0 = ts::population(d, t, 0.0), pinf = ts::population(d, t, kInf);
    worst_margin = std::max({worst_margin, std::abs(ts::to_double(p0.margin - pinf.margin - pos)),
                             std::abs(margin_delta(d, t, Mu::infinite()) - ts::to_double(pos))});
    const double strict_gain = ts::to_double(p0.risk_l1 - pinf.risk_l1 - gold_out);
    worst_l1 = std::min(worst_l1, strict_gain);
    o.require(strict_gain >= -1e-10, "strict l1 bound");

    // Finite-mu l1 bound on a noisy instance.
    const auto dn = ts::random_distribution(g, 6, 50, -1.0);
    const ScoreTable tn = ts::random_table(dn, g, 3.0);
    const std::size_t cn = dn.labels().count();
    Real go = 0;
    for (std::size_t i = 0; i < dn.size(); ++i) {
      const auto q = ts::ccm_probs(ts::row(tn, i), dn.admissible(i), 0.0);
      Real q_out = 0;
      for (std::size_t y = 0; y < cn; ++y) {
        if (!dn.admissible(i).contains(y)) q_out += q[y];
      }
      go += Real(dn.point(i).weight) * q[dn.point(i).oracle] * q_out;
    }
    const double nr = ts::to_double(ts::noise_rate(dn));
    const Real base = ts::population(dn, tn, 0.0).risk_l1;
    for (double mu : grid) {
      const double gain = ts::to_double(base - ts::population(dn, tn, mu).risk_l1);
      const double bound = (1.0 - std::exp(-2.0 * mu)) / 2.0 * ts::to_double(go) - mu * nr;
      worst_l1 = std::min(worst_l1, gain - bound);
      o.require(gain >= bound - 1e-10, "l1 bound at mu=" + fmt(mu));
    }
  }
  o.require(worst_margin < 1e-9, "margin identity");

  // dP/dmu against central differences of the reference probabilities.
  const double h = 1e-5;
  for (int k = 0; k < 200; ++k) {
    const std::size_t c = 2 + rng::uniform_index(g, 5);
    std::vector<double> s(c);
    for (double& v : s) v = 3.0 * rng::normal(g);
    const LabelSet adm(1 + rng::uniform_index(g, (std::uint64_t{1} << c) - 2));
    const double mu = rng::uniform(g, 0.01, 5.0);
    std::vector<double> dp(c);
    ccm_probability_derivative(s, adm, Mu::from(mu), dp);
    const auto up = ts::ccm_probs(s, adm, mu + h), dn = ts::ccm_probs(s, adm, mu - h);
    for (std::size_t y = 0; y < c; ++y) {
      worst_deriv = std::max(worst_deriv, std::abs(dp[y] - ts::to_double((up[y] - dn[y]) / (2 * h))));
    }
  }
  o.require(worst_deriv <= 1e-6, "probability derivative");
  o.detail << "margin error " << fmt(worst_margin) << ", min l1 slack " << fmt(worst_l1) << ", derivative error "
           << fmt(worst_deriv);
}

void generalization(Outcome& o) {
  FiniteSpec spec;
  spec.labels = 4;
  spec.points = 40;
  spec.noise = 0.2;
  spec.seed = 1313;
  const auto d = make_finite(spec).dist;
  rng::Engine g(1314);
  EnumeratedFamily fam;
  for (int k = 0; k < 30; ++k) fam.scorers.emplace_back(ts::random_table(d, g, 1.0));
  const std::size_t m = 100;
  const double delta = 0.1;
  const double rl = expected_rademacher(fam, d, m, 2000, 1315).mean;
  const double bound = rl + std::sqrt(std::log(1.0 / delta) / (2.0 * m));
  std::vector<double> risk;
  for (const Scorer& f : fam.scorers) risk.push_back(ts::to_double(oracle(d, f).risk_l1));
  std::size_t exceed = 0;
  const std::size_t n = 200;
  for (std::size_t s = 0; s < n; ++s) {
    const Dataset data = sample_dataset(d, m, 0, rng::derive_seed(1316, s));
    double gap = -1.0;
    for (std::size_t k = 0; k < fam.scorers.size(); ++k) {
      Real emp = 0;
      for (const auto& ex : data.labeled) {
        const auto q = ts::ccm_probs(ts::row(*fam.scorers[k].table(), ex.instance.id), LabelSet::all(4), 0.0);
        emp += 1 - q[ex.label];
      }
      gap = std::max(gap, risk[k] - ts::to_double(emp / m));
    }
    exceed += gap > bound;
  }
  const double frac = static_cast<double>(exceed) / n;
  o.require(frac < delta, "exceedance");

  GaussianSpec gs;
  gs.labels = 5;
  gs.dim = 2;
  gs.mean = {0.8, 0.3};
  gs.sigma2 = 0.01;
  gs.m = 300;
  gs.seed = 1317;
  const auto gf = make_gaussian_features(gs);
  double mean[2] = {0, 0}, var = 0;
  for (const auto& p : gf.dist.points()) {
    for (int k = 0; k < 2; ++k) mean[k] += p.weight * p.features[k];
  }
  for (const auto& p : gf.dist.points()) {
    for (int k = 0; k < 2; ++k) var += p.weight * (p.features[k] - mean[k]) * (p.features[k] - mean[k]);
  }
  const double sigma2 = var / 2.0, alpha_sq = mean[0] * mean[0] + mean[1] * mean[1];
  const double analytic = 0.5 * (std::sqrt(5.0 / 100) + std::sqrt((5.0 - sigma2 - alpha_sq) / 100));
  const double t = 0.13;
  const auto r = constrained_subset_complexity_bound(gf.dist, t, 100, 100, 1318);
  const double allowed = analytic + 3 * r.primal.std_error;
  o.require(t < 1.0 / 7.0 && r.primal.mean <= allowed, "capped family");
  o.detail << "exceedance " << exceed << "/" << n << " (bound " << fmt(bound) << "), capped estimate "
           << fmt(r.primal.mean) << " <= " << fmt(allowed);
}

/// Relative error between an analytic gradient over linear weights and
/// central differences of a 50-digit loss.
double gradient_error(const LinearScorer& w, const std::vector<double>& grad,
                      const std::function<Real(const std::vector<double>&)>& loss) {
  const double h = 1e-5;
  std::vector<double> fd(grad.size());
  for (std::size_t k = 0; k < grad.size(); ++k) {
    std::vector<double> s(w.weights().begin(), w.weights().end());
    s[k] += h;
    const Real up = loss(s);
    s[k] -= 2 * h;
    fd[k] = ts::to_double((up - loss(s)) / (2 * h));
  }
  double num = 0, den = 0;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    num += (grad[k] - fd[k]) * (grad[k] - fd[k]);
    den += fd[k] * fd[k];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

void gradients(Outcome& o) {
  rng::Engine g(1414);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t c = 2 + rng::uniform_index(g, 5), p = 1 + rng::uniform_index(g, 4);
    std::vector<double> wv(c * p), x(p);
    for (double& v : wv) v = rng::normal(g);
    for (double& v : x) v = rng::normal(g);
    const LinearScorer w(c, p, wv);
    const LabelSet adm(1 + rng::uniform_index(g, (std::uint64_t{1} << c) - 2));
    std::size_t gold = rng::uniform_index(g, c);
    while (!adm.contains(gold)) gold = (gold + 1) % c;
    const auto scores_of = [&](const std::vector<double>& ws) {
      std::vector<double> s(c, 0.0);
      for (std::size_t j = 0; j < c; ++j) {
        for (std::size_t i = 0; i < p; ++i) s[j] += ws[j * p + i] * x[i];
      }
      return s;
    };
    const InstanceView view{0, x};
    const auto ce = [&](const std::vector<double>& ws) {
      return Real(-log(ts::ccm_probs(scores_of(ws), LabelSet::all(c), 0.0)[gold]));
    };
    const auto vce = [&](const std::vector<double>& ws) {
      const auto q = ts::ccm_probs(scores_of(ws), LabelSet::all(c), 0.0);
      Real in = 0;
      for (std::size_t y = 0; y < c; ++y) {
        if (adm.contains(y)) in += q[y];
      }
      return Real(-log(in));
    };
    const auto strict = [&](const std::vector<double>& ws) {
      return Real(-log(ts::ccm_probs(scores_of(ws), adm, kInf)[gold]));
    };
    worst = std::max(worst, gradient_error(w, loss_gradient(LossKind::cross_entropy, w, view, gold), ce));
    worst = std::max(worst, gradient_error(w, violation_gradient(LossKind::cross_entropy, w, view, adm), vce));
    worst = std::max(worst, gradient_error(w, loss_gradient(LossKind::cross_entropy, w, view, gold, adm, Mu::infinite()),
                                           strict));
  }
  o.require(worst < 1e-5, "relative error");
  o.detail << "300 gradients, max relative error " << fmt(worst);
}

void loss_relations(Outcome& o) {
  rng::Engine g(1515);
  double worst_order = -kInf, worst_half = 0, worst_limit = 0;
  std::size_t limit_cases = 0;
  for (int k = 0; k < 10000; ++k) {
    const std::size_t c = 2 + rng::uniform_index(g, 7);
    std::vector<double> s(c);
    const double scale = std::exp(rng::uniform(g, -2.0, 3.0));
    for (double& v : s) v = scale * rng::normal(g);
    const std::size_t gold = rng::uniform_index(g, c);
    const PointMetrics pm = point_metrics(s, LabelSet::all(c), Mu{}, gold);
    worst_order = std::max(worst_order, pm.loss_l1 - pm.loss_ce);
    const auto q = ts::ccm_probs(s, LabelSet::all(c), 0.0);
    Real dist = 0;
    for (std::size_t y = 0; y < c; ++y) dist += abs((y == gold ? Real(1) : Real(0)) - q[y]);
    worst_half = std::max(worst_half, std::abs(pm.loss_l1 - ts::to_double(dist / 2)));

    std::vector<double> sorted = s;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] - sorted[1] >= 0.5) {
      std::vector<double> big(c);
      for (std::size_t y = 0; y < c; ++y) big[y] = 1e3 * s[y];
      const double l = point_metrics(big, LabelSet::all(c), Mu{}, gold).loss_l1;
      const std::size_t top = std::max_element(s.begin(), s.end()) - s.begin();
      worst_limit = std::max(worst_limit, std::abs(l - (top != gold ? 1.0 : 0.0)));
      ++limit_cases;
    }
  }
  o.require(worst_order <= 0.0, "l1 above cross-entropy");
  o.require(worst_half <= 1e-12, "half l1 distance");
  o.require(worst_limit <= 1e-6 && limit_cases > 1000, "scale limit");
  o.detail << "max L - L_ce " << fmt(worst_order) << ", half-norm error " << fmt(worst_half) << ", scale-limit error "
           << fmt(worst_limit) << " over " << limit_cases << " cases";
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)(Outcome&)> criteria[] = {
      {"strict inference gain equals V_ce without noise", noise_free_identity},
      {"ce risk change lower bound over the mu grid", ce_lower_bound},
      {"marginal benefit sign and slope", benefit_sign},
      {"selected mu never increases ce risk", mu_selection},
      {"lambert w accuracy", lambert},
      {"regularized minimizer deviation bounds", deviation_bound},
      {"ervm violation bound", ervm_violation},
      {"ccm complexity shift", complexity_shift},
      {"on-training objective and ordering", on_training},
      {"combined objective improves on erm", combined_gain},
      {"post-training inference futility", futility},
      {"margin and l1 risk changes", margin_l1_changes},
      {"generalization gap and capped complexity", generalization},
      {"analytic gradients", gradients},
      {"loss relations", loss_relations},
  };
  int failed = 0, n = 0;
  for (const auto& [name, fn] : criteria) {
    ++n;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.str().c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%d criteria passed\n", n - failed, n);
  return failed ? 1 : 0;
}
