#include "conlab/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "conlab/errors.hpp"
#include "conlab/kernels.hpp"
#include "conlab/losses.hpp"
#include "conlab/rng.hpp"
#include "conlab/tabular.hpp"
#include "conlab/training.hpp"

namespace conlab {
namespace {

/// Nonempty proper subset of 0..c-1.
LabelSet random_proper_subset(rng::Engine& g, std::size_t c) {
  const std::size_t k = 1 + rng::uniform_index(g, c - 1);
  std::vector<std::size_t> labels(c);
  std::iota(labels.begin(), labels.end(), 0);
  rng::shuffle(std::span(labels), g);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < k; ++i) bits |= std::uint64_t{1} << labels[i];
  return LabelSet(bits);
}

std::size_t pick_from(rng::Engine& g, LabelSet set, std::size_t c) {
  std::vector<std::size_t> members;
  for (std::size_t j = 0; j < c; ++j) {
    if (set.contains(j)) members.push_back(j);
  }
  return members[rng::uniform_index(g, members.size())];
}

std::vector<double> normalized(std::vector<double> w) {
  const double s = kernels::pairwise_sum(w);
  for (double& v : w) v /= s;
  return w;
}

/// Noisy point indices for non-uniform weights: seed order, greedy fill
/// without overshooting, then one extra point if it lands closer.
std::vector<std::size_t> greedy_noisy(const std::vector<double>& w, double target, rng::Engine& g) {
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  rng::shuffle(std::span(order), g);
  std::vector<std::size_t> chosen;
  std::vector<bool> used(w.size(), false);
  double acc = 0.0;
  for (std::size_t i : order) {
    if (acc + w[i] <= target + 1e-15) {
      acc += w[i];
      chosen.push_back(i);
      used[i] = true;
    }
  }
  std::size_t best = w.size();
  for (std::size_t i : order) {
    if (!used[i] && std::abs(acc + w[i] - target) < std::abs(acc - target)) {
      if (best == w.size() || w[i] < w[best]) best = i;
    }
  }
  if (best != w.size()) chosen.push_back(best);
  return chosen;
}

void self_check(bool ok, const std::string& what) {
  if (!ok) throw ConstructionError("self-check failed: " + what);
}

}  // namespace

GeneratedDistribution make_finite(const FiniteSpec& spec) {
  if (spec.labels < 2 || spec.labels > kMaxLabels) throw std::invalid_argument("label count out of range");
  if (spec.points == 0) throw std::invalid_argument("need at least one point");
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw std::invalid_argument("noise target must lie in [0, 1]");
  const std::size_t c = spec.labels, n = spec.points;
  rng::Engine g(rng::derive_seed(spec.seed, 0));
  rng::Engine noise_g(rng::derive_seed(spec.seed, 1));

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (!spec.uniform_weights) {
    for (double& v : w) v = rng::uniform(g, 0.2, 1.8);
    w = normalized(std::move(w));
  }

  std::vector<std::size_t> noisy;
  if (spec.uniform_weights) {
    const auto k = static_cast<std::size_t>(std::llround(spec.noise * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::shuffle(std::span(order), noise_g);
    noisy.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    noisy = greedy_noisy(w, spec.noise, noise_g);
  }
  std::vector<bool> is_noisy(n, false);
  for (std::size_t i : noisy) is_noisy[i] = true;

  LabelSpace labels(c);
  std::vector<SupportPoint> pts(n);
  std::vector<LabelSet> sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].weight = w[i];
    for (std::size_t k = 0; k < spec.feature_dim; ++k) pts[i].features.push_back(rng::normal(g));
    if (spec.bias) pts[i].features.push_back(1.0);
    sets[i] = random_proper_subset(g, c);
    pts[i].oracle = pick_from(g, is_noisy[i] ? sets[i].complement(c) : sets[i], c);
  }
  FiniteDistribution dist(labels, std::move(pts), ConstraintMap(labels, std::move(sets)));
  GeneratedDistribution out{std::move(dist), 0.0, std::nullopt};
  out.noise_rate = oracle_noise_rate(out.dist);
  if (std::abs(out.noise_rate - spec.noise) > 1e-12) {
    out.warning = "noise target " + tabular::format_real(spec.noise) + " not reachable; nearest is " +
                  tabular::format_real(out.noise_rate);
  }
  return out;
}

ProofConstruction make_prop32_tightness(const Prop32Params& p) {
  const double f0[3] = {p.a, 1.0 - p.a - p.b, p.b};
  const double fi[3] = {p.a - p.eps1, 1.0 - p.a - p.b + p.eps1 + p.eps2, p.b - p.eps2};
  if (!(p.eps1 > 0.0 && p.eps2 > 0.0 && p.rho > 0.0)) throw ConstructionError("eps1, eps2 and rho must be positive");
  if (!(p.eps1 < p.rho * p.eps2)) throw ConstructionError("the construction needs eps1 < rho * eps2");
  for (int j = 0; j < 3; ++j) {
    if (!(f0[j] > 0.0 && f0[j] < 1.0 && fi[j] > 0.0 && fi[j] < 1.0)) {
      throw ConstructionError("every probability must lie in (0, 1)");
    }
  }
  LabelSpace labels(3);
  FiniteDistribution dist(labels, {SupportPoint{1.0, 0, {}}}, ConstraintMap(labels, {LabelSet::of({0, 1})}));
  auto table = [](const double* pr) {
    return ScoreTable(3, {std::log(pr[0]), std::log(pr[1]), std::log(pr[2])});
  };
  ProofConstruction out{"prop32_tightness", dist, {table(f0), table(fi)}, {"f_0", "f_inf"},
                        "upper deviation bound R(f_rho) <= R(f_0) + rho (V(f_0) - V(f_inf)), gap rho eps2 - eps1",
                        {}};
  const double l0 = evaluate_regularized_objective(out.scorers[0], dist, p.rho, LossKind::ell1);
  const double li = evaluate_regularized_objective(out.scorers[1], dist, p.rho, LossKind::ell1);
  self_check(li < l0, "the regularized objective must prefer f_inf");
  out.metadata = {{"objective_f0", l0}, {"objective_finf", li}, {"tightness_gap", p.rho * p.eps2 - p.eps1}};
  return out;
}

ProofConstruction make_lemma33_baseline(const FiniteDistribution& dist, double t) {
  if (!(t >= 0.0)) throw ConstructionError("baseline scale t must be nonnegative");
  ProofConstruction out{"lemma33_baseline", dist, {baseline_scorer(dist, t)}, {"f_t"},
                        "violation bound V(f_rho) <= 1/rho + u with u = V(f_t)", {}};
  const double v = population_metrics(dist, out.scorers[0]).violation_l1;
  const double cap = static_cast<double>(dist.labels().count() - 1) * std::exp(-t);
  self_check(v <= cap, "baseline violation exceeds (c-1) e^-t");
  out.metadata = {{"t", t}, {"violation", v}, {"noise_rate", oracle_noise_rate(dist)}};
  return out;
}

ProofConstruction make_thm52_grid(const Thm52Params& p) {
  if (p.points == 0) throw ConstructionError("need at least one point");
  if (!(p.min_violation > 0.0 && p.min_violation < 1.0)) throw ConstructionError("min_violation must lie in (0, 1)");
  if (!(p.noise >= p.min_violation && p.noise < 1.0)) throw ConstructionError("need min_violation <= noise < 1");
  const double n = static_cast<double>(p.points);
  const auto noisy = static_cast<std::size_t>(std::llround(p.noise * n));
  if (std::abs(static_cast<double>(noisy) - p.noise * n) > 1e-9) {
    throw ConstructionError("noise must be a multiple of 1/points");
  }
  LabelSpace labels(3);
  std::vector<SupportPoint> pts(p.points);
  for (std::size_t i = 0; i < p.points; ++i) {
    pts[i].weight = 1.0 / n;
    pts[i].oracle = i < noisy ? 2 : i % 2;
  }
  FiniteDistribution dist(labels, std::move(pts), ConstraintMap::uniform(labels, p.points, LabelSet::of({0, 1})));

  ProofConstruction out{"thm52_grid", dist, {}, {}, "post-training CCM cannot help f_rho for rho >= 1/(V_ora - V(f_inf))",
                        {}};
  std::vector<double> vs;
  for (double v = p.min_violation; v < 0.95; v += 0.05) vs.push_back(v);
  vs.push_back(0.95);
  for (double v : vs) {
    for (double q : {0.2, 0.5, 0.8, 0.95}) {
      const double pr[3] = {(1.0 - v) * q, (1.0 - v) * (1.0 - q), v};
      std::vector<double> s;
      for (std::size_t i = 0; i < p.points; ++i) {
        for (double x : pr) s.push_back(std::log(x));
      }
      out.scorers.emplace_back(ScoreTable(3, std::move(s)));
      out.scorer_names.push_back("v=" + tabular::format_real(v) + ",q=" + tabular::format_real(q));
    }
  }
  const double noise = oracle_noise_rate(dist);
  double vmin = 1.0;
  for (const Scorer& f : out.scorers) vmin = std::min(vmin, population_metrics(dist, f).violation_l1);
  self_check(std::abs(noise - p.noise) < 1e-12, "noise rate differs from its target");
  self_check(std::abs(vmin - p.min_violation) < 1e-12, "grid minimum violation differs from its target");
  out.metadata = {{"noise_rate", noise}, {"min_violation", vmin}};
  return out;
}

ProofConstruction make_proof_construction(const std::string& name, const std::vector<double>& params) {
  auto need = [&](std::size_t k) {
    if (params.size() != k) {
      throw ConstructionError(name + " takes " + std::to_string(k) + " parameters, got " + std::to_string(params.size()));
    }
  };
  if (name == "prop32_tightness") {
    need(5);
    return make_prop32_tightness({params[0], params[1], params[2], params[3], params[4]});
  }
  if (name == "lemma33_baseline") {
    need(1);
    LabelSpace labels(3);
    std::vector<SupportPoint> pts;
    std::vector<LabelSet> sets;
    const LabelSet choices[] = {LabelSet::of({0}), LabelSet::of({0, 1}), LabelSet::of({1, 2}), LabelSet::of({2}),
                                LabelSet::of({0, 2})};
    const std::size_t oracle[] = {0, 1, 2, 2, 0};
    for (int i = 0; i < 5; ++i) {
      pts.push_back({0.2, oracle[i], {}});
      sets.push_back(choices[i]);
    }
    FiniteDistribution dist(labels, std::move(pts), ConstraintMap(labels, std::move(sets)));
    return make_lemma33_baseline(dist, params[0]);
  }
  if (name == "thm52_grid") {
    if (params.size() != 2 && params.size() != 3) throw ConstructionError("thm52_grid takes 2 or 3 parameters");
    Thm52Params p{params[0], params[1], 10};
    if (params.size() == 3) p.points = static_cast<std::size_t>(params[2]);
    return make_thm52_grid(p);
  }
  throw std::invalid_argument("unknown construction '" + name + "'");
}

namespace {

struct TruncatedMoments {
  std::vector<double> mean;
  double sigma2 = 0.0;
  double acceptance = 0.0;
};

/// Draws until `count` points land in the ball (or the budget runs out).
std::vector<std::vector<double>> draw_in_ball(rng::Engine& g, const std::vector<double>& center, double scale,
                                              double radius, std::size_t count, std::size_t& tries) {
  std::vector<std::vector<double>> out;
  const std::size_t budget = count * 200;
  tries = 0;
  std::vector<double> x(center.size());
  while (out.size() < count && tries < budget) {
    ++tries;
    double n2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = center[k] + scale * rng::normal(g);
      n2 += x[k] * x[k];
    }
    if (n2 <= radius * radius) out.push_back(x);
  }
  return out;
}

TruncatedMoments moments_of(const std::vector<std::vector<double>>& xs, std::size_t p) {
  TruncatedMoments t;
  t.mean.assign(p, 0.0);
  const double n = static_cast<double>(xs.size());
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < p; ++k) t.mean[k] += x[k] / n;
  }
  double var = 0.0;
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < p; ++k) var += (x[k] - t.mean[k]) * (x[k] - t.mean[k]);
  }
  t.sigma2 = var / (n * static_cast<double>(p));
  return t;
}

bool moments_close(const TruncatedMoments& t, const std::vector<double>& alpha, double sigma2) {
  double err = 0.0, an = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    err += (t.mean[k] - alpha[k]) * (t.mean[k] - alpha[k]);
    an += alpha[k] * alpha[k];
  }
  // A zero mean is judged against the spread instead of its own norm.
  const double mean_scale = an > 0.0 ? std::sqrt(an) : std::sqrt(sigma2);
  return std::sqrt(err) <= 0.05 * mean_scale && std::abs(t.sigma2 - sigma2) <= 0.05 * sigma2;
}

}  // namespace

GaussianFeatures make_gaussian_features(const GaussianSpec& spec) {
  if (spec.labels < 2 || spec.dim == 0 || spec.m == 0) throw std::invalid_argument("bad Gaussian feature spec");
  if (!(spec.sigma2 >= 0.0) || !(spec.radius > 0.0)) throw std::invalid_argument("need sigma2 >= 0 and radius > 0");
  const std::size_t c = spec.labels, p = spec.dim;
  std::vector<double> alpha = spec.mean.empty() ? std::vector<double>(p, 0.0) : spec.mean;
  if (alpha.size() != p) throw std::invalid_argument("mean has the wrong dimension");
  double an = 0.0;
  for (double a : alpha) an += a * a;
  an = std::sqrt(an);
  if (an > spec.radius) throw FeasibilityError("mean lies outside the ball");

  rng::Engine g(rng::derive_seed(spec.seed, 0));
  std::vector<double> center = alpha;
  double scale = std::sqrt(spec.sigma2);
  double acceptance = 1.0;
  std::vector<std::vector<double>> xs;
  if (spec.sigma2 == 0.0) {
    xs.assign(spec.m, alpha);
  } else {
    constexpr std::size_t kPilot = 20000;
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      std::size_t tries = 0;
      const auto pilot = draw_in_ball(g, center, scale, spec.radius, kPilot, tries);
      acceptance = static_cast<double>(pilot.size()) / static_cast<double>(std::max<std::size_t>(tries, 1));
      if (pilot.size() < kPilot || acceptance < 0.01) {
        throw FeasibilityError("rejection acceptance fell below 1%");
      }
      const TruncatedMoments t = moments_of(pilot, p);
      if (moments_close(t, alpha, spec.sigma2)) {
        ok = true;
        break;
      }
      for (std::size_t k = 0; k < p; ++k) center[k] += alpha[k] - t.mean[k];
      scale *= std::sqrt(spec.sigma2 / std::max(t.sigma2, 1e-300));
      if (!std::isfinite(scale) || scale > 1e3 * spec.radius) throw FeasibilityError("moment targets unreachable");
    }
    if (!ok) throw FeasibilityError("truncated moments stay more than 5% from their targets");
    std::size_t tries = 0;
    xs = draw_in_ball(g, center, scale, spec.radius, spec.m, tries);
    if (xs.size() < spec.m) throw FeasibilityError("rejection acceptance fell below 1%");
  }

  rng::Engine wg(rng::derive_seed(spec.seed, 1));
  std::vector<double> w(c * p, 0.0);
  for (std::size_t j = 0; j + 1 < c; ++j) {
    double nrm = 0.0;
    for (std::size_t k = 0; k < p; ++k) nrm += (w[j * p + k] = rng::normal(wg)) * w[j * p + k];
    nrm = std::sqrt(nrm);
    for (std::size_t k = 0; k < p; ++k) w[j * p + k] *= spec.separation / (nrm > 0.0 ? nrm : 1.0);
  }
  for (std::size_t j = 0; j + 1 < c; ++j) {
    for (std::size_t k = 0; k < p; ++k) w[(c - 1) * p + k] += w[j * p + k] / static_cast<double>(c - 1);
  }
  LinearScorer planted(c, p, w);

  LabelSpace labels(c);
  std::vector<SupportPoint> pts;
  pts.reserve(spec.m);
  std::vector<double> sc(c);
  for (auto& x : xs) {
    planted.scores(x, sc);
    const std::size_t oracle = argmax(std::span<const double>(sc).first(c - 1));
    pts.push_back({1.0 / static_cast<double>(spec.m), oracle, std::move(x)});
  }
  const LabelSet admissible = LabelSet::all(c - 1);
  FiniteDistribution dist(labels, std::move(pts), ConstraintMap::uniform(labels, spec.m, admissible));
  if (oracle_noise_rate(dist) != 0.0) throw ConstructionError("planted oracle picked the excluded label");

  std::vector<std::vector<double>> feats;
  for (const auto& pt : dist.points()) feats.push_back(pt.features);
  const TruncatedMoments final_m = moments_of(feats, p);
  return GaussianFeatures{std::move(dist), std::move(planted), acceptance, final_m.mean, final_m.sigma2};
}

}  // namespace conlab
