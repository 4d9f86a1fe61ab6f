#pragma once

// Shared generators and high-precision reference evaluations for the tests.
// The references recompute everything from raw scores with 50-digit
// arithmetic and never call into the library's numeric code.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "conlab/constraint.hpp"
#include "conlab/rng.hpp"
#include "conlab/scoring.hpp"
#include "conlab/synthgen.hpp"

namespace testing_support {

using Real = boost::multiprecision::cpp_bin_float_50;
using conlab::FiniteDistribution;
using conlab::LabelSet;
using conlab::ScoreTable;

inline double to_double(const Real& r) { return r.convert_to<double>(); }

/// Random distribution with 2..max_labels labels and 2..max_points points;
/// `noise` < 0 picks a random positive multiple of 1/points.
inline FiniteDistribution random_distribution(conlab::rng::Engine& g, std::size_t max_labels, std::size_t max_points,
                                              double noise, std::size_t feature_dim = 0) {
  conlab::FiniteSpec spec;
  spec.labels = 2 + conlab::rng::uniform_index(g, max_labels - 1);
  spec.points = 2 + conlab::rng::uniform_index(g, max_points - 1);
  spec.feature_dim = feature_dim;
  if (noise < 0.0) {
    const std::size_t k = 1 + conlab::rng::uniform_index(g, spec.points / 2);
    spec.noise = static_cast<double>(k) / static_cast<double>(spec.points);
  } else {
    spec.noise = noise;
  }
  spec.uniform_weights = conlab::rng::uniform01(g) < 0.5;
  spec.seed = g();
  return conlab::make_finite(spec).dist;
}

inline ScoreTable random_table(const FiniteDistribution& dist, conlab::rng::Engine& g, double scale) {
  const std::size_t c = dist.labels().count();
  std::vector<double> s(dist.size() * c);
  for (double& v : s) v = scale * conlab::rng::normal(g);
  return ScoreTable(c, std::move(s));
}

/// P_{f^mu}(.|x) in 50 digits; mu = +inf restricts to the admissible set.
inline std::vector<Real> ccm_probs(const std::vector<double>& scores, LabelSet adm, double mu) {
  const bool strict = std::isinf(mu);
  std::vector<Real> e(scores.size());
  Real z = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (adm.contains(j)) {
      e[j] = exp(Real(scores[j]));
    } else {
      e[j] = strict ? Real(0) : exp(Real(scores[j]) - Real(mu));
    }
    z += e[j];
  }
  for (auto& v : e) v /= z;
  return e;
}

inline std::vector<double> row(const ScoreTable& t, std::size_t i) {
  auto r = t.row(i);
  return {r.begin(), r.end()};
}

struct Population {
  Real risk_l1 = 0, risk_ce = 0, violation_l1 = 0, violation_ce = 0, margin = 0;
};

/// Exact population quantities of f^mu in 50 digits. Cross-entropy of a
/// zero-probability gold label is clamped at `cap`.
inline Population population(const FiniteDistribution& dist, const ScoreTable& t, double mu, double cap = 1e4) {
  Population p;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const auto s = row(t, i);
    const LabelSet adm = dist.admissible(i);
    const auto q = ccm_probs(s, adm, mu);
    const std::size_t gold = dist.point(i).oracle;
    const Real w = dist.point(i).weight;
    p.risk_l1 += w * (1 - q[gold]);
    p.risk_ce += w * (q[gold] > 0 ? Real(-log(q[gold])) : Real(cap));
    Real in = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (adm.contains(j)) in += q[j];
    }
    p.violation_l1 += w * (1 - in);
    p.violation_ce += w * Real(-log(in));
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double f = adm.contains(j) ? s[j] : (std::isinf(mu) ? -std::numeric_limits<double>::infinity()
                                                                 : s[j] - mu);
      top = std::max(top, f);
    }
    if (std::isinf(mu) && !adm.contains(gold)) {
      p.margin += w * Real(cap);
    } else {
      p.margin += w * Real(top - (adm.contains(gold) ? s[gold] : s[gold] - mu));
    }
  }
  return p;
}

inline Real noise_rate(const FiniteDistribution& dist) {
  Real v = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (!dist.admissible(i).contains(dist.point(i).oracle)) v += dist.point(i).weight;
  }
  return v;
}

/// Bisection root of a continuous function with a sign change on [lo, hi].
template <class Fn>
double bisect(Fn&& fn, double lo, double hi, int iters = 200) {
  double flo = fn(lo);
  for (int k = 0; k < iters; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double fm = fn(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace testing_support
