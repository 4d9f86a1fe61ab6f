#include "conlab/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "conlab/errors.hpp"
#include "conlab/kernels.hpp"
#include "conlab/losses.hpp"
#include "conlab/rng.hpp"
#include "conlab/tabular.hpp"

namespace conlab {
namespace {

using Matrix = std::vector<double>;  // row-major

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

ComplexityEstimate summarize(std::vector<double> values, SupSolver solver) {
  ComplexityEstimate e;
  e.num_draws = values.size();
  e.sup_solver = solver;
  const double n = static_cast<double>(values.size());
  e.mean = kernels::pairwise_sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - e.mean) * (values[i] - e.mean);
    e.std_error = std::sqrt(kernels::pairwise_sum(sq) / (n - 1.0) / n);
  }
  e.per_draw_values = std::move(values);
  return e;
}

Matrix draw_eps(rng::Engine& g, std::size_t m, std::size_t c) {
  Matrix eps(m * c);
  for (double& e : eps) e = rng::rademacher(g);
  return eps;
}

/// Per-(i, y) offsets -mu v(x_i, y); zeros without a shift.
Matrix shift_offsets(std::span<const InstanceView> sample, std::size_t c, const std::optional<CcmShift>& shift) {
  Matrix o(sample.size() * c, 0.0);
  if (!shift || shift->mu.is_zero()) return o;
  if (shift->mu.is_infinite()) throw std::invalid_argument("complexity shift needs a finite mu");
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const LabelSet adm = shift->cmap->admissible(sample[i].id);
    for (std::size_t y = 0; y < c; ++y) {
      if (!adm.contains(y)) o[i * c + y] = -shift->mu.value();
    }
  }
  return o;
}

/// Xi_j = sum_i eps_ij x_i, a labels x dim matrix.
Matrix xi_matrix(std::span<const double> eps, std::span<const InstanceView> sample, std::size_t c, std::size_t p) {
  Matrix xi(c * p, 0.0);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double e = eps[i * c + j];
      for (std::size_t k = 0; k < p; ++k) xi[j * p + k] += e * sample[i].features[k];
    }
  }
  return xi;
}

// ---------------------------------------------------------------------------
// Linear ball, optionally capped.

class BallSolver {
 public:
  BallSolver(const LinearBallFamily& fam) : fam_(fam), radius_(std::sqrt(fam.budget)) {
    if (fam.violation_cap) {
      if (!fam.population) throw std::invalid_argument("a violation cap needs a population");
      if (fam.population->feature_dim() != fam.dim) throw std::invalid_argument("population dimension mismatch");
      const FiniteDistribution& d = *fam.population;
      for (std::size_t i = 0; i < d.size(); ++i) {
        weights_.push_back(d.point(i).weight);
        sets_.push_back(d.admissible(i));
        features_.insert(features_.end(), d.point(i).features.begin(), d.point(i).features.end());
      }
      anchor_ = make_anchor();
      if (violation(anchor_) > *fam.violation_cap) {
        throw FeasibilityError("no weight in the ball meets the violation cap at the anchor");
      }
    }
  }

  /// Maximizer of <W, xi> over the (capped) ball.
  Matrix solve(std::span<const double> xi, rng::Engine& g) const {
    const std::size_t n = xi.size();
    const double xn = norm(xi);
    Matrix best(n, 0.0);
    if (xn == 0.0) return fam_.violation_cap ? anchor_ : best;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(fam_.restarts, 1); ++r) {
      Matrix w(n);
      if (r == 0) {
        for (std::size_t k = 0; k < n; ++k) w[k] = radius_ * xi[k] / xn;
      } else {
        for (double& v : w) v = rng::normal(g);
        const double u = std::pow(rng::uniform01(g), 1.0 / static_cast<double>(n));
        const double wn = norm(w);
        for (double& v : w) v *= radius_ * u / (wn > 0 ? wn : 1.0);
      }
      w = repair(std::move(w));
      ascend(w, xi);
      const double val = dot(w, xi);
      if (val > best_val) {
        best_val = val;
        best = w;
      }
    }
    return best;
  }

 private:
  Matrix make_anchor() const {
    const Moments mom = feature_moments(*fam_.population);
    std::vector<double> dir(fam_.dim, 0.0);
    const double an = norm(mom.mean);
    if (an > 0.0) {
      for (std::size_t k = 0; k < fam_.dim; ++k) dir[k] = mom.mean[k] / an;
    } else {
      dir[0] = 1.0;
    }
    // Every excluded label points against the mean, admissible ones along it.
    const LabelSet adm = fam_.population->admissible(0);
    const std::size_t c = fam_.labels;
    const double excluded = static_cast<double>(c - adm.size());
    const double a = radius_ * std::sqrt(0.2 / static_cast<double>(adm.size()));
    const double b = radius_ * std::sqrt(0.8 / std::max(excluded, 1.0));
    Matrix w(c * fam_.dim, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
      const double s = adm.contains(j) ? a : -b;
      for (std::size_t k = 0; k < fam_.dim; ++k) w[j * fam_.dim + k] = s * dir[k] * (1.0 - 1e-12);
    }
    return w;
  }

  // Population violation and its gradient, inlined over flat features since
  // the ascent evaluates them thousands of times per draw.
  double violation(std::span<const double> w) const {
    std::vector<double> sc(fam_.labels);
    double v = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      v += weights_[i] * outside_mass(w, i, sc);
    }
    return v;
  }

  Matrix violation_gradient(std::span<const double> w) const {
    const std::size_t c = fam_.labels, p = fam_.dim;
    std::vector<double> sc(c);
    Matrix out(w.size(), 0.0);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const double q = outside_mass(w, i, sc);  // sc now holds probabilities
      const double* x = features_.data() + i * p;
      for (std::size_t j = 0; j < c; ++j) {
        const double g = weights_[i] * sc[j] * ((sets_[i].contains(j) ? 0.0 : 1.0) - q);
        for (std::size_t k = 0; k < p; ++k) out[j * p + k] += g * x[k];
      }
    }
    return out;
  }

  /// P(not C) at population point i; leaves the softmax in `prob`.
  double outside_mass(std::span<const double> w, std::size_t i, std::vector<double>& prob) const {
    const std::size_t c = fam_.labels, p = fam_.dim;
    const double* x = features_.data() + i * p;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += w[j * p + k] * x[k];
      prob[j] = s;
      top = std::max(top, s);
    }
    double total = 0.0, out = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      prob[j] = std::exp(prob[j] - top);
      total += prob[j];
      if (!sets_[i].contains(j)) out += prob[j];
    }
    for (double& q : prob) q /= total;
    return out / total;
  }

  void project_ball(Matrix& w) const {
    const double n = norm(w);
    if (n > radius_) {
      const double s = radius_ / n * (1.0 - 1e-15);
      for (double& v : w) v *= s;
    }
  }

  /// Feasible point on the segment from the anchor to w, as far toward w as
  /// bisection finds.
  Matrix repair(Matrix w) const {
    project_ball(w);
    if (!fam_.violation_cap || violation(w) <= *fam_.violation_cap) return w;
    double lo = 0.0, hi = 1.0;
    Matrix probe(w.size());
    for (int it = 0; it < 14; ++it) {
      const double mid = 0.5 * (lo + hi);
      for (std::size_t k = 0; k < w.size(); ++k) probe[k] = anchor_[k] + mid * (w[k] - anchor_[k]);
      (violation(probe) <= *fam_.violation_cap ? lo : hi) = mid;
    }
    for (std::size_t k = 0; k < w.size(); ++k) probe[k] = anchor_[k] + lo * (w[k] - anchor_[k]);
    return probe;
  }

  /// Feasible-direction ascent: the step direction drops the component of xi
  /// that would raise an active violation constraint.
  void ascend(Matrix& w, std::span<const double> xi) const {
    double step = radius_ / norm(xi);
    double val = dot(w, xi);
    for (std::size_t it = 0; it < fam_.max_iters; ++it) {
      Matrix d(xi.begin(), xi.end());
      if (fam_.violation_cap && violation(w) > *fam_.violation_cap * (1.0 - 1e-3)) {
        const Matrix gv = violation_gradient(w);
        const double gg = dot(gv, gv);
        const double gx = dot(gv, xi);
        if (gg > 0.0 && gx > 0.0) {
          for (std::size_t k = 0; k < d.size(); ++k) d[k] -= gx / gg * gv[k];
        }
      }
      bool moved = false;
      for (int h = 0; h < 30 && !moved; ++h, step *= 0.5) {
        Matrix cand(w.size());
        for (std::size_t k = 0; k < w.size(); ++k) cand[k] = w[k] + step * d[k];
        cand = repair(std::move(cand));
        const double cv = dot(cand, xi);
        if (cv > val + 1e-13 * (1.0 + std::abs(val))) {
          w = std::move(cand);
          val = cv;
          moved = true;
        }
      }
      if (!moved) break;
      step *= 4.0;
    }
  }

  const LinearBallFamily& fam_;
  double radius_;
  Matrix anchor_;
  std::vector<double> weights_;
  std::vector<LabelSet> sets_;
  Matrix features_;
};

/// sum_iy eps_iy (f_w^mu(x_i, y)), evaluated through the CCM scores.
double evaluate_linear(std::span<const double> w, const LinearBallFamily& fam, std::span<const InstanceView> sample,
                       std::span<const double> eps, std::span<const double> offsets) {
  LinearScorer s(fam.labels, fam.dim, Matrix(w.begin(), w.end()));
  std::vector<double> sc(fam.labels);
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    s.scores(sample[i].features, sc);
    for (std::size_t y = 0; y < fam.labels; ++y) total += eps[i * fam.labels + y] * (sc[y] + offsets[i * fam.labels + y]);
  }
  return total;
}

SupSolver resolve(const FamilyDescriptor& family, SupSolver requested) {
  if (std::holds_alternative<EnumeratedFamily>(family)) {
    if (requested != SupSolver::automatic && requested != SupSolver::enumeration) {
      throw std::invalid_argument("enumerated families use the enumeration solver");
    }
    return SupSolver::enumeration;
  }
  const auto& lin = std::get<LinearBallFamily>(family);
  if (requested == SupSolver::enumeration) throw std::invalid_argument("a linear ball cannot be enumerated");
  if (requested == SupSolver::closed_form && lin.violation_cap) {
    throw std::invalid_argument("the capped linear family has no closed-form supremum");
  }
  if (requested == SupSolver::automatic) return lin.violation_cap ? SupSolver::projected_gradient : SupSolver::closed_form;
  return requested;
}

/// Antithetic per-draw value for one eps matrix and one sample.
class DrawEvaluator {
 public:
  DrawEvaluator(const FamilyDescriptor& family, SupSolver solver) : family_(family), solver_(solver) {
    if (const auto* lin = std::get_if<LinearBallFamily>(&family)) {
      if (solver == SupSolver::projected_gradient) ball_.emplace(*lin);
    }
  }

  std::size_t labels() const {
    if (const auto* e = std::get_if<EnumeratedFamily>(&family_)) return e->scorers.front().labels();
    return std::get<LinearBallFamily>(family_).labels;
  }

  /// Suprema for +eps and -eps.
  std::pair<double, double> suprema(std::span<const InstanceView> sample, std::span<const double> eps,
                                    std::span<const double> offsets, rng::Engine& g) const {
    const std::size_t c = labels();
    if (const auto* e = std::get_if<EnumeratedFamily>(&family_)) {
      double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
      std::vector<double> sc(c);
      for (const Scorer& f : e->scorers) {
        double a = 0.0;
        for (std::size_t i = 0; i < sample.size(); ++i) {
          f.scores(sample[i], sc);
          for (std::size_t y = 0; y < c; ++y) a += eps[i * c + y] * (sc[y] + offsets[i * c + y]);
        }
        hi = std::max(hi, a);
        lo = std::min(lo, a);
      }
      return {hi, -lo};
    }
    const auto& lin = std::get<LinearBallFamily>(family_);
    const Matrix xi = xi_matrix(eps, sample, c, lin.dim);
    if (solver_ == SupSolver::closed_form) {
      const double r = std::sqrt(lin.budget) * norm(xi);
      const double shift = dot(eps, offsets);
      return {r + shift, r - shift};
    }
    Matrix neg_eps(eps.begin(), eps.end());
    for (double& v : neg_eps) v = -v;
    Matrix neg_xi(xi);
    for (double& v : neg_xi) v = -v;
    const Matrix wp = ball_->solve(xi, g);
    const Matrix wn = ball_->solve(neg_xi, g);
    return {evaluate_linear(wp, lin, sample, eps, offsets), evaluate_linear(wn, lin, sample, neg_eps, offsets)};
  }

 private:
  const FamilyDescriptor& family_;
  SupSolver solver_;
  std::optional<BallSolver> ball_;
};

void check_family(const FamilyDescriptor& family) {
  if (const auto* e = std::get_if<EnumeratedFamily>(&family)) {
    if (e->scorers.empty()) throw std::invalid_argument("enumerated family is empty");
  }
}

}  // namespace

std::string to_string(SupSolver s) {
  switch (s) {
    case SupSolver::automatic: return "automatic";
    case SupSolver::enumeration: return "enumeration";
    case SupSolver::closed_form: return "closed_form";
    case SupSolver::projected_gradient: return "projected_gradient";
  }
  return "?";
}

ComplexityEstimate empirical_rademacher(const FamilyDescriptor& family, std::span<const InstanceView> sample,
                                        std::size_t num_draws, std::uint64_t seed, SupSolver solver,
                                        std::optional<CcmShift> shift) {
  check_family(family);
  if (sample.empty()) throw std::invalid_argument("Rademacher estimate needs a nonempty sample");
  if (num_draws == 0) throw std::invalid_argument("num_draws must be positive");
  const SupSolver used = resolve(family, solver);
  const DrawEvaluator eval(family, used);
  const std::size_t c = eval.labels();
  const Matrix offsets = shift_offsets(sample, c, shift);
  const double m = static_cast<double>(sample.size());
  std::vector<double> values(num_draws);
  kernels::map_parallel(
      num_draws,
      [&](std::size_t d) {
        rng::Engine g(rng::derive_seed(seed, d));
        const Matrix eps = draw_eps(g, sample.size(), c);
        const auto [a, b] = eval.suprema(sample, eps, offsets, g);
        values[d] = (a + b) / (2.0 * m);
      },
      1);
  return summarize(std::move(values), used);
}

ComplexityEstimate expected_rademacher(const FamilyDescriptor& family, const FiniteDistribution& dist, std::size_t m,
                                       std::size_t num_draws, std::uint64_t seed, SupSolver solver) {
  check_family(family);
  if (m == 0) throw std::invalid_argument("sample size must be positive");
  if (num_draws == 0) throw std::invalid_argument("num_draws must be positive");
  const SupSolver used = resolve(family, solver);
  const DrawEvaluator eval(family, used);
  const std::size_t c = eval.labels();
  const Matrix offsets(m * c, 0.0);
  std::vector<double> values(num_draws);
  kernels::map_parallel(
      num_draws,
      [&](std::size_t d) {
        const std::uint64_t s = rng::derive_seed(seed, d);
        const auto ids = sample_ids(dist, m, rng::derive_seed(s, 0));
        std::vector<InstanceView> sample;
        sample.reserve(m);
        for (std::size_t id : ids) sample.push_back(dist.instance(id));
        rng::Engine g(rng::derive_seed(s, 1));
        const Matrix eps = draw_eps(g, m, c);
        const auto [a, b] = eval.suprema(sample, eps, offsets, g);
        values[d] = (a + b) / (2.0 * static_cast<double>(m));
      },
      1);
  return summarize(std::move(values), used);
}

CcmIdentityReport ccm_complexity_identity_check(const FamilyDescriptor& family, const ConstraintMap& cmap, Mu mu,
                                                std::span<const InstanceView> sample, std::size_t num_draws,
                                                std::uint64_t seed) {
  check_family(family);
  if (mu.is_infinite()) throw std::invalid_argument("the complexity identity needs a finite mu");
  if (sample.empty() || num_draws == 0) throw std::invalid_argument("identity check needs a sample and draws");
  const bool enumerated = std::holds_alternative<EnumeratedFamily>(family);
  const SupSolver base_solver = enumerated ? SupSolver::enumeration : SupSolver::closed_form;
  const SupSolver shifted_solver = enumerated ? SupSolver::enumeration : SupSolver::projected_gradient;
  const DrawEvaluator base_eval(family, base_solver);
  const DrawEvaluator shifted_eval(family, shifted_solver);
  const std::size_t c = base_eval.labels();
  const Matrix zero(sample.size() * c, 0.0);
  const Matrix offsets = shift_offsets(sample, c, CcmShift{&cmap, mu});
  const double m = static_cast<double>(sample.size());

  std::vector<double> base(num_draws), shifted(num_draws), gap(num_draws);
  kernels::map_parallel(
      num_draws,
      [&](std::size_t d) {
        rng::Engine g(rng::derive_seed(seed, d));
        const Matrix eps = draw_eps(g, sample.size(), c);
        const auto [a, b] = base_eval.suprema(sample, eps, zero, g);
        const auto [as, bs] = shifted_eval.suprema(sample, eps, offsets, g);
        // sum_iy eps_iy (-mu v) for +eps; the -eps draw has the opposite sign.
        const double k = dot(eps, offsets);
        gap[d] = std::max(std::abs(as - (a + k)), std::abs(bs - (b - k)));
        base[d] = (a + b) / (2.0 * m);
        shifted[d] = (as + bs) / (2.0 * m);
      },
      1);
  CcmIdentityReport r;
  r.max_abs_discrepancy = *std::max_element(gap.begin(), gap.end());
  r.base = summarize(std::move(base), base_solver);
  r.shifted = summarize(std::move(shifted), shifted_solver);
  r.mean_difference = r.shifted.mean - r.base.mean;
  r.pooled_std_error = std::hypot(r.base.std_error, r.shifted.std_error);
  return r;
}

Moments feature_moments(const FiniteDistribution& dist) {
  const std::size_t p = dist.feature_dim();
  Moments mom;
  mom.mean.assign(p, 0.0);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const auto& pt = dist.point(i);
    for (std::size_t k = 0; k < p; ++k) mom.mean[k] += pt.weight * pt.features[k];
    mom.max_norm = std::max(mom.max_norm, norm(pt.features));
  }
  double var = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const auto& pt = dist.point(i);
    for (std::size_t k = 0; k < p; ++k) var += pt.weight * (pt.features[k] - mom.mean[k]) * (pt.features[k] - mom.mean[k]);
  }
  mom.sigma2 = p ? var / static_cast<double>(p) : 0.0;
  mom.mean_sq_norm = dot(mom.mean, mom.mean);
  return mom;
}

double capped_family_bound(std::size_t c, std::size_t m, double sigma2, double alpha_sq) {
  const double cm = static_cast<double>(c), mm = static_cast<double>(m);
  return 0.5 * (std::sqrt(cm / mm) + std::sqrt(std::max(cm - sigma2 - alpha_sq, 0.0) / mm));
}

namespace {

/// min over nu >= 0 of nu L + sqrt(rest + |xi_c - nu alpha|^2), L < 0.
double dual_value(std::span<const double> xi, std::size_t c, std::size_t p, LabelSet excluded,
                  std::span<const double> alpha, double log_cap) {
  double rest = 0.0;
  std::vector<double> xc(p, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    auto row = xi.subspan(j * p, p);
    if (excluded.contains(j)) {
      for (std::size_t k = 0; k < p; ++k) xc[k] += row[k];
    } else {
      rest += dot(row, row);
    }
  }
  const double aa = dot(alpha, alpha);
  const double xa = dot(xc, alpha);
  const double xx = dot(xc, xc);
  auto value = [&](double nu) { return nu * log_cap + std::sqrt(std::max(rest + xx - 2.0 * nu * xa + nu * nu * aa, 0.0)); };
  auto slope = [&](double nu) {
    const double r = std::sqrt(std::max(rest + xx - 2.0 * nu * xa + nu * nu * aa, 1e-300));
    return log_cap + (nu * aa - xa) / r;
  };
  if (slope(0.0) >= 0.0) return value(0.0);
  if (std::sqrt(aa) + log_cap <= 0.0) return -std::numeric_limits<double>::infinity();
  double hi = 1.0;
  while (slope(hi) < 0.0) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  return value(0.5 * (lo + hi));
}

}  // namespace

SubsetComplexityReport constrained_subset_complexity_bound(const FiniteDistribution& dist, double t, std::size_t m,
                                                           std::size_t num_draws, std::uint64_t seed) {
  const std::size_t c = dist.labels().count();
  const std::size_t p = dist.feature_dim();
  if (!(t < 1.0 / static_cast<double>(c + 2))) throw PreconditionError("the violation cap needs t < 1/(c+2)", t);
  if (!(t > 0.0)) throw PreconditionError("the violation cap must be positive", t);
  const LabelSet adm = dist.admissible(0);
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist.admissible(i) != adm) throw std::invalid_argument("the capped family needs one admissible set everywhere");
  }
  if (adm.size() + 1 != c) throw std::invalid_argument("the constraint must remove exactly one label");
  const Moments mom = feature_moments(dist);

  LinearBallFamily capped{c, p, 1.0, t, &dist};
  LinearBallFamily open{c, p, 1.0, std::nullopt, nullptr};
  SubsetComplexityReport r;
  r.t = t;
  r.m = m;
  r.analytic_bound = capped_family_bound(c, m, mom.sigma2, mom.mean_sq_norm);
  r.unconstrained_bound = std::sqrt(static_cast<double>(c) / static_cast<double>(m));

  const FamilyDescriptor capped_family = capped;
  const FamilyDescriptor open_family = open;
  const DrawEvaluator primal_eval(capped_family, SupSolver::projected_gradient);
  const DrawEvaluator open_eval(open_family, SupSolver::closed_form);
  const LabelSet excluded = adm.complement(c);
  const double log_cap = std::log(t * static_cast<double>(c + 2));
  const Matrix offsets(m * c, 0.0);

  std::vector<double> primal(num_draws), dual(num_draws), unconstrained(num_draws);
  kernels::map_parallel(
      num_draws,
      [&](std::size_t d) {
        const std::uint64_t s = rng::derive_seed(seed, d);
        const auto ids = sample_ids(dist, m, rng::derive_seed(s, 0));
        std::vector<InstanceView> sample;
        for (std::size_t id : ids) sample.push_back(dist.instance(id));
        rng::Engine g(rng::derive_seed(s, 1));
        const Matrix eps = draw_eps(g, m, c);
        const double mm = static_cast<double>(m);
        const auto [a, b] = primal_eval.suprema(sample, eps, offsets, g);
        primal[d] = (a + b) / (2.0 * mm);
        const auto [ua, ub] = open_eval.suprema(sample, eps, offsets, g);
        unconstrained[d] = (ua + ub) / (2.0 * mm);
        Matrix xi = xi_matrix(eps, sample, c, p);
        const double dp = dual_value(xi, c, p, excluded, mom.mean, log_cap);
        for (double& v : xi) v = -v;
        const double dn = dual_value(xi, c, p, excluded, mom.mean, log_cap);
        dual[d] = (dp + dn) / (2.0 * mm);
      },
      1);
  r.primal = summarize(std::move(primal), SupSolver::projected_gradient);
  r.dual = summarize(std::move(dual), SupSolver::closed_form);
  r.unconstrained = summarize(std::move(unconstrained), SupSolver::closed_form);
  r.bound_holds = r.primal.mean <= r.analytic_bound + 3.0 * r.primal.std_error;
  return r;
}

double improved_violation_constant(std::size_t c, std::size_t c0) {
  if (c0 == 0 || c0 >= c) throw std::invalid_argument("need 0 < c0 < c");
  return std::numbers::sqrt2 / 2.0 *
         std::sqrt(1.0 / static_cast<double>(c - c0) + 1.0 / static_cast<double>(c0));
}

GapTerms generalization_gap_terms(std::size_t m_labeled, std::size_t m_unlabeled, double delta,
                                  double complexity_labeled, double complexity_unlabeled,
                                  std::optional<std::pair<std::size_t, std::size_t>> c_and_c0) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (m_labeled == 0 || m_unlabeled == 0) throw std::invalid_argument("sample sizes must be positive");
  const double log_inv = -std::log(delta);
  GapTerms g;
  g.log_term_labeled = std::sqrt(log_inv / (2.0 * static_cast<double>(m_labeled)));
  g.log_term_unlabeled = std::sqrt(log_inv / (2.0 * static_cast<double>(m_unlabeled)));
  g.risk_gap = complexity_labeled + g.log_term_labeled;
  if (c_and_c0) g.violation_constant = improved_violation_constant(c_and_c0->first, c_and_c0->second);
  g.violation_gap = g.violation_constant * complexity_unlabeled + g.log_term_unlabeled;
  g.b_unlabeled = complexity_unlabeled + 2.0 * g.log_term_unlabeled;
  return g;
}

void write_draws_csv(std::ostream& out, const ComplexityEstimate& est) {
  out << "draw,value\n";
  for (std::size_t d = 0; d < est.per_draw_values.size(); ++d) {
    out << d << ',' << tabular::format_real(est.per_draw_values[d]) << '\n';
  }
}

void write_summary(std::ostream& out, const ComplexityEstimate& est) {
  out << "mean " << tabular::format_real(est.mean) << "\nstd_error " << tabular::format_real(est.std_error)
      << "\nnum_draws " << est.num_draws << "\nsup_solver " << to_string(est.sup_solver) << '\n';
}

}  // namespace conlab
