#include "conlab/ccm_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "conlab/errors.hpp"
#include "conlab/kernels.hpp"
#include "conlab/losses.hpp"
#include "conlab/tabular.hpp"

namespace conlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSignTol = 1e-12;
constexpr double kBoundSlack = 1e-10;

double mu_times(Mu mu, double v) {
  if (!mu.is_infinite()) return mu.value() * v;
  return v > 0.0 ? kInf : 0.0;
}

}  // namespace

RiskDelta risk_delta(const FiniteDistribution& dist, const Scorer& scorer, Mu mu) {
  const PopulationMetrics base = population_metrics(dist, scorer);
  const PopulationMetrics ccm = population_metrics(dist, scorer, mu);
  RiskDelta d;
  d.mu = mu;
  d.violation = base.violation_l1;
  d.noise_rate = oracle_noise_rate(dist);
  d.eta = d.noise_rate > 0.0 ? d.violation / d.noise_rate : kInf;
  d.delta_ce = base.risk_ce - ccm.risk_ce;
  d.delta_l1 = base.risk_l1 - ccm.risk_l1;
  d.delta_margin = base.margin - ccm.margin;
  if (mu.is_infinite()) {
    d.lower_bound_ce = d.noise_rate > 0.0 ? -kInf : d.violation;
    d.lower_bound_l1 = d.noise_rate > 0.0 ? -kInf : base.gold_times_outside;
  } else {
    const double m = mu.value();
    d.lower_bound_ce = -d.violation * std::expm1(-m) - m * d.noise_rate;
    d.lower_bound_l1 = -0.5 * std::expm1(-2.0 * m) * base.gold_times_outside - m * d.noise_rate;
  }
  d.lower_bound_holds = d.delta_ce >= d.lower_bound_ce - kBoundSlack;
  return d;
}

double delta_ce_derivative(const FiniteDistribution& dist, const Scorer& scorer, Mu mu) {
  return population_metrics(dist, scorer, mu).violation_l1 - oracle_noise_rate(dist);
}

std::string to_string(Benefit b) {
  switch (b) {
    case Benefit::improves: return "improves";
    case Benefit::degrades: return "degrades";
    case Benefit::neutral: return "neutral";
  }
  return "?";
}

BenefitReport marginal_benefit(const FiniteDistribution& dist, const Scorer& scorer) {
  constexpr double h = 1e-6;
  BenefitReport r;
  r.derivative = delta_ce_derivative(dist, scorer, Mu{});
  const double r0 = population_metrics(dist, scorer).risk_ce;
  const double d1 = r0 - population_metrics(dist, scorer, Mu::from(h)).risk_ce;
  const double d2 = r0 - population_metrics(dist, scorer, Mu::from(2.0 * h)).risk_ce;
  r.fd_derivative = (4.0 * d1 - d2) / (2.0 * h);
  if (r.derivative > kSignTol) r.sign = Benefit::improves;
  else if (r.derivative < -kSignTol) r.sign = Benefit::degrades;
  else r.sign = Benefit::neutral;
  return r;
}

Benefit marginal_benefit_sign(const FiniteDistribution& dist, const Scorer& scorer) {
  return marginal_benefit(dist, scorer).sign;
}

double lambert_w(double t) {
  constexpr double kBranch = -1.0 / std::numbers::e;
  if (std::isnan(t)) throw std::domain_error("lambert_w of NaN");
  if (t < kBranch - 1e-15) throw std::domain_error("lambert_w argument below -1/e");
  if (t <= kBranch) return -1.0;
  if (t == 0.0) return 0.0;
  if (std::isinf(t)) return t;

  double w;
  if (t < -0.25) {
    const double p = std::sqrt(2.0 * (std::numbers::e * t + 1.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (t <= 3.0) {
    w = std::log1p(t);
  } else {
    const double l1 = std::log(t);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }
  for (int it = 0; it < 50; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - t;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double step = f / denom;
    w -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w))) break;
  }
  return w;
}

double select_mu(double violation, double noise) {
  if (!(noise >= 0.0) || !(violation >= 0.0)) {
    throw PreconditionError("violation and noise rate must be nonnegative", violation);
  }
  if (violation < noise) throw PreconditionError("select_mu needs V(f) >= V_ora", violation - noise);
  if (noise == 0.0) return kInf;
  const double eta = violation / noise;
  if (eta == 1.0) return 0.0;
  const double mu = lambert_w(-eta * std::exp(-eta)) + eta;
  return std::max(mu, 0.0);
}

double combo_rho_threshold(const FiniteDistribution& dist, const Scorer& f_post, Mu mu) {
  if (mu.is_zero()) return 0.0;
  const RiskDelta d = risk_delta(dist, f_post, mu);
  if (!(d.delta_ce > 0.0)) {
    throw PreconditionError("CCM does not improve f_post at this mu", d.delta_ce);
  }
  const double v_post = population_metrics(dist, f_post).violation_ce;
  const double v_post_mu = population_metrics(dist, f_post, mu).violation_ce;
  if (v_post_mu == 0.0) return kInf;
  return (v_post - mu_times(mu, d.noise_rate)) / v_post_mu - 1.0;
}

FutilityThreshold post_training_futility_rho(const FiniteDistribution& dist, const std::vector<Scorer>& grid) {
  if (grid.empty()) throw std::invalid_argument("futility threshold needs a nonempty grid");
  FutilityThreshold r;
  r.noise_rate = oracle_noise_rate(dist);
  r.min_violation = kInf;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = population_metrics(dist, grid[k]).violation_l1;
    if (v < r.min_violation) {
      r.min_violation = v;
      r.f_inf_index = k;
    }
  }
  if (r.noise_rate < r.min_violation) {
    throw PreconditionError("hypothesis not met: V_ora < V(f_inf)", r.noise_rate - r.min_violation);
  }
  const double gap = r.noise_rate - r.min_violation;
  r.rho = gap > 0.0 ? 1.0 / gap : kInf;
  return r;
}

FutilityCheck futility_check(const FiniteDistribution& dist, const Scorer& scorer, const std::vector<double>& mu_grid) {
  FutilityCheck c;
  const double r0 = population_metrics(dist, scorer).risk_ce;
  std::vector<double> deltas(mu_grid.size() + 1);
  kernels::map_parallel(
      deltas.size(),
      [&](std::size_t k) {
        const Mu mu = k < mu_grid.size() ? Mu::from(mu_grid[k]) : Mu::infinite();
        deltas[k] = r0 - population_metrics(dist, scorer, mu).risk_ce;
      },
      1);
  c.max_delta = *std::max_element(deltas.begin(), deltas.end());
  c.derivative_at_zero = delta_ce_derivative(dist, scorer, Mu{});
  c.holds = c.max_delta <= kBoundSlack && c.derivative_at_zero <= 0.0;
  return c;
}

double margin_delta(const FiniteDistribution& dist, const Scorer& scorer, Mu mu) {
  return population_metrics(dist, scorer).margin - population_metrics(dist, scorer, mu).margin;
}

double l1_delta(const FiniteDistribution& dist, const Scorer& scorer, Mu mu) {
  return population_metrics(dist, scorer).risk_l1 - population_metrics(dist, scorer, mu).risk_l1;
}

double l1_lower_bound(const FiniteDistribution& dist, const Scorer& scorer, Mu mu) {
  return risk_delta(dist, scorer, mu).lower_bound_l1;
}

double margin_positive_part(const FiniteDistribution& dist, const Scorer& scorer) {
  return kernels::sum_parallel(dist.size(), [&](std::size_t i) {
    const auto s = scorer.scores(dist.instance(i));
    const LabelSet adm = dist.admissible(i);
    double in = -kInf, out = -kInf;
    for (std::size_t j = 0; j < s.size(); ++j) {
      double& best = adm.contains(j) ? in : out;
      best = std::max(best, s[j]);
    }
    const double gap = out == -kInf ? 0.0 : std::max(out - in, 0.0);
    return dist.point(i).weight * gap;
  });
}

double zero_one_violation(const FiniteDistribution& dist, const Scorer& scorer) {
  return population_metrics(dist, scorer).violation_01;
}

void ccm_probability_derivative(std::span<const double> scores, LabelSet admissible, Mu mu, std::span<double> out) {
  if (mu.is_infinite()) throw std::invalid_argument("the mu-derivative needs a finite mu");
  ccm_softmax(scores, admissible, mu, out);
  double outside = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (!admissible.contains(j)) outside += out[j];
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] *= outside - (admissible.contains(j) ? 0.0 : 1.0);
}

std::vector<double> default_mu_grid() {
  constexpr std::size_t n = 64;
  const double lo = std::log(1e-3), hi = std::log(40.0);
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = std::exp(lo + (hi - lo) * static_cast<double>(k) / (n - 1));
  g.front() = 1e-3;
  g.back() = 40.0;
  return g;
}

void write_risk_delta_csv(std::ostream& out, const std::string& instance_set, const std::vector<RiskDelta>& rows,
                          bool header) {
  if (header) {
    out << "instance_set,mu,delta_ce,lower_bound_ce,delta_l1,lower_bound_l1,delta_margin,eta,lower_bound_holds\n";
  }
  using tabular::format_real;
  for (const auto& r : rows) {
    out << instance_set << ',' << (r.mu.is_infinite() ? "inf" : format_real(r.mu.value())) << ','
        << format_real(r.delta_ce) << ',' << format_real(r.lower_bound_ce) << ',' << format_real(r.delta_l1) << ','
        << format_real(r.lower_bound_l1) << ',' << format_real(r.delta_margin) << ',' << format_real(r.eta) << ','
        << (r.lower_bound_holds ? 1 : 0) << '\n';
  }
}

}  // namespace conlab
