#include "conlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "conlab/kernels.hpp"
#include "conlab/tabular.hpp"

namespace conlab {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(1 + e^z) without overflow.
double softplus(double z) {
  if (z == kNegInf) return 0.0;
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// e^z / (1 + e^z).
double logistic(double z) {
  if (z == kNegInf) return 0.0;
  return z > 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// log of the mass outside C relative to the mass inside C, for f^mu.
double log_outside_ratio(std::span<const double> scores, LabelSet admissible, Mu mu) {
  if (mu.is_infinite()) return kNegInf;
  const LabelSet outside = admissible.complement(scores.size());
  if (outside.empty()) return kNegInf;
  return log_sum_exp(scores, outside) - mu.value() - log_sum_exp(scores, admissible);
}

void require_label(std::size_t gold, std::size_t c) {
  if (gold >= c) throw std::out_of_range("gold label " + std::to_string(gold) + " outside the label space");
}

struct Term {
  PointMetrics m;
  double gold_times_outside = 0.0;  // of the base scorer
};

Term term_at(const FiniteDistribution& dist, const Scorer& scorer, Mu mu, std::size_t i) {
  const auto s = scorer.scores(dist.instance(i));
  const std::size_t gold = dist.point(i).oracle;
  Term t{point_metrics(s, dist.admissible(i), mu, gold), 0.0};
  const PointMetrics base = mu.is_zero() ? t.m : point_metrics(s, dist.admissible(i), Mu{}, gold);
  t.gold_times_outside = base.p_gold * base.violation_l1;
  return t;
}

template <class Field>
double weighted(const std::vector<Term>& terms, const FiniteDistribution& dist, Field field) {
  std::vector<double> t(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) t[i] = dist.point(i).weight * field(terms[i]);
  return kernels::pairwise_sum(t);
}

PopulationMetrics reduce(const std::vector<Term>& t, const FiniteDistribution& dist) {
  PopulationMetrics r;
  r.risk_l1 = weighted(t, dist, [](const Term& x) { return x.m.loss_l1; });
  r.risk_ce = weighted(t, dist, [](const Term& x) { return x.m.loss_ce; });
  r.risk_hinge = weighted(t, dist, [](const Term& x) { return x.m.hinge; });
  r.margin = weighted(t, dist, [](const Term& x) { return x.m.margin; });
  r.violation_l1 = weighted(t, dist, [](const Term& x) { return x.m.violation_l1; });
  r.violation_ce = weighted(t, dist, [](const Term& x) { return x.m.violation_ce; });
  r.violation_01 = weighted(t, dist, [](const Term& x) { return x.m.violation_01; });
  r.gold_times_outside = weighted(t, dist, [](const Term& x) { return x.gold_times_outside; });
  return r;
}

std::string opt(const std::optional<double>& v) { return v ? tabular::format_real(*v) : "na"; }

const char* basis_name(RiskReport::Basis b) {
  return b == RiskReport::Basis::empirical ? "empirical" : "exact_population";
}

double pick(const PointMetrics& m, LossKind kind) {
  switch (kind) {
    case LossKind::ell1: return m.loss_l1;
    case LossKind::cross_entropy: return m.loss_ce;
    case LossKind::hinge_margin: return m.hinge;
  }
  return 0.0;
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ell1: return "ell1";
    case LossKind::cross_entropy: return "cross_entropy";
    case LossKind::hinge_margin: return "hinge_margin";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "ell1") return LossKind::ell1;
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "hinge_margin") return LossKind::hinge_margin;
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

PointViolation point_violation(std::span<const double> scores, LabelSet admissible, Mu mu) {
  const double z = log_outside_ratio(scores, admissible, mu);
  return {logistic(z), softplus(z)};
}

PointMetrics point_metrics(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold) {
  const std::size_t c = scores.size();
  require_label(gold, c);
  std::vector<double> s(c);
  ccm_scores(scores, admissible, mu, s);

  PointMetrics m;
  const std::size_t top = argmax(s);
  if (s[gold] == kNegInf) {
    m.loss_l1 = 1.0;
    m.loss_ce = kCrossEntropyCap;
    m.p_gold = 0.0;
  } else if (top == gold) {
    // r = sum_{j != gold} e^{s_j - s_gold} <= c - 1, so both losses keep full
    // relative precision as P(gold) -> 1.
    double r = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != gold) r += std::exp(s[j] - s[gold]);
    }
    m.loss_l1 = r / (1.0 + r);
    m.loss_ce = std::min(std::log1p(r), kCrossEntropyCap);
    m.p_gold = 1.0 / (1.0 + r);
  } else {
    const double log_p = s[gold] - log_sum_exp(s);
    m.p_gold = std::exp(log_p);
    m.loss_l1 = 1.0 - m.p_gold;
    m.loss_ce = std::min(-log_p, kCrossEntropyCap);
  }

  double aug = kNegInf;
  for (std::size_t j = 0; j < c; ++j) aug = std::max(aug, s[j] + (j == gold ? 0.0 : 1.0));
  if (s[gold] == kNegInf) {
    m.hinge = m.margin = kCrossEntropyCap;
  } else {
    m.hinge = aug - s[gold];
    m.margin = s[top] - s[gold];
  }

  const PointViolation v = point_violation(scores, admissible, mu);
  m.violation_l1 = v.l1;
  m.violation_ce = v.ce;
  m.violation_01 = admissible.contains(top) ? 0.0 : 1.0;
  return m;
}

double pointwise_loss(LossKind kind, const Scorer& scorer, InstanceView x, std::size_t gold) {
  const auto s = scorer.scores(x);
  return pick(point_metrics(s, LabelSet::all(s.size()), Mu{}, gold), kind);
}

double pointwise_loss(LossKind kind, const CcmModel& model, InstanceView x, std::size_t gold) {
  return pick(point_metrics(model.base.scores(x), model.constraint.admissible(x.id), model.mu, gold), kind);
}

double pointwise_violation(LossKind kind, const Scorer& scorer, const ConstraintMap& cmap, InstanceView x,
                           Mu mu) {
  const PointViolation v = point_violation(scorer.scores(x), cmap.admissible(x.id), mu);
  switch (kind) {
    case LossKind::ell1: return v.l1;
    case LossKind::cross_entropy: return v.ce;
    case LossKind::hinge_margin: break;
  }
  throw std::invalid_argument("violation is defined for ell1 and cross_entropy only");
}

void write_key_value(std::ostream& out, const RiskReport& r) {
  out << "kind " << to_string(r.kind) << "\nrisk " << tabular::format_real(r.risk) << "\nviolation_l1 "
      << opt(r.violation_l1) << "\nviolation_ce " << opt(r.violation_ce) << "\nmargin " << opt(r.margin)
      << "\nbasis " << basis_name(r.basis) << "\nsample_size " << r.sample_size << '\n';
}

std::string csv_header_risk_report() { return "kind,risk,violation_l1,violation_ce,margin,basis,sample_size"; }

std::string csv_row(const RiskReport& r) {
  return to_string(r.kind) + ',' + tabular::format_real(r.risk) + ',' + opt(r.violation_l1) + ',' +
         opt(r.violation_ce) + ',' + opt(r.margin) + ',' + basis_name(r.basis) + ',' +
         std::to_string(r.sample_size);
}

PopulationMetrics population_metrics(const FiniteDistribution& dist, const Scorer& scorer, Mu mu) {
  std::vector<Term> t(dist.size());
  kernels::map_parallel(dist.size(), [&](std::size_t i) { t[i] = term_at(dist, scorer, mu, i); });
  return reduce(t, dist);
}

PopulationMetrics population_metrics_serial(const FiniteDistribution& dist, const Scorer& scorer, Mu mu) {
  PopulationMetrics r;
  for (std::size_t k = dist.size(); k-- > 0;) {
    const Term t = term_at(dist, scorer, mu, k);
    const PointMetrics& m = t.m;
    const double w = dist.point(k).weight;
    r.risk_l1 += w * m.loss_l1;
    r.risk_ce += w * m.loss_ce;
    r.risk_hinge += w * m.hinge;
    r.margin += w * m.margin;
    r.violation_l1 += w * m.violation_l1;
    r.violation_ce += w * m.violation_ce;
    r.violation_01 += w * m.violation_01;
    r.gold_times_outside += w * t.gold_times_outside;
  }
  return r;
}

RiskReport population_risk(const FiniteDistribution& dist, const Scorer& scorer, LossKind kind, Mu mu) {
  const PopulationMetrics m = population_metrics(dist, scorer, mu);
  RiskReport r;
  r.kind = kind;
  r.risk = kind == LossKind::ell1 ? m.risk_l1 : kind == LossKind::cross_entropy ? m.risk_ce : m.risk_hinge;
  r.violation_l1 = m.violation_l1;
  r.violation_ce = m.violation_ce;
  r.margin = m.margin;
  r.basis = RiskReport::Basis::exact_population;
  r.sample_size = dist.size();
  return r;
}

RiskReport empirical_risk(const Dataset& data, const Scorer& scorer, LossKind kind, const ConstraintMap* cmap,
                          Mu mu) {
  if (data.labeled.empty()) throw std::invalid_argument("empirical risk needs labeled samples");
  if (!mu.is_zero() && !cmap) throw std::invalid_argument("CCM evaluation needs a constraint map");
  const std::size_t n = data.labeled.size();
  std::vector<double> loss(n), margin(n);
  kernels::map_parallel(n, [&](std::size_t i) {
    const auto& s = data.labeled[i];
    const auto scores = scorer.scores(s.instance.view());
    const LabelSet adm = cmap ? cmap->admissible(s.instance.id) : LabelSet::all(scores.size());
    const PointMetrics m = point_metrics(scores, adm, mu, s.label);
    loss[i] = pick(m, kind);
    margin[i] = m.margin;
  });
  RiskReport r;
  r.kind = kind;
  r.risk = kernels::pairwise_sum(loss) / static_cast<double>(n);
  r.margin = kernels::pairwise_sum(margin) / static_cast<double>(n);
  r.basis = RiskReport::Basis::empirical;
  r.sample_size = n;
  if (cmap) {
    Dataset pool;
    if (data.unlabeled.empty()) {
      for (const auto& s : data.labeled) pool.unlabeled.push_back(s.instance);
    }
    const Dataset& src = data.unlabeled.empty() ? pool : data;
    r.violation_l1 = empirical_violation(src, scorer, *cmap, LossKind::ell1, mu);
    r.violation_ce = empirical_violation(src, scorer, *cmap, LossKind::cross_entropy, mu);
  }
  return r;
}

double empirical_violation(const Dataset& data, const Scorer& scorer, const ConstraintMap& cmap, LossKind kind,
                           Mu mu) {
  if (data.unlabeled.empty()) throw std::invalid_argument("empirical violation needs unlabeled samples");
  if (kind == LossKind::hinge_margin) throw std::invalid_argument("violation is defined for ell1 and cross_entropy only");
  const double total = kernels::sum_parallel(data.unlabeled.size(), [&](std::size_t i) {
    return pointwise_violation(kind, scorer, cmap, data.unlabeled[i].view(), mu);
  });
  return total / static_cast<double>(data.unlabeled.size());
}

void ce_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold,
                       std::span<double> out) {
  require_label(gold, scores.size());
  if (mu.is_infinite() && !admissible.contains(gold)) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  ccm_softmax(scores, admissible, mu, out);
  out[gold] -= 1.0;
}

void l1_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold,
                       std::span<double> out) {
  require_label(gold, scores.size());
  ccm_softmax(scores, admissible, mu, out);
  const double pg = out[gold];
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = -pg * ((j == gold ? 1.0 : 0.0) - out[j]);
}

void hinge_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu, std::size_t gold,
                          std::span<double> out) {
  require_label(gold, scores.size());
  std::vector<double> s(scores.size());
  ccm_scores(scores, admissible, mu, s);
  std::fill(out.begin(), out.end(), 0.0);
  if (s[gold] == kNegInf) return;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j != gold) s[j] += 1.0;
  }
  const std::size_t yhat = argmax(s);
  out[yhat] += 1.0;
  out[gold] -= 1.0;
}

void violation_ce_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu,
                                 std::span<double> out) {
  if (mu.is_infinite()) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  ccm_softmax(scores, admissible, mu, out);
  std::vector<double> pc(scores.size());
  ccm_softmax(scores, admissible, Mu::infinite(), pc);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] -= pc[j];
}

void violation_l1_score_gradient(std::span<const double> scores, LabelSet admissible, Mu mu,
                                 std::span<double> out) {
  if (mu.is_infinite()) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  ccm_softmax(scores, admissible, mu, out);
  const double outside = point_violation(scores, admissible, mu).l1;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] *= (admissible.contains(j) ? 0.0 : 1.0) - outside;
  }
}

void accumulate_linear_gradient(std::span<const double> score_grad, std::span<const double> x, double weight,
                                std::span<double> out) {
  const std::size_t p = x.size();
  for (std::size_t j = 0; j < score_grad.size(); ++j) {
    const double g = weight * score_grad[j];
    if (g == 0.0) continue;
    double* row = out.data() + j * p;
    for (std::size_t k = 0; k < p; ++k) row[k] += g * x[k];
  }
}

std::vector<double> loss_gradient(LossKind kind, const LinearScorer& scorer, InstanceView x, std::size_t gold,
                                  LabelSet admissible, Mu mu) {
  std::vector<double> s(scorer.labels()), g(scorer.labels());
  scorer.scores(x.features, s);
  switch (kind) {
    case LossKind::ell1: l1_score_gradient(s, admissible, mu, gold, g); break;
    case LossKind::cross_entropy: ce_score_gradient(s, admissible, mu, gold, g); break;
    case LossKind::hinge_margin: hinge_score_gradient(s, admissible, mu, gold, g); break;
  }
  std::vector<double> out(scorer.weights().size(), 0.0);
  accumulate_linear_gradient(g, x.features, 1.0, out);
  return out;
}

std::vector<double> violation_gradient(LossKind kind, const LinearScorer& scorer, InstanceView x,
                                       LabelSet admissible, Mu mu) {
  std::vector<double> s(scorer.labels()), g(scorer.labels());
  scorer.scores(x.features, s);
  switch (kind) {
    case LossKind::ell1: violation_l1_score_gradient(s, admissible, mu, g); break;
    case LossKind::cross_entropy: violation_ce_score_gradient(s, admissible, mu, g); break;
    case LossKind::hinge_margin: throw std::invalid_argument("violation is defined for ell1 and cross_entropy only");
  }
  std::vector<double> out(scorer.weights().size(), 0.0);
  accumulate_linear_gradient(g, x.features, 1.0, out);
  return out;
}

}  // namespace conlab
