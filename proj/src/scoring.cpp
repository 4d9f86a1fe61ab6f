#include "conlab/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "conlab/errors.hpp"

namespace conlab {
namespace {

void check_finite(std::span<const double> scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidScore("non-finite score");
  }
}

void check_size(std::span<const double> in, std::span<double> out) {
  if (in.size() != out.size()) throw std::invalid_argument("output length differs from score length");
}

}  // namespace

LinearScorer::LinearScorer(std::size_t labels, std::size_t dim, std::optional<double> norm_budget)
    : LinearScorer(labels, dim, std::vector<double>(labels * dim, 0.0), norm_budget) {}

LinearScorer::LinearScorer(std::size_t labels, std::size_t dim, std::vector<double> weights,
                           std::optional<double> norm_budget)
    : labels_(labels), dim_(dim), w_(std::move(weights)), budget_(norm_budget) {
  if (labels < 2) throw std::invalid_argument("a scorer needs at least two labels");
  if (w_.size() != labels * dim) throw std::invalid_argument("weight count must equal labels * dim");
  if (budget_ && !(*budget_ >= 0.0)) throw std::invalid_argument("norm budget must be nonnegative");
  check_finite(w_);
}

double LinearScorer::squared_norm() const {
  double s = 0.0;
  for (double v : w_) s += v * v;
  return s;
}

void LinearScorer::project() {
  if (!budget_) return;
  const double n2 = squared_norm();
  if (n2 <= *budget_) return;
  // The scale is shrunk by one ulp-sized factor so the result never exceeds
  // the budget through rounding.
  const double scale = std::sqrt(*budget_ / n2) * (1.0 - 4e-16);
  for (double& v : w_) v *= scale;
}

void LinearScorer::scores(std::span<const double> x, std::span<double> out) const {
  if (x.size() != dim_) throw std::invalid_argument("feature dimension mismatch");
  if (out.size() != labels_) throw std::invalid_argument("output length differs from label count");
  for (std::size_t j = 0; j < labels_; ++j) {
    const double* w = w_.data() + j * dim_;
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) s += w[k] * x[k];
    out[j] = s;
  }
}

ScoreTable::ScoreTable(std::size_t labels, std::vector<double> scores) : labels_(labels), s_(std::move(scores)) {
  if (labels < 2) throw std::invalid_argument("a score table needs at least two labels");
  if (s_.size() % labels != 0) throw std::invalid_argument("score count is not a multiple of the label count");
  check_finite(s_);
}

ScoreTable ScoreTable::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("score table needs at least one row");
  const std::size_t c = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw std::invalid_argument("ragged score rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return ScoreTable(c, std::move(flat));
}

std::span<const double> ScoreTable::row(std::size_t id) const {
  if (id >= instances()) throw std::out_of_range("score table has no row " + std::to_string(id));
  return std::span(s_).subspan(id * labels_, labels_);
}

std::span<double> ScoreTable::row(std::size_t id) {
  if (id >= instances()) throw std::out_of_range("score table has no row " + std::to_string(id));
  return std::span(s_).subspan(id * labels_, labels_);
}

std::size_t Scorer::labels() const {
  return std::visit([](const auto& s) { return s.labels(); }, impl_);
}

void Scorer::scores(InstanceView x, std::span<double> out) const {
  if (const auto* lin = linear()) {
    lin->scores(x.features, out);
    return;
  }
  auto r = table()->row(x.id);
  if (out.size() != r.size()) throw std::invalid_argument("output length differs from label count");
  std::copy(r.begin(), r.end(), out.begin());
}

std::vector<double> Scorer::scores(InstanceView x) const {
  std::vector<double> out(labels());
  scores(x, out);
  return out;
}

Mu Mu::from(double value) {
  if (std::isnan(value) || value < 0.0) throw std::invalid_argument("mu must be a nonnegative number");
  if (std::isinf(value)) return infinite();
  return Mu(false, value);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double log_sum_exp(std::span<const double> values, LabelSet subset) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (subset.contains(j)) m = std::max(m, values[j]);
  }
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (subset.contains(j)) s += std::exp(values[j] - m);
  }
  return m + std::log(s);
}

void softmax(std::span<const double> scores, std::span<double> out) {
  check_size(scores, out);
  check_finite(scores);
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) z += (out[j] = std::exp(scores[j] - m));
  for (double& p : out) p /= z;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  softmax(scores, out);
  return out;
}

void ccm_scores(std::span<const double> scores, LabelSet admissible, Mu mu, std::span<double> out) {
  check_size(scores, out);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (admissible.contains(j)) out[j] = scores[j];
    else if (mu.is_infinite()) out[j] = ninf;
    else out[j] = scores[j] - mu.value();
  }
}

void ccm_softmax(std::span<const double> scores, LabelSet admissible, Mu mu, std::span<double> out) {
  check_size(scores, out);
  if (!mu.is_infinite()) {
    ccm_scores(scores, admissible, mu, out);
    softmax(std::span<const double>(out), out);
    return;
  }
  check_finite(scores);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (admissible.contains(j)) m = std::max(m, scores[j]);
  }
  if (!std::isfinite(m)) throw std::invalid_argument("admissible set has no label in range");
  double z = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    out[j] = admissible.contains(j) ? std::exp(scores[j] - m) : 0.0;
    z += out[j];
  }
  for (double& p : out) p /= z;
}

std::size_t argmax(std::span<const double> scores) {
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::size_t ccm_argmax(std::span<const double> scores, LabelSet admissible, Mu mu) {
  std::vector<double> s(scores.size());
  ccm_scores(scores, admissible, mu, s);
  return argmax(s);
}

std::vector<double> softmax_predict(const Scorer& scorer, InstanceView x) { return softmax(scorer.scores(x)); }

std::vector<double> ccm_predict(const CcmModel& model, InstanceView x) {
  const auto s = model.base.scores(x);
  std::vector<double> p(s.size());
  ccm_softmax(s, model.constraint.admissible(x.id), model.mu, p);
  return p;
}

std::size_t argmax_label(const Scorer& scorer, InstanceView x) { return argmax(scorer.scores(x)); }

std::size_t argmax_label(const CcmModel& model, InstanceView x) {
  return ccm_argmax(model.base.scores(x), model.constraint.admissible(x.id), model.mu);
}

}  // namespace conlab
