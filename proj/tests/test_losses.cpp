#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "conlab/losses.hpp"
#include "conlab/rng.hpp"
#include "support.hpp"

using namespace conlab;
namespace ts = testing_support;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Scorer table(std::vector<std::vector<double>> rows) { return Scorer(ScoreTable::from_rows(rows)); }

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("loss kind names") {
  for (auto k : {LossKind::ell1, LossKind::cross_entropy, LossKind::hinge_margin}) {
    CHECK(parse_loss_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_loss_kind("focal"), std::invalid_argument);
}

TEST_CASE("pointwise loss examples") {
  const InstanceView x{0, {}};
  SUBCASE("perfect prediction") {
    const ConstraintMap m(LabelSpace(3), {LabelSet::of({1})});
    const CcmModel strict{table({{4, 0, -2}}), Mu::infinite(), m};
    CHECK(pointwise_loss(LossKind::ell1, strict, x, 1) == 0.0);
    CHECK(pointwise_loss(LossKind::cross_entropy, strict, x, 1) == 0.0);
  }
  SUBCASE("uniform, four labels") {
    const Scorer u = table({{0, 0, 0, 0}});
    CHECK(std::abs(pointwise_loss(LossKind::ell1, u, x, 2) - 0.75) < 1e-15);
    CHECK(std::abs(pointwise_loss(LossKind::cross_entropy, u, x, 2) - std::log(4.0)) < 1e-15);
  }
  SUBCASE("hinge with 0/1 cost") {
    CHECK(pointwise_loss(LossKind::hinge_margin, table({{2, 0, 0}}), x, 0) == 0.0);
    CHECK(pointwise_loss(LossKind::hinge_margin, table({{2, 1.5, 0}}), x, 0) == 0.5);
    CHECK(pointwise_loss(LossKind::hinge_margin, table({{0, 3, 0}}), x, 0) == 4.0);
  }
  SUBCASE("invalid label") {
    CHECK_THROWS(pointwise_loss(LossKind::ell1, table({{0, 0}}), x, 2));
  }
  SUBCASE("impossible gold under strict inference is clamped") {
    const ConstraintMap m(LabelSpace(3), {LabelSet::of({0, 1})});
    const CcmModel strict{table({{0, 0, 5}}), Mu::infinite(), m};
    CHECK(pointwise_loss(LossKind::cross_entropy, strict, x, 2) == kCrossEntropyCap);
    CHECK(pointwise_loss(LossKind::ell1, strict, x, 2) == 1.0);
  }
}

TEST_CASE("pointwise violation examples") {
  const InstanceView x{0, {}};
  const Scorer u = table({{0, 0, 0, 0}});
  const ConstraintMap full(LabelSpace(4), {LabelSet::all(4)});
  CHECK(pointwise_violation(LossKind::ell1, u, full, x) == 0.0);
  CHECK(pointwise_violation(LossKind::cross_entropy, u, full, x) == 0.0);

  const ConstraintMap three(LabelSpace(4), {LabelSet::of({0, 1, 2})});
  CHECK(std::abs(pointwise_violation(LossKind::ell1, u, three, x) - 0.25) < 1e-15);
  CHECK(std::abs(pointwise_violation(LossKind::cross_entropy, u, three, x) + std::log(0.75)) < 1e-15);
  CHECK(pointwise_violation(LossKind::ell1, u, three, x, Mu::infinite()) == 0.0);
  CHECK(pointwise_violation(LossKind::cross_entropy, u, three, x, Mu::infinite()) == 0.0);
  CHECK_THROWS(pointwise_violation(LossKind::hinge_margin, u, three, x));
}

TEST_CASE("population metrics match the 50-digit reference") {
  rng::Engine g(12);
  for (int k = 0; k < 40; ++k) {
    const auto d = ts::random_distribution(g, 6, 30, k % 3 ? -1.0 : 0.0);
    const ScoreTable t = ts::random_table(d, g, 3.0);
    for (double mu : {0.0, 0.7, 4.0, kInf}) {
      const auto m = population_metrics(d, t, Mu::from(mu));
      const auto ref = ts::population(d, t, mu);
      CHECK(std::abs(m.risk_l1 - ts::to_double(ref.risk_l1)) < 1e-12);
      CHECK(std::abs(m.risk_ce - ts::to_double(ref.risk_ce)) < 1e-12 * std::max(1.0, m.risk_ce));
      CHECK(std::abs(m.violation_l1 - ts::to_double(ref.violation_l1)) < 1e-12);
      CHECK(std::abs(m.violation_ce - ts::to_double(ref.violation_ce)) < 1e-12);
      CHECK(std::abs(m.margin - ts::to_double(ref.margin)) < 1e-12 * std::max(1.0, m.margin));
      const auto s = population_metrics_serial(d, t, Mu::from(mu));
      CHECK(std::abs(s.risk_ce - m.risk_ce) <= 1e-12 * std::max(1.0, m.risk_ce));
    }
  }
}

TEST_CASE("population risk examples") {
  const ConstraintMap m = ConstraintMap::uniform(LabelSpace(2), 1, LabelSet::all(2));
  const FiniteDistribution one(LabelSpace(2), {{1.0, 0, {}}}, m);
  CHECK(population_risk(one, table({{0, 0}}), LossKind::ell1).risk == 0.5);

  const ConstraintMap gold_only(LabelSpace(3), {LabelSet::of({2}), LabelSet::of({0})});
  const FiniteDistribution two(LabelSpace(3), {{0.5, 2, {}}, {0.5, 0, {}}}, gold_only);
  const Scorer f = table({{1, 2, 3}, {0, 0, 0}});
  for (auto kind : {LossKind::ell1, LossKind::cross_entropy}) {
    CHECK(population_risk(two, f, kind, Mu::infinite()).risk == 0.0);
  }
  const RiskReport r = population_risk(two, f, LossKind::cross_entropy);
  CHECK(r.basis == RiskReport::Basis::exact_population);
  CHECK(r.sample_size == 2);
  CHECK(r.violation_l1.has_value());
}

TEST_CASE("empirical risk and violation") {
  const ConstraintMap m = ConstraintMap::uniform(LabelSpace(2), 2, LabelSet::of({0}));
  Dataset data;
  data.labeled = {{{0, {}}, 0}, {{1, {}}, 0}};
  // P(0) = 0.8 and 0.6 give l1 losses 0.2 and 0.4.
  const Scorer f = table({{std::log(0.8), std::log(0.2)}, {std::log(0.6), std::log(0.4)}});
  const RiskReport r = empirical_risk(data, f, LossKind::ell1, &m);
  CHECK(std::abs(r.risk - 0.3) < 1e-15);
  CHECK(r.basis == RiskReport::Basis::empirical);
  CHECK(r.sample_size == 2);
  CHECK(std::abs(*r.violation_l1 - 0.3) < 1e-15);

  CHECK_THROWS_AS(empirical_violation(data, f, m, LossKind::ell1), std::invalid_argument);
  data.unlabeled = {{1, {}}};
  CHECK(std::abs(empirical_violation(data, f, m, LossKind::ell1) - 0.4) < 1e-15);
  CHECK_THROWS_AS(empirical_risk(Dataset{}, f, LossKind::ell1), std::invalid_argument);
}

TEST_CASE("empirical risk approaches the population risk") {
  rng::Engine g(5);
  const auto d = ts::random_distribution(g, 5, 40, 0.2);
  const ScoreTable t = ts::random_table(d, g, 2.0);
  const Dataset s = sample_dataset(d, 10000, 0, 77);
  const double emp = empirical_risk(s, t, LossKind::ell1).risk;
  CHECK(std::abs(emp - population_risk(d, t, LossKind::ell1).risk) < 0.05);
}

TEST_CASE("risk report serialization") {
  RiskReport r;
  r.kind = LossKind::cross_entropy;
  r.risk = 0.5;
  r.violation_l1 = 0.25;
  r.sample_size = 3;
  CHECK(csv_header_risk_report() == "kind,risk,violation_l1,violation_ce,margin,basis,sample_size");
  CHECK(csv_row(r) == "cross_entropy,0.5,0.25,na,na,exact_population,3");
  std::ostringstream kv;
  write_key_value(kv, r);
  CHECK(kv.str().find("violation_ce na") != std::string::npos);
}

TEST_CASE("cross-entropy gradient is zero at a perfect prediction") {
  const LinearScorer w(3, 1, {0, 0, 0});
  const std::vector<double> x{1.0};
  const auto grad = loss_gradient(LossKind::cross_entropy, w, {0, x}, 1, LabelSet::of({1}), Mu::infinite());
  CHECK(norm(grad) < 1e-10);
}

TEST_CASE("two symmetric classes give antisymmetric gradients") {
  const LinearScorer w(2, 2, {0.3, -0.2, 0.3, -0.2});
  const std::vector<double> x{0.7, 1.1};
  for (auto kind : {LossKind::ell1, LossKind::cross_entropy}) {
    const auto grad = loss_gradient(kind, w, {0, x}, 0);
    CHECK(std::abs(grad[0] + grad[2]) < 1e-15);
    CHECK(std::abs(grad[1] + grad[3]) < 1e-15);
  }
}

TEST_CASE("loss and violation gradients match central differences") {
  rng::Engine g(21);
  const double h = 1e-5;
  for (int k = 0; k < 50; ++k) {
    const std::size_t c = 2 + rng::uniform_index(g, 5), p = 5;
    std::vector<double> wv(c * p), x(p);
    for (double& v : wv) v = rng::normal(g);
    for (double& v : x) v = rng::normal(g);
    const LinearScorer w(c, p, wv);
    const std::size_t gold = rng::uniform_index(g, c);
    LabelSet adm(1 + rng::uniform_index(g, (std::uint64_t{1} << c) - 2));
    if (!adm.contains(gold)) adm = LabelSet(adm.bits() | (std::uint64_t{1} << gold));
    const Mu mu = k % 3 == 0 ? Mu::infinite() : Mu::from(rng::uniform(g, 0, 3));
    const auto value = [&](const std::vector<double>& ww, int which) {
      const CcmModel m{Scorer(LinearScorer(c, p, ww)), mu, ConstraintMap(LabelSpace(c), {adm})};
      if (which == 0) return pointwise_loss(LossKind::cross_entropy, m, {0, x}, gold);
      if (which == 1) return pointwise_loss(LossKind::ell1, m, {0, x}, gold);
      std::vector<double> s(c);
      LinearScorer(c, p, ww).scores(x, s);
      return point_violation(s, adm, Mu{}).ce;
    };
    const std::vector<std::vector<double>> analytic{
        loss_gradient(LossKind::cross_entropy, w, {0, x}, gold, adm, mu),
        loss_gradient(LossKind::ell1, w, {0, x}, gold, adm, mu),
        violation_gradient(LossKind::cross_entropy, w, {0, x}, adm)};
    for (int which = 0; which < 3; ++which) {
      std::vector<double> fd(wv.size());
      for (std::size_t i = 0; i < wv.size(); ++i) {
        auto up = wv, dn = wv;
        up[i] += h;
        dn[i] -= h;
        fd[i] = (value(up, which) - value(dn, which)) / (2 * h);
      }
      std::vector<double> diff(fd.size());
      for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = analytic[which][i] - fd[i];
      CHECK(norm(diff) / std::max(norm(fd), 1e-8) < 1e-5);
    }
  }
}

TEST_CASE("pointwise relations between losses") {
  rng::Engine g(30);
  for (int k = 0; k < 10000; ++k) {
    const std::size_t c = 2 + rng::uniform_index(g, 7);
    std::vector<double> s(c);
    for (double& v : s) v = 3.0 * rng::normal(g);
    const std::size_t gold = rng::uniform_index(g, c);
    const auto m = point_metrics(s, LabelSet::all(c), Mu{}, gold);
    REQUIRE(m.loss_l1 <= m.loss_ce);
    const auto p = softmax(s);
    double dist1 = 0;
    for (std::size_t j = 0; j < c; ++j) dist1 += std::abs((j == gold ? 1.0 : 0.0) - p[j]);
    REQUIRE(std::abs(m.loss_l1 - 0.5 * dist1) < 1e-12);
  }
}
