#include "doctest.h"

#include <sstream>
#include <stdexcept>

#include "conlab/constraint.hpp"
#include "conlab/errors.hpp"
#include "conlab/rng.hpp"
#include "conlab/tabular.hpp"
#include "support.hpp"

using namespace conlab;

namespace {

FiniteDistribution two_points(double w0, std::size_t oracle0) {
  ConstraintMap cmap(LabelSpace(3), {LabelSet::of({0, 1}), LabelSet::of({0, 1})});
  return FiniteDistribution(LabelSpace(3), {{w0, oracle0, {}}, {1.0 - w0, 0, {}}}, cmap);
}

}  // namespace

TEST_CASE("label space bounds") {
  CHECK_THROWS_AS(LabelSpace(1), std::invalid_argument);
  CHECK_THROWS_AS(LabelSpace(65), std::invalid_argument);
  CHECK(LabelSpace(64).count() == 64);
}

TEST_CASE("label sets") {
  const LabelSet s = LabelSet::of({0, 2});
  CHECK(s.contains(0));
  CHECK_FALSE(s.contains(1));
  CHECK(s.size() == 2);
  CHECK(s.complement(4) == LabelSet::of({1, 3}));
  CHECK(LabelSet::all(64).size() == 64);
  CHECK_THROWS_AS(LabelSet::of({64}), std::invalid_argument);
}

TEST_CASE("violation indicator examples") {
  const ConstraintMap m(LabelSpace(3), {LabelSet::all(3), LabelSet::of({0}), LabelSet::of({0, 1})});
  CHECK(violation_indicator(m, 0, 1) == 0);
  CHECK(violation_indicator(m, 1, 2) == 1);
  CHECK(violation_indicator(m, 2, 1) == 0);
  CHECK_THROWS_AS(violation_indicator(m, 3, 0), std::out_of_range);
  CHECK_THROWS_AS(violation_indicator(m, 0, 3), std::out_of_range);
}

TEST_CASE("violation indicator agrees with membership exhaustively") {
  for (std::size_t c = 2; c <= 8; ++c) {
    std::vector<LabelSet> sets;
    for (std::uint64_t bits = 1; bits < (1u << c); ++bits) sets.emplace_back(bits);
    const ConstraintMap m(LabelSpace(c), sets);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (std::size_t y = 0; y < c; ++y) {
        REQUIRE(violation_indicator(m, i, y) == (((sets[i].bits() >> y) & 1u) ? 0 : 1));
      }
    }
  }
}

TEST_CASE("constraint maps reject empty and out-of-range sets") {
  CHECK_THROWS_AS(ConstraintMap(LabelSpace(3), {LabelSet{}}), std::invalid_argument);
  CHECK_THROWS_AS(ConstraintMap(LabelSpace(3), {LabelSet::of({3})}), std::invalid_argument);
  const auto u = ConstraintMap::uniform(LabelSpace(4), 3, LabelSet::of({1, 2}));
  CHECK(u.size() == 3);
  CHECK(u.admissible(2) == LabelSet::of({1, 2}));
}

TEST_CASE("constraint from a feature rule") {
  const std::vector<std::vector<double>> xs{{-1.0}, {2.0}};
  const auto m = ConstraintMap::from_rule(LabelSpace(2), xs, [](std::span<const double> x) {
    return x[0] < 0 ? LabelSet::of({0}) : LabelSet::all(2);
  });
  CHECK(m.admissible(0) == LabelSet::of({0}));
  CHECK(m.admissible(1) == LabelSet::all(2));
}

TEST_CASE("distribution invariants") {
  const ConstraintMap m = ConstraintMap::uniform(LabelSpace(2), 2, LabelSet::all(2));
  CHECK_THROWS_AS(FiniteDistribution(LabelSpace(2), {{0.5, 0, {}}, {0.4, 0, {}}}, m), std::invalid_argument);
  CHECK_THROWS_AS(FiniteDistribution(LabelSpace(2), {{1.2, 0, {}}, {-0.2, 0, {}}}, m), std::invalid_argument);
  CHECK_THROWS_AS(FiniteDistribution(LabelSpace(2), {{0.5, 2, {}}, {0.5, 0, {}}}, m), std::invalid_argument);
  CHECK_THROWS_AS(FiniteDistribution(LabelSpace(2), {{0.5, 0, {1.0}}, {0.5, 0, {}}}, m), std::invalid_argument);
  CHECK_THROWS_AS(FiniteDistribution(LabelSpace(2), {{1.0, 0, {}}}, m), std::invalid_argument);
  CHECK_NOTHROW(FiniteDistribution(LabelSpace(2), {{0.5, 1, {}}, {0.5, 0, {}}}, m));
}

TEST_CASE("oracle noise rate examples") {
  CHECK(oracle_noise_rate(two_points(0.5, 0)) == 0.0);
  CHECK(oracle_noise_rate(two_points(0.5, 2)) == 0.5);
  CHECK(oracle_noise_rate(two_points(0.2, 2)) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("noise rate is zero iff no oracle label is excluded") {
  rng::Engine g(17);
  for (int k = 0; k < 50; ++k) {
    const auto d = testing_support::random_distribution(g, 6, 20, k % 2 ? -1.0 : 0.0);
    bool any = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      any = any || violation_indicator(d.constraint(), i, d.point(i).oracle) == 1;
    }
    CHECK((oracle_noise_rate(d) == 0.0) == !any);
  }
}

TEST_CASE("sampling datasets") {
  const auto d = two_points(0.5, 0);
  SUBCASE("empty draw") {
    const Dataset s = sample_dataset(d, 0, 0, 3);
    CHECK(s.labeled.empty());
    CHECK(s.unlabeled.empty());
  }
  SUBCASE("degenerate support") {
    const FiniteDistribution one(LabelSpace(2), {{1.0, 1, {0.5}}},
                                 ConstraintMap::uniform(LabelSpace(2), 1, LabelSet::all(2)));
    const Dataset s = sample_dataset(one, 5, 0, 9);
    REQUIRE(s.labeled.size() == 5);
    for (const auto& e : s.labeled) {
      CHECK(e.label == 1);
      CHECK(e.instance.id == 0);
      CHECK(e.instance.features == std::vector<double>{0.5});
    }
  }
  SUBCASE("frequencies") {
    const Dataset s = sample_dataset(d, 0, 100000, 42);
    double first = 0;
    for (const auto& x : s.unlabeled) first += x.id == 0;
    CHECK(std::abs(first / 1e5 - 0.5) < 0.01);
  }
  SUBCASE("reproducible") {
    CHECK(sample_dataset(d, 30, 40, 5) == sample_dataset(d, 30, 40, 5));
    CHECK_FALSE(sample_dataset(d, 30, 40, 5) == sample_dataset(d, 30, 40, 6));
  }
}

TEST_CASE("tabular distribution round trip is bit exact") {
  rng::Engine g(3);
  for (int k = 0; k < 10; ++k) {
    const auto d = testing_support::random_distribution(g, 8, 30, -1.0, 3);
    std::stringstream ss;
    tabular::write_distribution(ss, d);
    CHECK(tabular::read_distribution(ss) == d);
  }
}

TEST_CASE("tabular dataset round trip") {
  const auto d = two_points(0.3, 2);
  const Dataset s = sample_dataset(d, 7, 4, 1);
  std::stringstream ss;
  tabular::write_dataset(ss, s);
  CHECK(tabular::read_dataset(ss) == s);
}

TEST_CASE("tabular parse errors carry lines") {
  std::istringstream in("labels 3\npoints 1\nfeatures 0\n1.0 0\n");
  try {
    tabular::read_distribution(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(tabular::parse_real("1.5x"), ParseError);
  CHECK(tabular::parse_real(tabular::format_real(0.1)) == 0.1);
}
