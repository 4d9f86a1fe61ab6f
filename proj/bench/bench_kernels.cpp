// Serial reference versus OpenMP kernels on the hot paths: population
// metrics over a large support and a batch of Rademacher draws.
//
//   bench_kernels [points] [repeats]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "conlab/complexity.hpp"
#include "conlab/kernels.hpp"
#include "conlab/losses.hpp"
#include "conlab/rng.hpp"
#include "conlab/synthgen.hpp"

using namespace conlab;

template <class Fn>
double best_of(int repeats, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

int main(int argc, char** argv) {
  const std::size_t points = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

  FiniteSpec spec;
  spec.labels = 8;
  spec.points = points;
  spec.noise = 0.1;
  spec.feature_dim = 16;
  spec.seed = 3;
  const FiniteDistribution dist = make_finite(spec).dist;
  LinearScorer w(spec.labels, spec.feature_dim);
  rng::Engine g(11);
  for (double& x : w.weights()) x = rng::normal(g);
  const Scorer f = w;

  std::printf("threads %d, points %zu, labels %zu, dim %zu\n", kernels::max_threads(), points, spec.labels,
              spec.feature_dim);
  std::printf("%-28s %12s %12s %9s %12s\n", "kernel", "serial_s", "parallel_s", "speedup", "max_abs_diff");

  PopulationMetrics ms, mp;
  const double ts = best_of(repeats, [&] { ms = population_metrics_serial(dist, f, Mu::from(1.5)); });
  const double tp = best_of(repeats, [&] { mp = population_metrics(dist, f, Mu::from(1.5)); });
  const double diff = std::max({std::abs(ms.risk_ce - mp.risk_ce), std::abs(ms.risk_l1 - mp.risk_l1),
                                std::abs(ms.violation_ce - mp.violation_ce)});
  std::printf("%-28s %12.5f %12.5f %9.2f %12.3g\n", "population_metrics", ts, tp, ts / tp, diff);

  const LinearBallFamily ball{spec.labels, spec.feature_dim, 1.0, std::nullopt, nullptr};
  const std::size_t draws = 400, m = 200;
  ComplexityEstimate es, ep;
  const int saved = kernels::max_threads();
  kernels::set_threads(1);
  const double cs = best_of(repeats, [&] { es = expected_rademacher(ball, dist, m, draws, 5); });
  kernels::set_threads(saved);
  const double cp = best_of(repeats, [&] { ep = expected_rademacher(ball, dist, m, draws, 5); });
  std::printf("%-28s %12.5f %12.5f %9.2f %12.3g\n", "expected_rademacher(1 thr)", cs, cp, cs / cp,
              std::abs(es.mean - ep.mean));
  return 0;
}
