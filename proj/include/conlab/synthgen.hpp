#pragma once

// Synthetic distributions: random finite supports with a chosen noise rate,
// the small constructions used in the regularization and combination
// arguments, and feature distributions inside a ball with target moments.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conlab/constraint.hpp"
#include "conlab/scoring.hpp"

namespace conlab {

struct FiniteSpec {
  std::size_t labels = 3;
  std::size_t points = 10;
  double noise = 0.0;  // target V_ora
  std::uint64_t seed = 0;
  std::size_t feature_dim = 2;
  bool uniform_weights = true;
  bool bias = false;  // append a constant-1 feature
};

struct GeneratedDistribution {
  FiniteDistribution dist;
  double noise_rate = 0.0;       // oracle_noise_rate(dist), recomputed
  std::optional<std::string> warning;  // set when the target was not met exactly
};

/// Admissible sets are random nonempty proper subsets; noisy points (chosen
/// by seed) get an oracle label outside their set. Non-uniform weights use a
/// greedy weight subset for the noisy points. Throws std::invalid_argument
/// for c < 2, no points, or a target outside [0, 1].
GeneratedDistribution make_finite(const FiniteSpec& spec);

struct Prop32Params {
  double a = 0.6, b = 0.2, eps1 = 0.05, eps2 = 0.1, rho = 1.0;
};

struct ProofConstruction {
  std::string name;
  FiniteDistribution dist;
  std::vector<Scorer> scorers;
  std::vector<std::string> scorer_names;
  /// What the construction is built to make tight or trigger.
  std::string designed_for;
  /// Construction-specific numbers, e.g. the tightness gap rho eps2 - eps1.
  std::vector<std::pair<std::string, double>> metadata;
};

/// One point, c = 3, oracle 0, label 2 excluded. f_0 puts (a, 1-a-b, b) on
/// the labels and f_inf (a-eps1, 1-a-b+eps1+eps2, b-eps2). Throws
/// ConstructionError unless eps1 < rho eps2 and all probabilities lie in (0, 1).
ProofConstruction make_prop32_tightness(const Prop32Params& p);

/// The baseline f_t on `dist`; the self-check requires V(f_t) <= (c-1) e^-t.
ProofConstruction make_lemma33_baseline(const FiniteDistribution& dist, double t);

struct Thm52Params {
  double noise = 0.3;          // V_ora, a multiple of 1/points
  double min_violation = 0.1;  // V(f_inf)
  std::size_t points = 10;
};

/// c = 3, C = {0, 1} everywhere, noisy points have oracle 2. The grid holds
/// constant-probability scorers with P(2) = v for v from min_violation up,
/// and P(0) : P(1) = q : 1-q for q in {0.2, 0.5, 0.8, 0.95}.
ProofConstruction make_thm52_grid(const Thm52Params& p);

/// Dispatch by name: prop32_tightness, lemma33_baseline (noise-free 5-point
/// support, c = 3), thm52_grid.
ProofConstruction make_proof_construction(const std::string& name, const std::vector<double>& params);

struct GaussianSpec {
  std::size_t labels = 5;
  std::size_t dim = 2;
  double separation = 4.0;
  double radius = 1.0;
  std::vector<double> mean;  // alpha; empty means the origin
  double sigma2 = 0.01;
  std::size_t m = 1000;
  std::uint64_t seed = 0;
};

struct GaussianFeatures {
  FiniteDistribution dist;  // uniform weights over the m draws
  LinearScorer planted;
  double acceptance_rate = 1.0;
  std::vector<double> sample_mean;
  double sample_sigma2 = 0.0;
};

/// Rejection sampling inside the ball from a Gaussian whose mean and scale
/// are tuned by fixed-point iteration so the truncated moments hit the
/// targets. Labels come from a planted linear scorer whose last row is the
/// mean of the others, so the oracle never picks label c-1 and the
/// constraint is C(x) = {0..c-2}. Throws FeasibilityError when acceptance
/// falls below 1% or the tuned moments miss by more than 5%.
GaussianFeatures make_gaussian_features(const GaussianSpec& spec);

}  // namespace conlab
