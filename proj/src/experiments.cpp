#include "conlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "conlab/errors.hpp"
#include "conlab/rng.hpp"
#include "conlab/synthgen.hpp"
#include "conlab/tabular.hpp"
#include "experiments_internal.hpp"

namespace conlab::experiments {
namespace detail {

FiniteDistribution random_instance(std::uint64_t seed, std::size_t max_labels, std::size_t max_points, double noise,
                                   std::size_t feature_dim) {
  rng::Engine g(seed);
  FiniteSpec spec;
  spec.labels = 2 + rng::uniform_index(g, max_labels - 1);
  spec.points = 2 + rng::uniform_index(g, max_points - 1);
  spec.feature_dim = feature_dim;
  if (noise < 0.0) {
    const std::size_t k = 1 + rng::uniform_index(g, std::max<std::size_t>(spec.points / 2, 1));
    spec.noise = static_cast<double>(k) / static_cast<double>(spec.points);
  } else {
    spec.noise = noise;
  }
  spec.seed = g();
  return make_finite(spec).dist;
}

ScoreTable random_table(const FiniteDistribution& dist, rng::Engine& g, double scale) {
  const std::size_t c = dist.labels().count();
  std::vector<double> s(dist.size() * c);
  for (double& v : s) v = scale * rng::normal(g);
  return ScoreTable(c, std::move(s));
}

ScoreTable table_with_violation(const FiniteDistribution& dist, rng::Engine& g, const std::vector<double>& v) {
  const std::size_t c = dist.labels().count();
  std::vector<double> s(dist.size() * c);
  std::vector<double> w(c);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const LabelSet adm = dist.admissible(i);
    double in = 0.0, out = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      w[j] = rng::uniform(g, 0.5, 1.5);
      (adm.contains(j) ? in : out) += w[j];
    }
    for (std::size_t j = 0; j < c; ++j) {
      const double p = adm.contains(j) ? (1.0 - v[i]) * w[j] / in : v[i] * w[j] / out;
      s[i * c + j] = std::log(p);
    }
  }
  return ScoreTable(c, std::move(s));
}

std::string subject(const std::string& key, std::size_t value) { return key + "=" + std::to_string(value); }

std::string subject(const std::string& key, std::size_t value, const std::string& key2, double value2) {
  return subject(key, value) + ";" + key2 + "=" + tabular::format_real(value2);
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
    out[k] = lo * std::pow(hi / lo, f);
  }
  return out;
}

}  // namespace detail

namespace {

using config::Entry;

std::vector<std::pair<std::string, Entry>> resolve(const config::Config& cfg, const std::string& section,
                                                    const std::vector<ParamSpec>& specs) {
  for (const auto& [key, entry] : cfg.section(section)) {
    const bool known = std::any_of(specs.begin(), specs.end(), [&](const ParamSpec& p) { return p.key == key; });
    if (!known) throw ParseError("unknown key '" + key + "' in [" + section + "]", entry.line);
  }
  std::vector<std::pair<std::string, Entry>> out;
  for (const auto& p : specs) {
    out.emplace_back(p.key, cfg.has(section, p.key) ? cfg.section(section).at(p.key) : Entry{p.fallback, 0});
  }
  return out;
}

}  // namespace

Params::Params(const config::Config& cfg, const std::vector<ParamSpec>& params,
               const std::vector<ParamSpec>& tolerances, std::uint64_t seed)
    : params_(resolve(cfg, "params", params)), tolerances_(resolve(cfg, "tolerances", tolerances)), seed_(seed) {
  // Convert every value once so bad input fails before any work starts.
  for (const auto& [k, e] : params_) config::to_reals(e.value, e.line);
  for (const auto& [k, e] : tolerances_) {
    if (!(config::to_real(e.value, e.line) >= 0.0)) throw ParseError("tolerance must be nonnegative", e.line);
  }
}

const Entry& Params::lookup(const std::string& section, const std::string& key) const {
  const auto& list = section == "params" ? params_ : tolerances_;
  for (const auto& [k, e] : list) {
    if (k == key) return e;
  }
  throw std::logic_error("experiment reads undeclared " + section + " key '" + key + "'");
}

double Params::real(const std::string& key) const {
  const Entry& e = lookup("params", key);
  return config::to_real(e.value, e.line);
}

std::size_t Params::count(const std::string& key) const {
  const Entry& e = lookup("params", key);
  const std::uint64_t v = config::to_unsigned(e.value, e.line);
  if (v == 0) throw ParseError("'" + key + "' must be positive", e.line);
  return static_cast<std::size_t>(v);
}

std::vector<double> Params::reals(const std::string& key) const {
  const Entry& e = lookup("params", key);
  return config::to_reals(e.value, e.line);
}

double Params::tolerance(const std::string& key) const {
  const Entry& e = lookup("tolerances", key);
  return config::to_real(e.value, e.line);
}

const std::vector<CatalogEntry>& catalog() {
  using namespace detail;
  static const std::vector<CatalogEntry> entries = {
      {"noise_free_ccm_identity", "thm43_noise_free_identity", "ccm_risk_change.noise_free_identity",
       "constrained inference / change in cross-entropy risk, noise-free case",
       "strict inference lowers cross-entropy risk by exactly the cross-entropy violation",
       {{"instances", "20", "random noise-free distributions (ignored with distribution=)"},
        {"max_labels", "6", "labels drawn from 2..max_labels"},
        {"max_points", "50", "points drawn from 2..max_points"},
        {"scorers", "1", "random score tables per distribution"},
        {"score_scale", "3", "standard deviation of the random scores"}},
       {{"identity", "1e-9", "|delta_inf_ce - V_ce|"}},
       noise_free_ccm_identity},
      {"ccm_risk_lower_bound", "", "ccm_risk_change.lower_bound",
       "constrained inference / change in cross-entropy risk, general case",
       "cross-entropy risk change is at least V(f)(1 - e^-mu) - mu V_ora on a mu grid",
       {{"instances", "20", "random noisy distributions"},
        {"max_labels", "6", "labels drawn from 2..max_labels"},
        {"max_points", "50", "points drawn from 2..max_points"},
        {"score_scale", "3", "standard deviation of the random scores"},
        {"mu_min", "1e-3", "smallest grid mu"},
        {"mu_max", "40", "largest grid mu"},
        {"mu_points", "64", "geometric grid size"}},
       {{"bound", "1e-10", "slack on the lower bound"}},
       ccm_risk_lower_bound},
      {"ccm_marginal_benefit", "", "ccm_risk_change.marginal_benefit",
       "constrained inference / change in cross-entropy risk, small mu",
       "small mu helps iff V(f) > V_ora; the mu-derivative at 0 is V(f) - V_ora",
       {{"noise_rates", "0.2, 0.3, 0.5", "V_ora of the constructed distributions"},
        {"offset", "0.1", "V(f) - V_ora for the improving and degrading scorers"},
        {"labels", "4", "label count"},
        {"points", "10", "support size"}},
       {{"derivative", "1e-6", "|finite difference - (V(f) - V_ora)|"}},
       ccm_marginal_benefit},
      {"mu_selection_curve", "cor44_mu_curve", "mu_selection.curve",
       "constrained inference / choosing mu from the relative violation rate",
       "largest safe mu as a function of eta = V(f)/V_ora via Lambert W",
       {{"etas", "1, 1.5, 2, 3, 5", "checked eta values"},
        {"plot_max_eta", "10", "right end of the plotted curve"},
        {"plot_points", "200", "plotted curve resolution"}},
       {{"root", "1e-8", "|(1 - e^-mu) eta - mu| at the selected mu"}},
       mu_selection_curve},
      {"mu_selection_safety", "", "mu_selection.safe_risk",
       "constrained inference / choosing mu from the relative violation rate",
       "the selected mu never increases cross-entropy risk and solves the root equation",
       {{"instances", "20", "constructed noisy instances"},
        {"eta_min", "1.1", "smallest relative violation rate"},
        {"eta_max", "10", "largest relative violation rate"},
        {"labels", "4", "label count"},
        {"points", "40", "support size"}},
       {{"risk", "1e-10", "allowed risk increase"}, {"root", "1e-8", "root residual and bisection agreement"}},
       mu_selection_safety},
      {"lambert_w_accuracy", "", "mu_selection.lambert_w",
       "constrained inference / choosing mu (Lambert W evaluation)",
       "principal-branch Lambert W residuals on [-1/e, t_max] and closed-form anchors",
       {{"points", "10000", "evaluation points"}, {"t_max", "1000", "right end of the range"}},
       {{"residual", "1e-12", "relative residual |W e^W - t| / max(1, |t|)"},
        {"anchor", "1e-15", "closed-form anchors"}},
       lambert_w_accuracy},
      {"regularization_deviation", "", "regularization.deviation_bounds",
       "regularization with constraints / risk deviation of the regularized minimizer",
       "R(f_0) <= R(f_rho) <= R(f_0) + rho (V(f_0) - V(f_inf)) on enumerated grids, plus the tight construction",
       {{"grids", "50", "random scorer grids"},
        {"grid_size", "20", "scorers per grid"},
        {"labels", "4", "label count"},
        {"points", "10", "support size"},
        {"noise", "0.3", "V_ora of the grid distributions"},
        {"rho", "1", "tradeoff"},
        {"score_scale", "2", "standard deviation of the random scores"},
        {"a", "0.6", "tight construction: P_f0(oracle)"},
        {"b", "0.2", "tight construction: P_f0(excluded label)"},
        {"eps2", "0.1", "tight construction: violation decrease"}},
       {{"bound", "1e-10", "slack on both inequalities"}, {"arithmetic", "1e-12", "construction identities"}},
       regularization_deviation},
      {"regularization_violation_bound", "", "regularization.violation_bound",
       "regularization with constraints / small violation of the regularized minimizer",
       "population ERVM training gives V(f_rho) <= 1/rho + u with a baseline scorer of violation u",
       {{"instances", "3", "random noisy distributions"},
        {"labels", "4", "label count"},
        {"points", "12", "support size"},
        {"noise", "0.25", "V_ora"},
        {"rhos", "0.5, 1, 2, 5, 10", "tradeoff grid"},
        {"baseline_u", "1e-6", "target violation of the baseline scorer"},
        {"max_iters", "3000", "gradient descent iterations"}},
       {{"bound", "1e-6", "slack on the violation bound"}},
       regularization_violation_bound},
      {"ccm_complexity_shift", "", "ccm.complexity_invariance",
       "constrained inference / Rademacher complexity of the constrained family",
       "the CCM shift moves each draw's supremum by -mu sum eps v, so the complexity is unchanged",
       {{"labels", "4", "label count"},
        {"points", "30", "support size"},
        {"family_size", "12", "scorers in the enumerated family"},
        {"m", "20", "sample size"},
        {"draws", "200", "Rademacher draws for the enumerated family"},
        {"linear_draws", "400", "Rademacher draws for the linear family"},
        {"dim", "3", "feature dimension of the linear family"},
        {"mus", "0.5, 2", "CCM tradeoffs"}},
       {{"identity", "1e-10", "per-draw shift identity"}, {"z", "3", "allowed |difference| in pooled std errors"}},
       ccm_complexity_shift},
      {"on_training_ordering", "", "ccm.on_training_ordering",
       "constrained inference / on-training versus post-training",
       "on-training objective equals R_ce - V_ce at every iterate; on-training beats post-training",
       {{"instances", "5", "noise-free linear instances"},
        {"labels", "3", "label count"},
        {"points", "30", "support size"},
        {"dim", "2", "feature dimension before the bias feature"},
        {"restarts", "3", "random starts for min V_ce besides f_post and zero"},
        {"max_iters", "5000", "gradient descent iterations"}},
       {{"identity", "1e-9", "objective identity at every iterate"}, {"order", "1e-4", "per-inequality slack"}},
       on_training_ordering},
      {"combined_objective_gain", "", "combination.regularization_helps",
       "combining regularization and constrained inference / when it helps",
       "with rho below the threshold, the combined objective beats the ERM risk",
       {{"instances", "10", "qualifying noisy instances required"},
        {"attempts", "200", "candidate instances to try"},
        {"labels", "3", "label count"},
        {"points", "20", "support size"},
        {"dim", "2", "feature dimension before the bias feature"},
        {"noise", "0.2", "V_ora"},
        {"mu_fraction", "0.5", "mu as a fraction of the Lambert-W choice"},
        {"rho_fraction", "0.9", "rho as a fraction of the threshold"},
        {"max_iters", "3000", "gradient descent iterations"}},
       {{"risk", "1e-4", "slack on the strict improvement"}},
       combined_objective_gain},
      {"post_training_futility", "", "combination.futility",
       "combining regularization and constrained inference / when inference does not help",
       "for rho >= 1/(V_ora - V(f_inf)), post-training inference cannot reduce the risk of f_rho",
       {{"noise", "0.3", "V_ora"},
        {"min_violations", "0.1, 0.2", "V(f_inf) of the constructed grids"},
        {"points", "10", "support size"},
        {"rho_factors", "1, 2, 5", "rho as multiples of the threshold"},
        {"mu_min", "1e-3", "smallest grid mu"},
        {"mu_max", "40", "largest grid mu"},
        {"mu_points", "64", "geometric grid size"}},
       {{"delta", "1e-10", "allowed positive risk change"}},
       post_training_futility},
      {"margin_and_l1_changes", "", "ccm.margin_and_l1_risk_change",
       "constrained inference / change of margin and of l1 risk",
       "margin identity at mu = inf, l1 risk-change bounds, and the probability derivative in mu",
       {{"instances", "20", "random distributions per family"},
        {"max_labels", "6", "labels drawn from 2..max_labels"},
        {"max_points", "50", "points drawn from 2..max_points"},
        {"score_scale", "3", "standard deviation of the random scores"},
        {"mu_points", "64", "geometric grid size on [1e-3, 40]"},
        {"derivative_points", "200", "random scores for the mu-derivative"},
        {"step", "1e-5", "central difference step"}},
       {{"identity", "1e-9", "margin identity"},
        {"bound", "1e-10", "slack on the l1 bounds"},
        {"derivative", "1e-6", "derivative agreement"}},
       margin_and_l1_changes},
      {"generalization_gap", "", "regularization.generalization_gap",
       "regularization with constraints / generalization of risk and violation",
       "uniform deviation of l1 risk and violation exceeds the delta-bound in fewer than delta of resamples",
       {{"resamples", "200", "independent datasets"},
        {"labels", "4", "label count"},
        {"points", "40", "support size"},
        {"noise", "0.2", "V_ora"},
        {"family_size", "30", "enumerated scorers"},
        {"score_scale", "1", "standard deviation of the random scores"},
        {"m_labeled", "100", "labeled sample size"},
        {"m_unlabeled", "100", "unlabeled sample size"},
        {"delta", "0.1", "confidence parameter"},
        {"draws", "2000", "Rademacher draws"}},
       {{"fraction", "0", "slack on the exceedance fraction"}},
       generalization_gap},
      {"capped_linear_complexity", "", "regularization.capped_linear_complexity",
       "regularization with constraints / complexity of low-violation linear scorers",
       "Monte Carlo complexity of the violation-capped unit ball is below the closed-form bound",
       {{"labels", "5", "label count"},
        {"dim", "2", "feature dimension"},
        {"m", "100", "sample size"},
        {"t", "0.13", "violation cap, below 1/(c+2)"},
        {"draws", "100", "Rademacher draws"},
        {"population", "300", "support size of the feature distribution"},
        {"sigma2", "0.01", "per-coordinate feature variance"},
        {"mean", "0.8, 0.3", "feature mean alpha"}},
       {{"z", "3", "allowed excess in std errors"}},
       capped_linear_complexity},
      {"gradient_agreement", "", "losses.gradients",
       "losses / gradients of the cross-entropy loss, violation and strict inference",
       "analytic parameter gradients match central differences",
       {{"pairs", "100", "random (instance, scorer) pairs"},
        {"max_labels", "6", "labels drawn from 2..max_labels"},
        {"dim", "3", "feature dimension"},
        {"step", "1e-5", "central difference step"}},
       {{"relative", "1e-5", "relative gradient error"}},
       gradient_agreement},
      {"loss_relations", "", "losses.relations",
       "losses / relations between l1, cross-entropy and zero-one losses",
       "L <= L_ce, l1 equals half the 1-norm to the one-hot vector, scaled l1 tends to zero-one",
       {{"evaluations", "10000", "random score vectors"},
        {"max_labels", "8", "labels drawn from 2..max_labels"},
        {"score_scale", "3", "standard deviation of the random scores"},
        {"scale", "1000", "temperature for the zero-one limit"},
        {"min_gap", "0.5", "top-2 score gap required for the limit check"}},
       {{"half_norm", "1e-12", "l1 versus half 1-norm"}, {"limit", "1e-6", "scaled l1 versus zero-one"}},
       loss_relations},
  };
  return entries;
}

const CatalogEntry* find(const std::string& id) {
  for (const auto& e : catalog()) {
    if (e.id == id || (!e.alias.empty() && e.alias == id)) return &e;
  }
  return nullptr;
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig out;
  out.raw = config::Config::parse(in);
  static const std::vector<std::string> top = {"experiment", "seed", "output_dir", "distribution"};
  for (const auto& [key, e] : out.raw.section("")) {
    if (std::find(top.begin(), top.end(), key) == top.end()) throw ParseError("unknown key '" + key + "'", e.line);
  }
  for (const auto& name : out.raw.section_names()) {
    if (name != "" && name != "params" && name != "tolerances") {
      const auto& sec = out.raw.section(name);
      throw ParseError("unknown section [" + name + "]", sec.empty() ? 0 : sec.begin()->second.line);
    }
  }
  if (!out.raw.has("", "experiment")) throw ParseError("missing 'experiment' key", 0);
  const Entry& id = out.raw.section("").at("experiment");
  const CatalogEntry* entry = find(id.value);
  if (!entry) throw ParseError("unknown experiment '" + id.value + "' (see `lab list`)", id.line);
  out.id = entry->id;
  out.seed = out.raw.get_unsigned("", "seed", 1);
  out.output_dir = out.raw.get_string("", "output_dir", "out/" + out.id);
  if (out.raw.has("", "distribution")) out.distribution = out.raw.get_string("", "distribution", "");
  // Validate params and tolerances now.
  Params(out.raw, entry->params, entry->tolerances, out.seed);
  return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string(), 0);
  ExperimentConfig cfg = parse_experiment_config(in);
  if (cfg.distribution && cfg.distribution->is_relative()) cfg.distribution = path.parent_path() / *cfg.distribution;
  return cfg;
}

report::ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const CatalogEntry* entry = find(cfg.id);
  if (!entry) throw std::invalid_argument("unknown experiment " + cfg.id);
  Params params(cfg.raw, entry->params, entry->tolerances, cfg.seed);
  if (cfg.distribution) params.distribution = tabular::load_distribution(*cfg.distribution);
  report::ExperimentReport r;
  r.experiment = entry->id;
  r.seeds = {cfg.seed};
  const auto start = std::chrono::steady_clock::now();
  entry->run(params, r);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

report::ExperimentReport run_default(const std::string& id, std::uint64_t seed) {
  std::istringstream in("experiment = " + id + "\nseed = " + std::to_string(seed) + "\n");
  return run_experiment(parse_experiment_config(in));
}

void write_catalog(std::ostream& out, bool verbose) {
  for (const auto& e : catalog()) {
    out << e.id;
    if (!e.alias.empty()) out << " (alias " << e.alias << ")";
    out << "\n  tag: " << e.tag << "\n  anchor: " << e.anchor << "\n  " << e.description << '\n';
    if (!verbose) continue;
    for (const auto& p : e.params) out << "    [params] " << p.key << " = " << p.fallback << "  # " << p.help << '\n';
    for (const auto& p : e.tolerances) {
      out << "    [tolerances] " << p.key << " = " << p.fallback << "  # " << p.help << '\n';
    }
  }
}

}  // namespace conlab::experiments
