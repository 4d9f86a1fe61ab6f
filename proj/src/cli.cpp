#include "conlab/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>

#include "conlab/config.hpp"
#include "conlab/errors.hpp"
#include "conlab/experiments.hpp"
#include "conlab/report.hpp"
#include "conlab/synthgen.hpp"
#include "conlab/tabular.hpp"

namespace conlab::cli {
namespace {

constexpr const char* kFooter = R"(Exit codes:
  0  every check passed (run), or the command succeeded
  1  at least one check failed; failing records go to stderr and summary.txt
  2  usage error: bad arguments, malformed or invalid config / synthspec

Environment:
  LAB_OUTPUT_DIR  overrides output_dir of every `lab run` config

Run output (in the output directory):
  report.csv    experiment,tag,subject,relation,lhs,rhs,tolerance,slack,pass
                relation is le|eq|ge|lt; slack >= 0 iff pass = 1 (lt: slack > 0)
  summary.txt   seeds, counts, wall time, notes and failing records
  <plot>.csv    curve,x,y
  <plot>.svg    the same curves as a standalone SVG chart

Run config (key = value, '#' comments):
  experiment = <id or alias from `lab list`>
  seed = <u64>            default 1
  output_dir = <path>     default out/<id>
  distribution = <path>   optional distribution file (relative to the config)
  [params]                experiment keys, see `lab list --verbose`
  [tolerances]            tolerance overrides, see `lab list --verbose`

Synthspec for `lab gen` (key = value):
  kind = finite            labels points noise seed feature_dim uniform_weights bias
  kind = gaussian          labels dim separation radius mean sigma2 m seed
  kind = prop32_tightness  a b eps1 eps2 rho
  kind = lemma33_baseline  t
  kind = thm52_grid        noise min_violation points
  Proof constructions also write <file>.<k>.scores, one score table per scorer.

Distribution file format:
  labels <c>
  points <n>
  features <p>
  then one line per point: weight oracle admissible_mask f_1 ... f_p
)";

using config::Config;

std::size_t get_count(const Config& c, const char* key, std::size_t fallback) {
  return static_cast<std::size_t>(c.get_unsigned("", key, fallback));
}

void require_keys(const Config& c, const std::set<std::string>& allowed) {
  for (const auto& [key, e] : c.section("")) {
    if (!allowed.count(key)) throw ParseError("unknown key '" + key + "' for this kind", e.line);
  }
  for (const auto& name : c.section_names()) {
    if (!name.empty()) throw ParseError("synthspec takes no sections", c.section(name).begin()->second.line);
  }
}

ProofConstruction construction(const Config& c, const std::string& kind) {
  if (kind == "prop32_tightness") {
    require_keys(c, {"kind", "a", "b", "eps1", "eps2", "rho"});
    const Prop32Params d;
    const Prop32Params p{c.get_real("", "a", d.a), c.get_real("", "b", d.b), c.get_real("", "eps1", d.eps1),
                         c.get_real("", "eps2", d.eps2), c.get_real("", "rho", d.rho)};
    return make_prop32_tightness(p);
  }
  if (kind == "lemma33_baseline") {
    require_keys(c, {"kind", "t"});
    return make_proof_construction(kind, {c.get_real("", "t", 50.0)});
  }
  if (kind == "thm52_grid") {
    require_keys(c, {"kind", "noise", "min_violation", "points"});
    Thm52Params p;
    p.noise = c.get_real("", "noise", p.noise);
    p.min_violation = c.get_real("", "min_violation", p.min_violation);
    p.points = get_count(c, "points", p.points);
    return make_thm52_grid(p);
  }
  throw ParseError("unknown kind '" + kind + "'", c.section("").at("kind").line);
}

int generate(const std::string& spec_path, const std::string& out_path, std::ostream& out, std::ostream& err) {
  const Config c = Config::load(spec_path);
  if (!c.has("", "kind")) throw ParseError("missing 'kind' key", 0);
  const std::string kind = c.get_string("", "kind", "");
  if (kind == "finite") {
    require_keys(c, {"kind", "labels", "points", "noise", "seed", "feature_dim", "uniform_weights", "bias"});
    FiniteSpec s;
    s.labels = get_count(c, "labels", s.labels);
    s.points = get_count(c, "points", s.points);
    s.noise = c.get_real("", "noise", s.noise);
    s.seed = c.get_unsigned("", "seed", s.seed);
    s.feature_dim = get_count(c, "feature_dim", s.feature_dim);
    s.uniform_weights = c.get_unsigned("", "uniform_weights", 1) != 0;
    s.bias = c.get_unsigned("", "bias", 0) != 0;
    const GeneratedDistribution g = make_finite(s);
    tabular::save_distribution(out_path, g.dist);
    if (g.warning) err << "warning: " << *g.warning << '\n';
    out << "noise_rate " << tabular::format_real(g.noise_rate) << '\n';
    return kExitOk;
  }
  if (kind == "gaussian") {
    require_keys(c, {"kind", "labels", "dim", "separation", "radius", "mean", "sigma2", "m", "seed"});
    GaussianSpec s;
    s.labels = get_count(c, "labels", s.labels);
    s.dim = get_count(c, "dim", s.dim);
    s.separation = c.get_real("", "separation", s.separation);
    s.radius = c.get_real("", "radius", s.radius);
    s.mean = c.get_reals("", "mean", std::vector<double>(s.dim, 0.0));
    s.sigma2 = c.get_real("", "sigma2", s.sigma2);
    s.m = get_count(c, "m", s.m);
    s.seed = c.get_unsigned("", "seed", s.seed);
    const GaussianFeatures g = make_gaussian_features(s);
    tabular::save_distribution(out_path, g.dist);
    out << "acceptance_rate " << tabular::format_real(g.acceptance_rate) << "\nsample_sigma2 "
        << tabular::format_real(g.sample_sigma2) << '\n';
    return kExitOk;
  }

  const ProofConstruction pc = construction(c, kind);
  tabular::save_distribution(out_path, pc.dist);
  for (std::size_t k = 0; k < pc.scorers.size(); ++k) {
    std::ofstream f(out_path + "." + std::to_string(k) + ".scores");
    f << "# " << pc.scorer_names[k] << '\n';
    tabular::write_score_table(f, *pc.scorers[k].table());
  }
  out << "construction " << pc.name << "\ndesigned_for " << pc.designed_for << '\n';
  for (const auto& [k, v] : pc.metadata) out << k << ' ' << tabular::format_real(v) << '\n';
  return kExitOk;
}

int run(const std::string& path, std::ostream& out, std::ostream& err) {
  experiments::ExperimentConfig cfg = experiments::load_experiment_config(path);
  if (const char* env = std::getenv("LAB_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  const report::ExperimentReport r = experiments::run_experiment(cfg);
  report::write_all(cfg.output_dir, r);
  out << r.experiment << ": " << r.records.size() - r.failures() << "/" << r.records.size() << " checks passed -> "
      << cfg.output_dir.string() << '\n';
  if (r.passed()) return kExitOk;
  for (const auto& c : r.records) {
    if (c.pass) continue;
    err << "FAIL " << c.tag << ' ' << c.subject << ": lhs " << tabular::format_real(c.lhs) << ' '
        << report::to_string(c.relation) << " rhs " << tabular::format_real(c.rhs) << " (tol "
        << tabular::format_real(c.tolerance) << ")\n";
  }
  return kExitCheckFailed;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"lab: label-constraint theory verification runner"};
  app.footer(kFooter);
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run one experiment config");
  std::string config_path;
  run_cmd->add_option("config", config_path, "experiment config file")->required();

  auto* list_cmd = app.add_subcommand("list", "print the experiment catalog");
  bool verbose = false;
  list_cmd->add_flag("-v,--verbose", verbose, "include parameters and tolerances");

  auto* gen_cmd = app.add_subcommand("gen", "generate a distribution from a synthspec");
  std::string spec_path, out_path;
  gen_cmd->add_option("synthspec", spec_path, "synthspec file")->required();
  gen_cmd->add_option("-o,--output", out_path, "output distribution file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*list_cmd) {
      experiments::write_catalog(out, verbose);
      return kExitOk;
    }
    if (*gen_cmd) return generate(spec_path, out_path, out, err);
    return run(config_path, out, err);
  } catch (const ParseError& e) {
    err << "error: " << (*run_cmd ? config_path : spec_path) << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const FeasibilityError& e) {
    err << "error: infeasible parameters: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    // PreconditionError and ConstructionError land here too.
    err << "error: invalid parameters: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace conlab::cli
