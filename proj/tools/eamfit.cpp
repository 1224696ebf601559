// eamfit: command-line front end for simulation, fitting, initialization and checking of
// hierarchical evidence-accumulation models.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "eam/config.hpp"
#include "eam/ddm.hpp"
#include "eam/diagnostics.hpp"
#include "eam/init.hpp"
#include "eam/io.hpp"
#include "eam/lba.hpp"
#include "eam/parallel.hpp"
#include "eam/pmwg.hpp"
#include "eam/sim.hpp"
#include "eam/vb.hpp"
#include "eam/wfpt.hpp"

#ifndef EAM_GIT_DESCRIBE
#define EAM_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace eam;

namespace {

constexpr int kExitConfig = 2, kExitNumeric = 3;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_vector(m.row(r).transpose()));
  return rows;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
}

// ---- run directory -------------------------------------------------------------------------

class RunDir {
public:
  RunDir(const RunConfig& cfg, const std::string& command, const std::string& out, const std::vector<std::string>& args)
      : start_(std::chrono::steady_clock::now()) {
    path_ = out.empty() ? fs::path(cfg.output.dir) / command : fs::path(out);
    fs::create_directories(path_);
    write_file(path_ / "config.toml", cfg.text);
    write_file(path_ / "seed.txt", std::to_string(cfg.seed) + "\n");
    write_file(path_ / "git_describe.txt", std::string(EAM_GIT_DESCRIBE) + "\n");
    manifest_["command"] = command;
    manifest_["arguments"] = args;
    manifest_["seed"] = cfg.seed;
    manifest_["git_describe"] = EAM_GIT_DESCRIBE;
    manifest_["threads"] = thread_count();
    manifest_["files"] = {"config.toml", "seed.txt", "git_describe.txt"};
  }

  fs::path file(const std::string& name) {
    manifest_["files"].push_back(name);
    return path_ / name;
  }
  json& manifest() { return manifest_; }
  const fs::path& path() const { return path_; }

  void finish() {
    manifest_["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_["files"].push_back("manifest.json");
    write_file(path_ / "manifest.json", manifest_.dump(2) + "\n");
    std::cout << "wrote " << path_.string() << "\n";
  }

private:
  fs::path path_;
  json manifest_;
  std::chrono::steady_clock::time_point start_;
};

// ---- shared setup --------------------------------------------------------------------------

struct Problem {
  Dataset data;
  std::unique_ptr<Model> model;
  std::unique_ptr<EamLikelihood> lik;
  PriorSpec prior;
};

Problem load_problem(const RunConfig& cfg, const std::string& data_override, const fs::path& config_dir) {
  std::string path = data_override.empty() ? cfg.data_path : data_override;
  if (path.empty()) throw ConfigError("no data file: set [data] path or pass --data");
  if (data_override.empty() && fs::path(path).is_relative()) path = (config_dir / path).string();
  Problem p;
  IngestReport report;
  p.data = read_csv_file(path, cfg.schema, &report);
  for (const auto& note : report.notes) std::cerr << note << "\n";
  p.model = std::make_unique<Model>(build_model(cfg, p.data));
  const int C = p.model->choices();
  for (const auto& s : p.data.subjects)
    for (std::size_t i = 0; i < s.trials.size(); ++i)
      if (s.trials[i].response >= C)
        throw ConfigError("subject '" + s.id + "' trial " + std::to_string(i + 1) + ": response code out of range");
  p.lik = std::make_unique<EamLikelihood>(*p.model, p.data);
  p.prior = build_prior(cfg.priors, p.model->effect_dim(), p.model->beta_rows() * p.data.covariate_dim());
  return p;
}

std::vector<std::string> subject_ids(const Dataset& d) {
  std::vector<std::string> ids;
  for (const auto& s : d.subjects) ids.push_back(s.id);
  return ids;
}

struct GroupNames {
  std::vector<std::string> mu, sigma, a, beta, alpha;
};

GroupNames group_names(const Problem& p) {
  const auto& slots = p.model->design().slot_names;
  GroupNames g;
  for (const auto& s : slots) {
    g.mu.push_back("mu[" + s + "]");
    g.a.push_back("a[" + s + "]");
  }
  g.sigma = sigma_names(slots);
  g.beta = beta_names(p.model->design().beta_row_names, p.data.covariate_names);
  g.alpha = alpha_names(slots, subject_ids(p.data));
  return g;
}

std::vector<std::string> theta1_names(const Problem& p, const Theta1Layout& L) {
  const auto g = group_names(p);
  std::vector<std::string> names = g.alpha;
  names.insert(names.end(), g.beta.begin(), g.beta.end());
  names.insert(names.end(), g.mu.begin(), g.mu.end());
  if (L.has_log_a)
    for (const auto& s : p.model->design().slot_names) names.push_back("log_a[" + s + "]");
  return names;
}

void write_group(RunDir& run, const std::string& name, const std::vector<std::string>& columns,
                 const Eigen::MatrixXd& values, const std::vector<int>& stage) {
  if (values.cols() == 0) return;
  Table t;
  t.columns = {"iteration", "stage"};
  t.columns.insert(t.columns.end(), columns.begin(), columns.end());
  t.values.resize(values.rows(), values.cols() + 2);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    t.values(r, 0) = static_cast<double>(r);
    t.values(r, 1) = stage[static_cast<std::size_t>(r)];
  }
  t.values.rightCols(values.cols()) = values;
  write_table(run.file(name + ".csv").string(), t);
}

void write_chain(RunDir& run, const Problem& p, const ChainOutput& c) {
  const auto g = group_names(p);
  write_group(run, "mu", g.mu, c.mu, c.stage);
  write_group(run, "sigma", g.sigma, c.sigma, c.stage);
  write_group(run, "a", g.a, c.a, c.stage);
  write_group(run, "beta", g.beta, c.beta, c.stage);
  write_group(run, "alpha", g.alpha, c.alpha, c.stage);
}

// Posterior draws from q laid out like sampling-stage chain rows.
ChainOutput chain_from_draws(const PosteriorDraws& d, const Theta1Layout& L) {
  ChainOutput c;
  c.effect_dim = L.effect_dim;
  c.subjects = L.subjects;
  c.beta_rows = L.beta_rows;
  c.covariate_dim = L.covariate_dim;
  const Eigen::Index n = d.theta1.rows();
  c.stage.assign(static_cast<std::size_t>(n), 3);
  c.alpha = d.theta1.leftCols(L.subjects * L.effect_dim);
  c.beta = d.theta1.middleCols(L.beta_offset(), L.beta_size());
  c.mu = d.theta1.middleCols(L.mu_offset(), L.effect_dim);
  c.a = L.has_log_a ? Eigen::MatrixXd(d.theta1.middleCols(L.log_a_offset(), L.effect_dim).array().exp())
                    : Eigen::MatrixXd(n, 0);
  c.sigma = d.sigma;
  return c;
}

Eigen::MatrixXd stage_rows(const Table& t, int stage) {
  const int sc = t.column("stage");
  if (sc < 0) throw ConfigError("chain table without a stage column");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < t.values.rows(); ++r)
    if (t.values(r, sc) == stage) keep.push_back(r);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), t.values.cols() - 2);
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = t.values.row(keep[i]).tail(out.cols());
  return out;
}

std::vector<std::string> value_columns(const Table& t) { return {t.columns.begin() + 2, t.columns.end()}; }

// ---- subcommands ---------------------------------------------------------------------------

struct Common {
  std::string config, out, data;
  std::vector<std::string> args;
  fs::path config_dir() const { return fs::path(config).parent_path(); }
};

int cmd_simulate(const Common& o) {
  const RunConfig cfg = load_config(o.config);
  const auto& sc = cfg.simulate;
  const bool covs = !cfg.schema.covariates.empty();
  const std::uint64_t seed = cfg.seed;
  CovariateGenerator gen;
  if (covs) {
    const int d = static_cast<int>(cfg.schema.covariates.size());
    gen = [&, d](int subject, int, Rng& rng) {
      if (sc.subject_level_covariates) {
        Rng r = substream(seed, 0x5c, static_cast<std::uint64_t>(subject));
        return Eigen::VectorXd(sc.covariate_sd * standard_normal(d, r));
      }
      return Eigen::VectorXd(sc.covariate_sd * standard_normal(d, rng));
    };
  }
  Dataset skel = make_skeleton(sc.subjects, sc.trials, sc.attribute, cfg.schema.covariates, gen, seed);
  const Model model = build_model(cfg, skel);
  const int D = model.effect_dim(), R = model.beta_rows(), d = skel.covariate_dim();

  GroupTruth truth;
  truth.mu = sc.mu;
  if (truth.mu.size() == 0) {
    Rng rng = substream(seed, 0x5d);
    const double nominal_min_rt = 0.3;  // heuristic draws need a fastest response
    truth.mu = effects_for(model, skel, model.transform().to_unconstrained(heuristic_natural(model, nominal_min_rt, rng),
                                                                          nominal_min_rt));
  }
  if (truth.mu.size() != D) throw ConfigError("simulate.mu needs " + std::to_string(D) + " entries");
  Eigen::VectorXd sd = sc.sigma_sd.size() ? sc.sigma_sd : Eigen::VectorXd::Constant(D, 0.1);
  if (sd.size() != D) throw ConfigError("simulate.sigma_sd needs " + std::to_string(D) + " entries");
  truth.sigma = sd.cwiseAbs2().asDiagonal();
  truth.beta = sc.beta;
  if (truth.beta.size() == 0) {
    Rng rng = substream(seed, 0x5e);
    truth.beta = Eigen::Map<const Eigen::MatrixXd>(Eigen::VectorXd(0.5 * standard_normal(R * d, rng)).data(), R, d);
  }
  if (truth.beta.rows() != R || truth.beta.cols() != d)
    throw ConfigError("simulate.beta must be " + std::to_string(R) + " x " + std::to_string(d));

  const auto sim = simulate_dataset(model, truth, skel, seed);
  RunDir run(cfg, "simulate", o.out, o.args);
  write_csv_file(run.file("data.csv").string(), sim.data, cfg.schema);
  json t;
  t["slots"] = model.design().slot_names;
  t["mu"] = to_vector(truth.mu);
  t["sigma"] = matrix_json(truth.sigma);
  t["beta"] = matrix_json(truth.beta);
  t["alpha"] = matrix_json(sim.alpha.transpose());
  t["subjects"] = subject_ids(sim.data);
  write_file(run.file("truth.json"), t.dump(2) + "\n");
  run.manifest()["trials"] = sim.data.trial_count();
  run.finish();
  return 0;
}

int cmd_fit_pmwg(const Common& o) {
  const RunConfig cfg = load_config(o.config);
  const Problem p = load_problem(cfg, o.data, o.config_dir());
  RunDir run(cfg, "fit-pmwg", o.out, o.args);
  const HierState start = heuristic_state(*p.lik, p.prior, cfg.pmwg.seed);
  const auto chain = run_pmwg(*p.lik, p.prior, start, cfg.pmwg, covariate_blocks(p.data));
  write_chain(run, p, chain);
  auto& m = run.manifest();
  m["method"] = "pmwg";
  m["iterations"] = cfg.pmwg.iterations();
  m["alpha_move_rate"] = to_vector(chain.alpha_move_rate);
  m["beta_move_rate"] = chain.beta_move_rate;
  m["degenerate_steps"] = chain.degenerate_steps;
  m["ridge_repairs"] = chain.ridge_repairs;
  m["sampler_seconds"] = chain.seconds;
  run.finish();
  return 0;
}

InitResult run_init(const RunConfig& cfg, const Problem& p, const VbConfig& vb, const std::string& method) {
  if (method == "map") return map_init(*p.lik, p.prior, vb, cfg.map);
  if (method == "pmwg") return pmwg_init(*p.lik, p.prior, vb, cfg.pmwg_init);
  throw ConfigError("unknown initialization method '" + method + "'");
}

void record_init(RunDir& run, const Problem& p, const HierarchicalTarget& target, const InitResult& r,
                 const std::string& method) {
  const auto names = theta1_names(p, target.layout());
  write_file(run.file("lambda0.json"), params_to_json(r.lambda, names) + "\n");
  Table t{names, r.theta1.transpose()};
  write_table(run.file("theta1.csv").string(), t);
  json fits = json::array();
  for (std::size_t j = 0; j < r.fits.size(); ++j)
    fits.push_back({{"subject", p.data.subjects[j].id}, {"steps", r.fits[j].steps},
                    {"converged", r.fits[j].converged}, {"restarts", r.fits[j].restarts},
                    {"objective", r.fits[j].objective}});
  run.manifest()["init"] = {{"method", method}, {"seconds", r.seconds}, {"subject_fits", fits},
                            {"subject_level_covariates", r.subject_level_covariates}};
}

int cmd_init(const Common& o, const std::string& method) {
  const RunConfig cfg = load_config(o.config);
  const Problem p = load_problem(cfg, o.data, o.config_dir());
  RunDir run(cfg, "init-" + method, o.out, o.args);
  const HierarchicalTarget target(*p.lik, p.prior);
  record_init(run, p, target, run_init(cfg, p, cfg.vb, method), method);
  run.finish();
  return 0;
}

int cmd_fit_vb(const Common& o, const std::string& structure, std::string init, const std::string& init_file) {
  RunConfig cfg = load_config(o.config);
  if (!structure.empty()) {
    const auto s = structure == "vb" ? VbStructure::Full : VbStructure::Blocked;
    if (s != cfg.vb.structure) {
      VbConfig fresh = VbConfig::for_structure(s);
      fresh.seed = cfg.vb.seed;
      fresh.optimizer = cfg.vb.optimizer;
      fresh.window = cfg.vb.window;
      fresh.patience = cfg.vb.patience;
      fresh.max_iterations = cfg.vb.max_iterations;
      fresh.draws = cfg.vb.draws;
      cfg.vb = fresh;
    }
  }
  if (init.empty()) init = cfg.init_method;
  const Problem p = load_problem(cfg, o.data, o.config_dir());
  RunDir run(cfg, "fit-vb", o.out, o.args);
  const HierarchicalTarget target(*p.lik, p.prior);
  VariationalParams start;
  if (init == "file") {
    const std::string path = init_file.empty() ? cfg.init_file : init_file;
    if (path.empty()) throw ConfigError("--init file needs --init-file or [init] file");
    start = params_from_json(read_file(path));
    if (start.dim() != target.dim() || start.structure != cfg.vb.structure)
      throw ConfigError("initial variational parameters do not match the model or structure");
    run.manifest()["init"] = {{"method", "file"}, {"file", path}};
  } else {
    const InitResult r = run_init(cfg, p, cfg.vb, init);
    record_init(run, p, target, r, init);
    start = r.lambda;
  }
  const VbResult res = run_vb(target, start, cfg.vb);
  const auto names = theta1_names(p, target.layout());
  write_file(run.file("lambda.json"), params_to_json(res.best, names) + "\n");
  write_trace_csv(run.file("elbo_trace.csv").string(), res.trace);
  const auto draws = sample_posterior(target, res.best, cfg.output.posterior_draws, cfg.vb.seed);
  write_chain(run, p, chain_from_draws(draws, target.layout()));
  auto& m = run.manifest();
  m["method"] = cfg.vb.structure == VbStructure::Full ? "vb" : "vbl";
  m["iterations"] = res.iterations;
  m["converged"] = res.converged;
  m["best_average_elbo"] = res.best_average;
  m["optimizer_seconds"] = res.seconds;
  run.finish();
  return 0;
}

int cmd_ppc(const Common& o, const std::string& run_dir) {
  const RunConfig cfg = load_config(o.config);
  const Problem p = load_problem(cfg, o.data, o.config_dir());
  const fs::path src(run_dir);
  const Eigen::MatrixXd alpha = stage_rows(read_table((src / "alpha.csv").string()), 3);
  Eigen::MatrixXd beta(alpha.rows(), 0);
  if (fs::exists(src / "beta.csv")) beta = stage_rows(read_table((src / "beta.csv").string()), 3);
  const int D = p.model->effect_dim(), J = static_cast<int>(p.data.subjects.size());
  const int R = p.model->beta_rows(), d = p.data.covariate_dim();
  if (alpha.cols() != D * J || beta.cols() != R * d) throw ConfigError("ppc: run does not match the configured model and data");
  if (alpha.rows() == 0) throw ConfigError("ppc: run has no sampling-stage draws");
  const int n = std::min<int>(cfg.ppc.draws, static_cast<int>(alpha.rows()));
  std::vector<EffectDraw> draws;
  for (int i = 0; i < n; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(static_cast<double>(i) * alpha.rows() / n);
    EffectDraw e;
    e.alpha = Eigen::Map<const Eigen::MatrixXd>(Eigen::VectorXd(alpha.row(r).transpose()).data(), D, J);
    e.beta = Eigen::Map<const Eigen::MatrixXd>(Eigen::VectorXd(beta.row(r).transpose()).data(), R, d);
    draws.push_back(std::move(e));
  }
  RunDir run(cfg, "ppc", o.out, o.args);
  const auto rows = posterior_predictive(*p.model, p.data, draws, cfg.ppc.spec, cfg.seed, src.filename().string());
  std::ofstream out(run.file("ppc.csv"));
  out << "block,condition,statistic,q025,q25,q50,q75,q975,observed\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.block << ',' << r.condition << ',' << r.statistic;
    for (double q : r.quantiles) out << ',' << q;
    out << ',' << r.observed << '\n';
  }
  run.manifest()["source_run"] = run_dir;
  run.manifest()["draws"] = n;
  run.finish();
  return 0;
}

std::vector<ParamSummary> summarize_run(const fs::path& dir, bool with_alpha) {
  std::vector<ParamSummary> all;
  for (const char* group : {"mu", "sigma", "a", "beta", "alpha"}) {
    if (std::string(group) == "alpha" && !with_alpha) continue;
    const fs::path f = dir / (std::string(group) + ".csv");
    if (!fs::exists(f)) continue;
    const Table t = read_table(f.string());
    const auto s = summarize(stage_rows(t, 3), value_columns(t));
    all.insert(all.end(), s.begin(), s.end());
  }
  if (all.empty()) throw ConfigError("diag: no chain files in '" + dir.string() + "'");
  return all;
}

int cmd_diag(const std::string& run_dir, const std::string& compare, bool with_alpha, const std::string& out,
             const std::vector<std::string>& args) {
  const fs::path src(run_dir);
  const RunConfig cfg = load_config((src / "config.toml").string());
  const auto summary = summarize_run(src, with_alpha);
  RunDir run(cfg, "diag", out.empty() ? (src / "diag").string() : out, args);
  json js = json::array();
  std::ofstream csv(run.file("summary.csv"));
  csv << "name,mean,sd,q025,q50,q975,iact,iact_window\n" << std::setprecision(10);
  for (const auto& s : summary) {
    csv << s.name << ',' << s.mean << ',' << s.sd << ',' << s.q025 << ',' << s.q50 << ',' << s.q975 << ','
        << (s.iact.defined ? std::to_string(s.iact.value) : "NA") << ',' << s.iact.window << '\n';
    js.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"q025", s.q025}, {"q50", s.q50},
                  {"q975", s.q975}, {"iact", s.iact.defined ? json(s.iact.value) : json(nullptr)}});
  }
  write_file(run.file("summary.json"), js.dump(2) + "\n");
  if (!compare.empty()) {
    // the other run is the reference, this one the approximation
    const auto ref = summarize_run(fs::path(compare), with_alpha);
    const auto report = compare_moments(ref, summary);
    std::ofstream cc(run.file("comparison.csv"));
    cc << "name,mean_reference,mean_approx,sd_reference,sd_approx,standardized_gap\n" << std::setprecision(10);
    for (const auto& r : report.rows)
      cc << r.name << ',' << r.mean_reference << ',' << r.mean_approx << ',' << r.sd_reference << ',' << r.sd_approx
         << ',' << r.standardized_gap << '\n';
    run.manifest()["unmatched"] = report.unmatched;
  }
  run.manifest()["source_run"] = run_dir;
  run.finish();
  return 0;
}

Boundary parse_boundary(const std::string& s) {
  if (s == "lower" || s == "0") return Boundary::Lower;
  if (s == "upper" || s == "1") return Boundary::Upper;
  throw ConfigError("boundary must be 'lower' or 'upper'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical evidence-accumulation models: simulation, PMwG and VB fitting, diagnostics"};
  app.require_subcommand(1);
  Common o;
  for (int i = 0; i < argc; ++i) o.args.push_back(argv[i]);

  auto add_common = [&](CLI::App* sub, bool data) {
    sub->add_option("-c,--config", o.config, "TOML configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "run directory (default: [output] dir / subcommand)");
    if (data) sub->add_option("-d,--data", o.data, "CSV data file, overriding [data] path");
  };

  auto* simulate = app.add_subcommand("simulate", "simulate a data set from [simulate], [model] and [design]");
  add_common(simulate, false);
  auto* fit_pmwg = app.add_subcommand("fit-pmwg", "fit with particle Metropolis within Gibbs");
  add_common(fit_pmwg, true);
  auto* fit_vb = app.add_subcommand("fit-vb", "fit with variational Bayes");
  add_common(fit_vb, true);
  std::string structure, init, init_file;
  fit_vb->add_option("--structure", structure, "vb (full factor covariance) or vbl (blocked)")
      ->check(CLI::IsMember({"vb", "vbl"}));
  fit_vb->add_option("--init", init, "starting values: map, pmwg or file")->check(CLI::IsMember({"map", "pmwg", "file"}));
  fit_vb->add_option("--init-file", init_file, "variational parameters JSON for --init file");
  auto* init_map = app.add_subcommand("init-map", "starting variational parameters from per-subject MAP fits");
  add_common(init_map, true);
  auto* init_pmwg = app.add_subcommand("init-pmwg", "starting variational parameters from a short PMwG run");
  add_common(init_pmwg, true);
  auto* ppc = app.add_subcommand("ppc", "posterior predictive summaries from a fitted run");
  add_common(ppc, true);
  std::string run_dir;
  ppc->add_option("-r,--run", run_dir, "run directory with chain files")->required()->check(CLI::ExistingDirectory);
  auto* diag = app.add_subcommand("diag", "posterior summaries and IACT of a fitted run");
  std::string compare, diag_out;
  bool with_alpha = false;
  diag->add_option("-r,--run", run_dir, "run directory with chain files")->required()->check(CLI::ExistingDirectory);
  diag->add_option("--compare", compare, "reference run (e.g. PMwG) to compare moments against")
      ->check(CLI::ExistingDirectory);
  diag->add_flag("--alpha", with_alpha, "include random effects");
  diag->add_option("-o,--out", diag_out, "output directory (default: <run>/diag)");

  auto* wfpt = app.add_subcommand("wfpt-eval", "first-passage-time density of the simple diffusion");
  double t = 0, v = 0, a = 1, w = 0.5, eps = kDefaultEpsilon;
  std::string boundary = "lower";
  wfpt->add_option("--t", t, "decision time")->required();
  wfpt->add_option("--v", v, "drift");
  wfpt->add_option("--a", a, "boundary separation");
  wfpt->add_option("--w", w, "relative start point");
  wfpt->add_option("--boundary", boundary, "lower or upper");
  wfpt->add_option("--eps", eps, "series accuracy");

  auto* ddm = app.add_subcommand("ddm-eval", "full DDM density and log-density gradient");
  double rt = 0;
  DdmParams dp{1.0, 0.5, 1.0, 0.5, 0.2, 0.3, 0.1};
  int nodes = 32;
  ddm->add_option("--rt", rt, "response time")->required();
  ddm->add_option("--boundary", boundary, "lower or upper");
  ddm->add_option("--mu-v", dp.mu_v);
  ddm->add_option("--s-v", dp.s_v);
  ddm->add_option("--a", dp.a);
  ddm->add_option("--mu-z", dp.mu_z);
  ddm->add_option("--s-z", dp.s_z);
  ddm->add_option("--mu-tau", dp.mu_tau);
  ddm->add_option("--s-tau", dp.s_tau);
  ddm->add_option("--nodes", nodes, "quadrature nodes per dimension");

  auto* lba = app.add_subcommand("lba-eval", "LBA joint choice-RT density and gradient");
  int choice = 0;
  double b = 1.0, A = 0.5, tau = 0.2, s = 1.0;
  std::vector<double> drifts{1.0, 0.5};
  lba->add_option("--rt", rt, "response time")->required();
  lba->add_option("--choice", choice, "0-based accumulator");
  lba->add_option("--b", b);
  lba->add_option("--A", A);
  lba->add_option("--v", drifts, "drift per accumulator")->delimiter(',');
  lba->add_option("--tau", tau);
  lba->add_option("--s", s, "drift SD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*fit_pmwg) return cmd_fit_pmwg(o);
    if (*fit_vb) return cmd_fit_vb(o, structure, init, init_file);
    if (*init_map) return cmd_init(o, "map");
    if (*init_pmwg) return cmd_init(o, "pmwg");
    if (*ppc) return cmd_ppc(o, run_dir);
    if (*diag) return cmd_diag(run_dir, compare, with_alpha, diag_out, o.args);
    if (*wfpt) {
      const SimpleDiffusionParams p{v, a, w, t};
      const auto plan = choose_representation(t / (a * a), eps);
      json j{{"density", wfpt_density(parse_boundary(boundary), p, eps)},
             {"representation", plan.representation == Representation::SmallTime ? "small_time" : "large_time"},
             {"kappa", plan.kappa}};
      std::cout << j.dump() << "\n";
      return 0;
    }
    if (*ddm) {
      const auto g = ddm_density_grad(parse_boundary(boundary), rt, dp, QuadratureRule(nodes, nodes));
      json j{{"density", g.density},
             {"grad_log", {{"mu_v", g.grad_log[0]}, {"s_v", g.grad_log[1]}, {"a", g.grad_log[2]},
                           {"mu_z", g.grad_log[3]}, {"s_z", g.grad_log[4]}, {"mu_tau", g.grad_log[5]},
                           {"s_tau", g.grad_log[6]}}}};
      std::cout << j.dump() << "\n";
      return 0;
    }
    if (*lba) {
      LbaParams p;
      p.b = b;
      p.A = A;
      p.tau = tau;
      p.s = s;
      p.v = Eigen::Map<const Eigen::VectorXd>(drifts.data(), static_cast<Eigen::Index>(drifts.size()));
      check_params(p);
      if (choice < 0 || choice >= p.accumulators()) throw ConfigError("--choice out of range");
      Eigen::VectorXd grad(p.gradient_size());
      const double dens = lba_density_grad(choice, rt, p, grad);
      json j{{"density", dens}, {"grad", to_vector(grad)}};
      std::cout << j.dump() << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
