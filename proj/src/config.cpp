#include "eam/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "eam/common.hpp"
#include "eam/lba.hpp"
#include "eam/transforms.hpp"

namespace eam {

namespace {

using Keys = std::set<std::string>;

void check_keys(const toml::table& t, const std::string& where, const Keys& allowed) {
  for (const auto& [k, v] : t)
    if (!allowed.contains(std::string(k.str())))
      throw ConfigError("config: unknown key '" + std::string(k.str()) + "' in [" + where + "]");
}

const toml::table* section(const toml::table& root, const std::string& name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw ConfigError("config: '" + name + "' must be a table");
  return node->as_table();
}

std::string key_name(const std::string& where, const std::string& key) { return where + "." + key; }

double as_double(const toml::node& n, const std::string& name) {
  if (auto v = n.value<double>()) return *v;
  throw ConfigError("config: '" + name + "' must be a number");
}

void get(const toml::table& t, const std::string& where, const std::string& key, double& out) {
  if (const auto* n = t.get(key)) out = as_double(*n, key_name(where, key));
}

void get(const toml::table& t, const std::string& where, const std::string& key, int& out) {
  if (const auto* n = t.get(key)) {
    const auto v = n->value_exact<std::int64_t>();
    if (!v) throw ConfigError("config: '" + key_name(where, key) + "' must be an integer");
    out = static_cast<int>(*v);
  }
}

void get(const toml::table& t, const std::string& where, const std::string& key, std::uint64_t& out) {
  int v = 0;
  if (t.get(key)) {
    get(t, where, key, v);
    if (v < 0) throw ConfigError("config: '" + key_name(where, key) + "' must be non-negative");
    out = static_cast<std::uint64_t>(v);
  }
}

void get(const toml::table& t, const std::string& where, const std::string& key, bool& out) {
  if (const auto* n = t.get(key)) {
    const auto v = n->value_exact<bool>();
    if (!v) throw ConfigError("config: '" + key_name(where, key) + "' must be true or false");
    out = *v;
  }
}

void get(const toml::table& t, const std::string& where, const std::string& key, std::string& out) {
  if (const auto* n = t.get(key)) {
    const auto v = n->value_exact<std::string>();
    if (!v) throw ConfigError("config: '" + key_name(where, key) + "' must be a string");
    out = *v;
  }
}

void get(const toml::table& t, const std::string& where, const std::string& key, std::vector<std::string>& out) {
  if (const auto* n = t.get(key)) {
    const auto* arr = n->as_array();
    if (!arr) throw ConfigError("config: '" + key_name(where, key) + "' must be an array of strings");
    out.clear();
    for (const auto& e : *arr) {
      const auto v = e.value_exact<std::string>();
      if (!v) throw ConfigError("config: '" + key_name(where, key) + "' must be an array of strings");
      out.push_back(*v);
    }
  }
}

void get(const toml::table& t, const std::string& where, const std::string& key, std::vector<int>& out) {
  if (const auto* n = t.get(key)) {
    const auto* arr = n->as_array();
    if (!arr) throw ConfigError("config: '" + key_name(where, key) + "' must be an array of integers");
    out.clear();
    for (const auto& e : *arr) {
      const auto v = e.value_exact<std::int64_t>();
      if (!v) throw ConfigError("config: '" + key_name(where, key) + "' must be an array of integers");
      out.push_back(static_cast<int>(*v));
    }
  }
}

void get(const toml::table& t, const std::string& where, const std::string& key, Eigen::VectorXd& out) {
  if (const auto* n = t.get(key)) {
    const auto* arr = n->as_array();
    if (!arr) throw ConfigError("config: '" + key_name(where, key) + "' must be an array of numbers");
    out.resize(static_cast<Eigen::Index>(arr->size()));
    for (std::size_t i = 0; i < arr->size(); ++i) out[static_cast<Eigen::Index>(i)] = as_double((*arr)[i], key_name(where, key));
  }
}

// Array of rows.
void get(const toml::table& t, const std::string& where, const std::string& key, Eigen::MatrixXd& out) {
  if (const auto* n = t.get(key)) {
    const auto* arr = n->as_array();
    const std::string name = key_name(where, key);
    if (!arr) throw ConfigError("config: '" + name + "' must be an array of rows");
    std::vector<Eigen::VectorXd> rows;
    for (const auto& e : *arr) {
      const auto* r = e.as_array();
      if (!r) throw ConfigError("config: '" + name + "' must be an array of rows");
      Eigen::VectorXd row(static_cast<Eigen::Index>(r->size()));
      for (std::size_t i = 0; i < r->size(); ++i) row[static_cast<Eigen::Index>(i)] = as_double((*r)[i], name);
      if (!rows.empty() && row.size() != rows.front().size()) throw ConfigError("config: '" + name + "' rows differ in length");
      rows.push_back(row);
    }
    out.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
}

TransformSpec transform_for(const ModelConfig& m) {
  return m.kind == ModelKind::Lba ? lba_transform(m.accumulators) : ddm_transform();
}

int index_of(const std::vector<std::string>& names, const std::string& name, const std::string& what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("config: unknown " + what + " '" + name + "'");
  return static_cast<int>(it - names.begin());
}

LinkingDesign parse_design(const toml::table* t, const ModelConfig& m) {
  const TransformSpec spec = transform_for(m);
  const auto params = transformed_names(spec);
  if (!t) return identity_design(spec, false);
  check_keys(*t, "design", {"preset", "covariates", "conditions", "attribute", "covariate_params", "slots",
                            "beta_rows", "parameter"});
  std::string preset;
  get(*t, "design", "preset", preset);
  if (!preset.empty() && t->get("parameter"))
    throw ConfigError("config: [design] takes either a preset or explicit parameters, not both");
  if (preset == "identity") {
    bool cov = false;
    get(*t, "design", "covariates", cov);
    return identity_design(spec, cov);
  }
  if (preset == "lba_conditions") {
    if (m.kind != ModelKind::Lba || m.accumulators != 2)
      throw ConfigError("config: preset 'lba_conditions' needs a two-accumulator LBA");
    int conditions = 2;
    std::string attribute = "cond";
    std::vector<std::string> cov;
    get(*t, "design", "conditions", conditions);
    get(*t, "design", "attribute", attribute);
    get(*t, "design", "covariate_params", cov);
    std::vector<int> idx;
    for (const auto& c : cov) idx.push_back(index_of(params, c, "model parameter"));
    return lba_condition_design(conditions, attribute, idx);
  }
  if (!preset.empty()) throw ConfigError("config: unknown design preset '" + preset + "'");

  LinkingDesign d;
  get(*t, "design", "slots", d.slot_names);
  get(*t, "design", "beta_rows", d.beta_row_names);
  const auto* list = t->get("parameter") ? t->get("parameter")->as_array() : nullptr;
  if (!list || d.slot_names.empty())
    throw ConfigError("config: an explicit [design] needs 'slots' and one [[design.parameter]] per model parameter");
  if (list->size() != params.size())
    throw ConfigError("config: [[design.parameter]] must appear " + std::to_string(params.size()) +
                      " times, once per model parameter");
  for (std::size_t p = 0; p < list->size(); ++p) {
    const auto* pt = (*list)[p].as_table();
    const std::string where = "design.parameter." + params[p];
    if (!pt) throw ConfigError("config: [[design.parameter]] entries must be tables");
    check_keys(*pt, where, {"terms", "offset", "beta_row"});
    LinkRecipe r;
    get(*pt, where, "offset", r.offset);
    std::string beta_row;
    get(*pt, where, "beta_row", beta_row);
    if (!beta_row.empty()) r.beta_row = index_of(d.beta_row_names, beta_row, "beta row");
    const auto* terms = pt->get("terms") ? pt->get("terms")->as_array() : nullptr;
    if (!terms) throw ConfigError("config: '" + where + ".terms' must be an array of tables");
    for (const auto& node : *terms) {
      const auto* tt = node.as_table();
      if (!tt) throw ConfigError("config: '" + where + ".terms' must be an array of tables");
      check_keys(*tt, where + ".terms", {"slot", "scale", "attribute", "when"});
      LinkTerm term;
      std::string slot;
      get(*tt, where, "slot", slot);
      term.slot = index_of(d.slot_names, slot, "slot");
      get(*tt, where, "scale", term.scale);
      get(*tt, where, "attribute", term.attribute);
      if (const auto* w = tt->get("when")) {
        const auto* wt = w->as_table();
        if (!wt) throw ConfigError("config: '" + where + ".when' must be a table of attribute values");
        for (const auto& [k, v] : *wt)
          term.when.push_back(TermCondition{std::string(k.str()), as_double(v, where + ".when"), -1});
      }
      r.terms.push_back(std::move(term));
    }
    d.recipes.push_back(std::move(r));
  }
  return d;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  check_keys(root, "top level", {"seed", "data", "model", "design", "priors", "pmwg", "vb", "init", "output",
                                 "simulate", "ppc"});
  RunConfig c;
  c.text = text;
  get(root, "top", "seed", c.seed);
  c.pmwg.seed = c.vb.seed = c.map.seed = c.pmwg_init.pmwg.seed = c.seed;

  if (const auto* t = section(root, "data")) {
    check_keys(*t, "data", {"path", "subject", "rt", "response", "response_base", "attributes", "levels",
                            "covariates", "subject_level", "zscore"});
    get(*t, "data", "path", c.data_path);
    get(*t, "data", "subject", c.schema.subject);
    get(*t, "data", "rt", c.schema.rt);
    get(*t, "data", "response", c.schema.response);
    get(*t, "data", "response_base", c.schema.response_base);
    get(*t, "data", "attributes", c.schema.attributes);
    get(*t, "data", "covariates", c.schema.covariates);
    get(*t, "data", "subject_level", c.schema.subject_level);
    get(*t, "data", "zscore", c.schema.zscore);
    if (const auto* lv = section(*t, "levels"))
      for (const auto& [k, v] : *lv) {
        std::vector<std::string> names;
        get(*lv, "data.levels", std::string(k.str()), names);
        c.schema.levels[std::string(k.str())] = names;
      }
  }

  if (const auto* t = section(root, "model")) {
    check_keys(*t, "model", {"kind", "accumulators", "contamination_weight", "contamination_window",
                             "quadrature_z", "quadrature_tau", "drift_sd"});
    std::string kind = "lba";
    get(*t, "model", "kind", kind);
    if (kind == "lba") c.model.kind = ModelKind::Lba;
    else if (kind == "ddm") c.model.kind = ModelKind::Ddm;
    else throw ConfigError("config: model.kind must be 'lba' or 'ddm'");
    get(*t, "model", "accumulators", c.model.accumulators);
    if (c.model.kind == ModelKind::Ddm) c.model.accumulators = 2;
    if (c.model.accumulators < 2 || c.model.accumulators > kMaxAccumulators)
      throw ConfigError("config: model.accumulators must lie in [2, 16]");
    get(*t, "model", "contamination_weight", c.model.contamination.weight);
    get(*t, "model", "contamination_window", c.model.contamination.rt_window);
    get(*t, "model", "quadrature_z", c.model.quadrature_z);
    get(*t, "model", "quadrature_tau", c.model.quadrature_tau);
    get(*t, "model", "drift_sd", c.model.lba_drift_sd);
    if (!(c.model.contamination.weight >= 0.0 && c.model.contamination.weight < 1.0))
      throw ConfigError("config: model.contamination_weight must lie in [0, 1)");
    if (c.model.quadrature_z < 1 || c.model.quadrature_tau < 1)
      throw ConfigError("config: quadrature node counts must be positive");
  }

  c.design = parse_design(section(root, "design"), c.model);
  c.design.validate(transform_for(c.model).size());

  if (const auto* t = section(root, "priors")) {
    check_keys(*t, "priors", {"covariance", "mu_var", "beta_var", "hw_nu", "hw_scale", "iw_df"});
    std::string cov = "huang_wand";
    get(*t, "priors", "covariance", cov);
    if (cov == "huang_wand") c.priors.covariance = CovariancePrior::HuangWand;
    else if (cov == "inverse_wishart") c.priors.covariance = CovariancePrior::InverseWishart;
    else throw ConfigError("config: priors.covariance must be 'huang_wand' or 'inverse_wishart'");
    get(*t, "priors", "mu_var", c.priors.mu_var);
    get(*t, "priors", "beta_var", c.priors.beta_var);
    get(*t, "priors", "hw_nu", c.priors.hw_nu);
    get(*t, "priors", "hw_scale", c.priors.hw_scale);
    get(*t, "priors", "iw_df", c.priors.iw_df);
  }

  if (const auto* t = section(root, "pmwg")) {
    check_keys(*t, "pmwg", {"burn_in", "adaptation", "sampling", "particles_alpha", "particles_beta", "rw_scale",
                            "early_mix", "late_weights", "refresh_period", "refresh_stop", "min_history", "seed",
                            "threads"});
    auto& p = c.pmwg;
    get(*t, "pmwg", "burn_in", p.burn_in);
    get(*t, "pmwg", "adaptation", p.adaptation);
    get(*t, "pmwg", "sampling", p.sampling);
    get(*t, "pmwg", "particles_alpha", p.particles_alpha);
    get(*t, "pmwg", "particles_beta", p.particles_beta);
    get(*t, "pmwg", "rw_scale", p.rw_scale);
    get(*t, "pmwg", "early_mix", p.early_mix);
    Eigen::VectorXd w;
    get(*t, "pmwg", "late_weights", w);
    if (w.size() > 0) {
      if (w.size() != 3) throw ConfigError("config: pmwg.late_weights needs three entries");
      for (int i = 0; i < 3; ++i) p.late_weights[i] = w[i];
    }
    get(*t, "pmwg", "refresh_period", p.refresh_period);
    get(*t, "pmwg", "refresh_stop", p.refresh_stop);
    get(*t, "pmwg", "min_history", p.min_history);
    get(*t, "pmwg", "seed", p.seed);
    get(*t, "pmwg", "threads", p.threads);
  }
  c.pmwg.validate();

  if (const auto* t = section(root, "vb")) {
    check_keys(*t, "vb", {"structure", "factors", "subject_factors", "draws", "optimizer", "step_mu",
                          "step_factor", "window", "patience", "max_iterations", "seed"});
    std::string s = "vb";
    get(*t, "vb", "structure", s);
    if (s != "vb" && s != "vbl") throw ConfigError("config: vb.structure must be 'vb' or 'vbl'");
    const std::uint64_t seed = c.vb.seed;
    c.vb = VbConfig::for_structure(s == "vb" ? VbStructure::Full : VbStructure::Blocked);
    c.vb.seed = seed;
    get(*t, "vb", "factors", c.vb.factors);
    get(*t, "vb", "subject_factors", c.vb.subject_factors);
    get(*t, "vb", "draws", c.vb.draws);
    std::string opt = "adam";
    get(*t, "vb", "optimizer", opt);
    if (opt == "adam") c.vb.optimizer.kind = OptimizerKind::Adam;
    else if (opt == "adadelta") c.vb.optimizer.kind = OptimizerKind::Adadelta;
    else throw ConfigError("config: vb.optimizer must be 'adam' or 'adadelta'");
    get(*t, "vb", "step_mu", c.vb.optimizer.step_mu);
    get(*t, "vb", "step_factor", c.vb.optimizer.step_factor);
    get(*t, "vb", "window", c.vb.window);
    get(*t, "vb", "patience", c.vb.patience);
    get(*t, "vb", "max_iterations", c.vb.max_iterations);
    get(*t, "vb", "seed", c.vb.seed);
  }
  c.vb.validate();

  if (const auto* t = section(root, "init")) {
    check_keys(*t, "init", {"method", "file", "map_steps", "grad_tol", "prior_var", "step", "retries",
                            "pmwg_iterations", "average_last", "particles", "seed"});
    get(*t, "init", "method", c.init_method);
    if (c.init_method != "map" && c.init_method != "pmwg" && c.init_method != "file")
      throw ConfigError("config: init.method must be 'map', 'pmwg' or 'file'");
    get(*t, "init", "file", c.init_file);
    get(*t, "init", "map_steps", c.map.max_steps);
    get(*t, "init", "grad_tol", c.map.grad_tol);
    get(*t, "init", "prior_var", c.map.prior_var);
    get(*t, "init", "step", c.map.step);
    get(*t, "init", "retries", c.map.retries);
    get(*t, "init", "pmwg_iterations", c.pmwg_init.iterations);
    get(*t, "init", "average_last", c.pmwg_init.average_last);
    std::uint64_t seed = c.map.seed;
    get(*t, "init", "seed", seed);
    c.map.seed = c.pmwg_init.pmwg.seed = seed;
    int particles = c.pmwg_init.pmwg.particles_alpha;
    get(*t, "init", "particles", particles);
    c.pmwg_init.pmwg.particles_alpha = particles;
  }
  c.pmwg_init.pmwg.threads = c.map.threads = c.pmwg.threads;

  if (const auto* t = section(root, "simulate")) {
    check_keys(*t, "simulate", {"subjects", "trials", "attribute", "covariate_sd", "subject_level_covariates",
                                "mu", "sigma_sd", "beta"});
    auto& s = c.simulate;
    get(*t, "simulate", "subjects", s.subjects);
    get(*t, "simulate", "trials", s.trials);
    get(*t, "simulate", "attribute", s.attribute);
    get(*t, "simulate", "covariate_sd", s.covariate_sd);
    get(*t, "simulate", "subject_level_covariates", s.subject_level_covariates);
    get(*t, "simulate", "mu", s.mu);
    get(*t, "simulate", "sigma_sd", s.sigma_sd);
    get(*t, "simulate", "beta", s.beta);
    if (s.subjects < 1 || s.trials.empty()) throw ConfigError("config: simulate needs subjects and trials");
  }

  if (const auto* t = section(root, "ppc")) {
    check_keys(*t, "ppc", {"cells", "correct", "draws"});
    get(*t, "ppc", "cells", c.ppc.spec.cell_attributes);
    get(*t, "ppc", "correct", c.ppc.spec.correct_attribute);
    get(*t, "ppc", "draws", c.ppc.draws);
  }

  if (const auto* t = section(root, "output")) {
    check_keys(*t, "output", {"dir", "posterior_draws"});
    get(*t, "output", "dir", c.output.dir);
    get(*t, "output", "posterior_draws", c.output.posterior_draws);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Model build_model(const RunConfig& cfg, const Dataset& data) {
  LinkingDesign design = cfg.design;
  design.bind(data.attribute_names);
  if (design.beta_rows() > 0 && data.covariate_dim() == 0)
    throw ConfigError("config: the design has coefficient rows but the data declare no covariates");
  Model m(cfg.model.kind, cfg.model.accumulators, std::move(design), cfg.model.contamination,
          QuadratureRule(cfg.model.quadrature_z, cfg.model.quadrature_tau));
  m.lba_drift_sd = cfg.model.lba_drift_sd;
  return m;
}

PriorSpec build_prior(const PriorConfig& cfg, int effect_dim, int beta_size) {
  PriorSpec p = PriorSpec::defaults(effect_dim, beta_size, cfg.covariance);
  p.mu_cov *= cfg.mu_var / 3.0;
  p.beta_cov *= cfg.beta_var / 9.0;
  p.hw_nu = cfg.hw_nu;
  p.hw_scale = Eigen::VectorXd::Constant(effect_dim, cfg.hw_scale);
  p.iw_df = cfg.iw_df;
  p.validate(effect_dim, beta_size);
  return p;
}

}  // namespace eam
