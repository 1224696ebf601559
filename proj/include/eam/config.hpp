#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "eam/design.hpp"
#include "eam/init.hpp"
#include "eam/io.hpp"
#include "eam/model.hpp"
#include "eam/pmwg.hpp"
#include "eam/sim.hpp"
#include "eam/vb.hpp"

namespace eam {

struct ModelConfig {
  ModelKind kind = ModelKind::Lba;
  int accumulators = 2;
  ContaminationSpec contamination;
  int quadrature_z = 32, quadrature_tau = 32;
  double lba_drift_sd = 1.0;
};

struct PriorConfig {
  CovariancePrior covariance = CovariancePrior::HuangWand;
  double mu_var = 3.0, beta_var = 9.0;
  double hw_nu = 2.0, hw_scale = 1.0;
  double iw_df = 20.0;
};

struct SimulateConfig {
  int subjects = 10;
  std::vector<int> trials{200};  // per condition of `attribute`
  std::string attribute = "cond";
  double covariate_sd = 1.0;
  bool subject_level_covariates = false;
  Eigen::VectorXd mu;        // transformed scale; empty: heuristic draw
  Eigen::VectorXd sigma_sd;  // diagonal; empty: 0.1 each
  Eigen::MatrixXd beta;      // empty: N(0, 0.5²) draws
};

struct OutputConfig {
  std::string dir = "runs";
  int posterior_draws = 1000;  // VB draws saved for diagnostics and PPC
};

struct PpcConfig {
  PpcSpec spec;
  int draws = 100;
};

struct RunConfig {
  std::string data_path;
  CsvSchema schema;
  ModelConfig model;
  LinkingDesign design;
  PriorConfig priors;
  PmwgConfig pmwg;
  VbConfig vb;
  std::string init_method = "map";  // map, pmwg or file
  std::string init_file;
  MapConfig map;
  PmwgInitConfig pmwg_init;
  SimulateConfig simulate;
  PpcConfig ppc;
  OutputConfig output;
  std::uint64_t seed = 1;
  std::string text;  // the source document
};

// Parses a TOML document; every error is a ConfigError naming the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Model with the configured design bound to the dataset's attributes.
Model build_model(const RunConfig& cfg, const Dataset& data);
PriorSpec build_prior(const PriorConfig& cfg, int effect_dim, int beta_size);

}  // namespace eam
