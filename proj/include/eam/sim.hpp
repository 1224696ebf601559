#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eam/data.hpp"
#include "eam/ddm.hpp"
#include "eam/lba.hpp"
#include "eam/model.hpp"
#include "eam/random.hpp"

namespace eam {

struct SimulatedTrial {
  int response = 0;
  double rt = 0.0;
};

// Exact race; draws where no accumulator finishes are redrawn and counted.
SimulatedTrial simulate_lba_trial(const LbaParams& p, Rng& rng, long* redraws = nullptr);

struct DdmSimOptions {
  double dt = 1e-4;
  double max_decision_time = 20.0;
};
// Euler–Maruyama with a Brownian-bridge crossing check between grid points; unit diffusion
// coefficient. Response 0 = lower boundary, 1 = upper.
SimulatedTrial simulate_ddm_trial(const DdmParams& p, Rng& rng, const DdmSimOptions& opt = {},
                                  long* redraws = nullptr);

SimulatedTrial simulate_trial(const Model& model, const Eigen::VectorXd& natural, Rng& rng,
                              const DdmSimOptions& opt = {});

// Replaces responses and RTs of every trial with draws from the model at the given effects.
// Subject j uses stream substream(seed, stream_tag, j).
Dataset simulate_responses(const Model& model, const Dataset& skeleton, const Eigen::MatrixXd& alpha,
                           const Eigen::MatrixXd& beta, std::uint64_t seed,
                           std::uint64_t stream_tag = 0, const DdmSimOptions& opt = {});

struct GroupTruth {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // positive semidefinite; zero gives identical subjects
  Eigen::MatrixXd beta;
};

struct SimulatedDataset {
  Dataset data;
  Eigen::MatrixXd alpha;  // effect_dim x J
};

// Draws α_j ~ N(μ, Σ) and simulates trials on the skeleton's attributes and covariates.
SimulatedDataset simulate_dataset(const Model& model, const GroupTruth& truth,
                                  const Dataset& skeleton, std::uint64_t seed,
                                  const DdmSimOptions& opt = {});

using CovariateGenerator = std::function<Eigen::VectorXd(int subject, int trial, Rng& rng)>;

// J subjects; trials of condition k get attribute `attribute` = k and appear counts[k] times.
Dataset make_skeleton(int subjects, const std::vector<int>& counts, const std::string& attribute,
                      const std::vector<std::string>& covariate_names,
                      const CovariateGenerator& covariates, std::uint64_t seed);

// ---- posterior predictive --------------------------------------------------------------------

struct PpcSpec {
  std::vector<std::string> cell_attributes;  // cells = distinct value combinations
  std::string correct_attribute;             // attribute holding the correct response index
};

struct CellStatistic {
  std::string condition;
  std::string statistic;  // "median_rt" or "accuracy"
  double value = 0.0;
};

// Subject-averaged per-cell median RT and accuracy (proportion of response 1 when no
// correct-response attribute is configured).
std::vector<CellStatistic> cell_statistics(const Dataset& data, const PpcSpec& spec);

struct EffectDraw {
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd beta;
};

struct PpcRow {
  std::string block;
  std::string condition;
  std::string statistic;
  std::array<double, 5> quantiles{};  // 2.5, 25, 50, 75, 97.5 percent
  double observed = 0.0;
};

std::vector<PpcRow> posterior_predictive(const Model& model, const Dataset& observed,
                                         const std::vector<EffectDraw>& draws, const PpcSpec& spec,
                                         std::uint64_t seed, const std::string& block = "posterior",
                                         const DdmSimOptions& opt = {});

// Linear-interpolation sample quantile.
double sample_quantile(std::vector<double> values, double q);

}  // namespace eam
