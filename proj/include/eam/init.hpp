#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "eam/model.hpp"
#include "eam/pmwg.hpp"
#include "eam/random.hpp"
#include "eam/vb.hpp"

namespace eam {

// Domain-knowledge draw of the model's natural parameters (one value per transform slot),
// valid by construction for every response at or above `min_rt`.
Eigen::VectorXd heuristic_natural(const Model& model, double min_rt, Rng& rng);

// Least-squares effect vector whose link at β = 0 reproduces `transformed` on every distinct
// attribute pattern in the data (minimum-norm when the design is rank deficient).
Eigen::VectorXd effects_for(const Model& model, const Dataset& data, const Eigen::VectorXd& transformed);

// Group mean from a heuristic draw, subjects scattered N(μ, 0.1 I) and redrawn until their
// likelihood is finite, Σ = 0.1 I, β = 0, a = 1.
HierState heuristic_state(const EamLikelihood& lik, const PriorSpec& prior, std::uint64_t seed);

struct MapConfig {
  int max_steps = 2000;
  double grad_tol = 1e-5;
  double prior_var = 10.0;  // regularizing N(0, v I) on α_j and vec β^(j)
  double step = 0.01;
  int retries = 10;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct SubjectFit {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd beta;  // R x d, zero when covariates are subject-level or absent
  double objective = 0.0;
  int steps = 0;
  int restarts = 0;
  bool converged = false;  // gradient norm fell below the tolerance
};

struct InitResult {
  Eigen::VectorXd theta1;      // θ₁-scale start (Theta1Layout order)
  VariationalParams lambda;    // λ₀ on the sampling scale
  std::vector<SubjectFit> fits;
  bool subject_level_covariates = false;
  double seconds = 0.0;
};

// True when every subject's covariate rows are identical across its trials.
bool covariates_subject_level(const Dataset& data);

// Regularized per-subject MAP fit from `start`; covariate coefficients are fitted unless
// `fit_beta` is false.
SubjectFit map_subject(const SubjectLikelihood& lik, int subject, const Eigen::VectorXd& start, bool fit_beta,
                       const MapConfig& cfg);

// θ₁ from per-subject fits: α̂_j, their average for μ, the average β̂^(j), log a = 0.
Eigen::VectorXd assemble_theta1(const std::vector<SubjectFit>& fits, const Theta1Layout& layout);

// λ₀ around `theta1` with every B and d entry set to 0.01; throws NumericError unless the ELBO
// estimate there is finite.
VariationalParams start_lambda(const HierarchicalTarget& target, const VbConfig& cfg, const Eigen::VectorXd& theta1);

InitResult map_init(const EamLikelihood& lik, const PriorSpec& prior, const VbConfig& vb, const MapConfig& cfg);

struct PmwgInitConfig {
  int iterations = 200;
  int average_last = 100;
  PmwgConfig pmwg;  // stage lengths are overridden
};

// Average of the last draws of a chain in θ₁ layout (log a averaged on the log scale).
Eigen::VectorXd average_draws(const ChainOutput& chain, const Theta1Layout& layout, int last);

InitResult pmwg_init(const EamLikelihood& lik, const PriorSpec& prior, const VbConfig& vb,
                     const PmwgInitConfig& cfg);

}  // namespace eam
