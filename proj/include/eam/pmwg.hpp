#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eam/model.hpp"
#include "eam/random.hpp"

namespace eam {

class GaussianMixture {
public:
  void add(double weight, Eigen::VectorXd mean, const Eigen::MatrixXd& cov);
  int components() const { return static_cast<int>(weights_.size()); }
  double weight(int k) const { return weights_[k]; }
  const Eigen::VectorXd& mean(int k) const { return means_[k]; }
  Eigen::MatrixXd covariance(int k) const;
  Eigen::VectorXd sample(Rng& rng) const;
  double log_density(const Eigen::VectorXd& x) const;

private:
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors_;
};

struct PmwgConfig {
  int burn_in = 500;
  int adaptation = 1500;
  int sampling = 1000;
  int particles_alpha = 100;
  int particles_beta = 500;
  double rw_scale = 0.5;     // random-walk covariance factor in the early stages
  double early_mix = 0.5;    // random-walk weight in the early stages; the rest is the prior
  double late_weights[3] = {0.65, 0.30, 0.05};
  int refresh_period = 20;
  int refresh_stop = 5000;
  int min_history = 200;
  double ridge = 1e-6;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = EAM_THREADS or hardware default

  int iterations() const { return burn_in + adaptation + sampling; }
  void validate() const;
};

// ---- Gibbs blocks --------------------------------------------------------------------------

struct GaussianParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
GaussianParams gibbs_mu_params(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& sigma,
                               const PriorSpec& prior);
Eigen::VectorXd gibbs_mu(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& sigma,
                         const PriorSpec& prior, Rng& rng);

struct IwParams {
  double df;
  Eigen::MatrixXd scale;
};
IwParams gibbs_sigma_params(const Eigen::MatrixXd& alpha, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& a, const PriorSpec& prior);
Eigen::MatrixXd gibbs_sigma(const Eigen::MatrixXd& alpha, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& a, const PriorSpec& prior, Rng& rng);

struct IgParams {
  double shape;
  Eigen::VectorXd rate;
};
IgParams gibbs_a_params(const Eigen::MatrixXd& sigma, const PriorSpec& prior);
Eigen::VectorXd gibbs_a(const Eigen::MatrixXd& sigma, const PriorSpec& prior, Rng& rng);

// ---- conditional Monte Carlo -----------------------------------------------------------------

struct CmcResult {
  Eigen::VectorXd value;
  int index = 0;             // 0 = the retained particle
  bool degenerate = false;   // every weight was zero; retained particle returned
  Eigen::VectorXd weights;   // normalized
};

// Particle 0 is the retained value; R−1 fresh particles come from the proposal. Target
// log-densities of the particles are evaluated with `log_target` (optionally in parallel).
CmcResult conditional_monte_carlo(const std::function<double(const Eigen::VectorXd&)>& log_target,
                                  const Eigen::VectorXd& retained, const GaussianMixture& proposal,
                                  int R, Rng& rng, bool parallel = false);

CmcResult cmc_alpha(const SubjectLikelihood& lik, int subject, const Eigen::VectorXd& retained,
                    const Eigen::MatrixXd& beta, const Eigen::VectorXd& mu,
                    const Eigen::MatrixXd& sigma, const GaussianMixture& proposal, int R, Rng& rng);

CmcResult cmc_beta(const SubjectLikelihood& lik, const Eigen::MatrixXd& alpha,
                   const Eigen::MatrixXd& retained, const PriorSpec& prior,
                   const GaussianMixture& proposal, int R, Rng& rng);

// ---- proposals -------------------------------------------------------------------------------

// Gaussian fit of a joint sample (rows = draws) conditioned on the trailing block.
class ConditionalGaussian {
public:
  ConditionalGaussian() = default;
  // Columns [0, target_dim) are the target block, the rest the conditioning block.
  ConditionalGaussian(const Eigen::MatrixXd& draws, int target_dim, double ridge = 1e-6);
  bool fitted() const { return fitted_; }
  bool repaired() const { return repaired_; }
  Eigen::VectorXd mean(const Eigen::VectorXd& given) const;
  const Eigen::MatrixXd& cov() const { return cov_; }

private:
  bool fitted_ = false, repaired_ = false;
  Eigen::VectorXd target_mean_, given_mean_;
  Eigen::MatrixXd gain_, cov_;
};

// Stage 1–2 mixture: random walk around the current value and the group distribution.
GaussianMixture early_alpha_proposal(const Eigen::VectorXd& current, const Eigen::VectorXd& mu,
                                     const Eigen::MatrixXd& sigma, const PmwgConfig& cfg);
// Stage 3 mixture: conditional fit, random walk with the fitted covariance, group distribution.
GaussianMixture late_alpha_proposal(const Eigen::VectorXd& current, const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& sigma, const Eigen::VectorXd& cond_mean,
                                    const Eigen::MatrixXd& cond_cov, const PmwgConfig& cfg);

// Kronecker form of the block-diagonal random-walk covariance for vec β (column-major).
Eigen::MatrixXd beta_walk_covariance(int beta_rows, const std::vector<Eigen::MatrixXd>& covariates);

// ---- driver ----------------------------------------------------------------------------------

struct ChainOutput {
  int effect_dim = 0, subjects = 0, beta_rows = 0, covariate_dim = 0;
  std::vector<int> stage;      // 1 burn-in, 2 adaptation, 3 sampling
  Eigen::MatrixXd mu;          // iterations x D
  Eigen::MatrixXd sigma;       // iterations x D(D+1)/2, lower triangle by column
  Eigen::MatrixXd a;           // iterations x D (no columns under the fixed IW prior)
  Eigen::MatrixXd beta;        // iterations x R·d, vec β column-major
  Eigen::MatrixXd alpha;       // iterations x J·D, subject-major
  Eigen::VectorXd alpha_move_rate;  // per subject, sampling stage
  double beta_move_rate = 0.0;
  int degenerate_steps = 0;
  int ridge_repairs = 0;
  double seconds = 0.0;

  // Rows of a given stage.
  Eigen::MatrixXd rows(const Eigen::MatrixXd& m, int stage_id) const;
  HierState state_at(int iteration) const;
};

using IterationCallback = std::function<void(int iteration, const HierState& state)>;

// Runs the sampler from `init`. `covariates` holds, per subject, the stacked covariate rows of
// its trials (n_j x d) and only feeds the early β random walk; may be empty without coefficients.
ChainOutput run_pmwg(const SubjectLikelihood& lik, const PriorSpec& prior, const HierState& init,
                     const PmwgConfig& cfg, const std::vector<Eigen::MatrixXd>& covariates = {},
                     const IterationCallback& on_iteration = nullptr);

// Stacked per-subject covariate matrices from a dataset.
std::vector<Eigen::MatrixXd> covariate_blocks(const Dataset& data);

// Names in the column order of ChainOutput.
std::vector<std::string> sigma_names(const std::vector<std::string>& slots);
std::vector<std::string> alpha_names(const std::vector<std::string>& slots, const std::vector<std::string>& subjects);
std::vector<std::string> beta_names(const std::vector<std::string>& rows, const std::vector<std::string>& covariates);

}  // namespace eam
