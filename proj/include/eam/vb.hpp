#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "eam/model.hpp"
#include "eam/random.hpp"

namespace eam {

// ---- factor covariance algebra ------------------------------------------------------------

// Precomputed (BBᵀ + D²)⁻¹ and log-determinant via the Woodbury identity.
class WoodburyFactor {
public:
  WoodburyFactor(const Eigen::MatrixXd& B, const Eigen::VectorXd& d);
  Eigen::VectorXd solve(const Eigen::VectorXd& x) const;
  double log_det() const { return log_det_; }
  bool repaired() const { return repaired_; }

private:
  Eigen::MatrixXd B_;
  Eigen::VectorXd inv_d2_;
  Eigen::LLT<Eigen::MatrixXd> core_;  // I + BᵀD⁻²B
  double log_det_ = 0.0;
  bool repaired_ = false;
};

Eigen::VectorXd woodbury_inverse_apply(const Eigen::MatrixXd& B, const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& x);

// ---- variational family --------------------------------------------------------------------

enum class VbStructure { Full, Blocked };  // VB and VBL

// N(mu, BBᵀ + diag(d²)) over coordinates [offset, offset + size).
struct FactorBlock {
  int offset = 0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd B;
  Eigen::VectorXd d;

  int size() const { return static_cast<int>(mu.size()); }
  int factors() const { return static_cast<int>(B.cols()); }
  Eigen::MatrixXd covariance() const;
};

struct VariationalParams {
  VbStructure structure = VbStructure::Full;
  std::vector<FactorBlock> blocks;

  int dim() const;
  int flat_size() const;
  // Per block: mu, vec B (column-major), d.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;  // dense, block-diagonal for VBL
};

// One standard-normal draw for each block plus a seed for target-side auxiliary noise.
struct QNoise {
  std::vector<Eigen::VectorXd> z, eta;
  std::uint64_t aux_seed = 0;
};
QNoise draw_noise(const VariationalParams& q, Rng& rng);
Eigen::VectorXd sample_q(const VariationalParams& q, const QNoise& noise);
double q_logpdf(const VariationalParams& q, const Eigen::VectorXd& x);

// Zero-mean start with a given diagonal scale; subject blocks use the leading dimension
// (`block_dim` x `blocks`) and the rest form the last block under VBL.
VariationalParams make_params(VbStructure structure, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd,
                              int factors, int block_dim = 0, int blocks = 0, int block_factors = 2);

// ---- targets -------------------------------------------------------------------------------

class VbTarget {
public:
  virtual ~VbTarget() = default;
  virtual int dim() const = 0;
  // log p at x on the sampling scale (Jacobians included); `aux_seed` drives any auxiliary draw.
  virtual double log_density(const Eigen::VectorXd& x, std::uint64_t aux_seed, Eigen::VectorXd* grad) const = 0;
};

// Hierarchical EAM target over θ̃, the θ₁ vector with each subject's non-decision-time lower
// bound on the data-dependent scale (DDM only). Σ is drawn from its exact conditional and
// log p(y, θ₁, Σ) − log p(Σ | θ₁, y) is returned, so the value does not depend on the Σ draw.
class HierarchicalTarget final : public VbTarget {
public:
  HierarchicalTarget(const SubjectLikelihood& lik, const PriorSpec& prior, bool control_variate = true);
  int dim() const override { return layout_.size(); }
  double log_density(const Eigen::VectorXd& x, std::uint64_t aux_seed, Eigen::VectorXd* grad) const override;

  const Theta1Layout& layout() const { return layout_; }
  bool reparameterized() const { return tau_slot_ >= 0; }
  Eigen::VectorXd to_theta1(const Eigen::VectorXd& x) const;
  Eigen::VectorXd from_theta1(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd sample_sigma(const Eigen::VectorXd& theta1, Rng& rng) const;

private:
  const SubjectLikelihood& lik_;
  const PriorSpec& prior_;
  Theta1Layout layout_;
  bool control_variate_;
  int tau_slot_ = -1;
};

// ---- ELBO ----------------------------------------------------------------------------------

// Single-draw ELBO term log p(u) − log q(u) at u = sample_q(q, noise). With `grad`, fills the
// reparameterization gradient over flatten(q) (score term omitted). `density` overrides the q
// used inside log q, for finite-difference checks with the sampling path held separately.
double elbo_draw(const VbTarget& target, const VariationalParams& q, const QNoise& noise,
                 Eigen::VectorXd* grad = nullptr, const VariationalParams* density = nullptr);

struct ElboEstimate {
  double value = 0.0;
  Eigen::VectorXd grad;
};
ElboEstimate elbo_estimate(const VbTarget& target, const VariationalParams& q, int draws, std::uint64_t seed,
                           std::uint64_t iteration, bool with_grad);

// ---- optimizers ----------------------------------------------------------------------------

enum class OptimizerKind { Adam, Adadelta };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double step_mu = 0.01, step_factor = 0.001;  // ADAM step sizes
  double beta1 = 0.9, beta2 = 0.99, adam_eps = 1e-8;
  double decay = 0.95, xi = 1e-7;              // ADADELTA
};

class Optimizer {
public:
  // `steps` holds one step size per coordinate (ADAM only).
  Optimizer(const OptimizerConfig& cfg, Eigen::VectorXd steps);
  // Ascent step on the flat parameter vector.
  void step(Eigen::VectorXd& lambda, const Eigen::VectorXd& grad);
  long iteration() const { return t_; }

private:
  OptimizerConfig cfg_;
  Eigen::VectorXd steps_, m_, v_;
  long t_ = 0;
};

// Per-coordinate ADAM step sizes for flatten(q).
Eigen::VectorXd step_sizes(const VariationalParams& q, const OptimizerConfig& cfg);

// Moving-average stopping rule: stop once the window-m mean has not improved for k updates.
class StoppingRule {
public:
  StoppingRule(int window = 100, int patience = 50);
  // Returns true when the run should stop.
  bool update(double elbo);
  bool improved() const { return improved_; }
  bool ready() const { return static_cast<int>(buffer_.size()) == window_; }
  double average() const { return average_; }
  double best() const { return best_; }

private:
  int window_, patience_;
  std::deque<double> buffer_;
  double sum_ = 0.0, average_ = 0.0, best_ = -INFINITY;
  int stale_ = 0;
  bool improved_ = false;
};

// ---- driver --------------------------------------------------------------------------------

struct VbConfig {
  VbStructure structure = VbStructure::Full;
  int factors = 40;          // VB, or the group block under VBL (default 10 there)
  int subject_factors = 2;   // VBL subject blocks
  int draws = 0;             // 0: 10 for VB, 1 for VBL
  OptimizerConfig optimizer;
  int window = 100, patience = 50;
  int max_iterations = 20000;
  std::uint64_t seed = 1;

  int effective_draws() const { return draws > 0 ? draws : (structure == VbStructure::Full ? 10 : 1); }
  void validate() const;
  static VbConfig for_structure(VbStructure s);
};

struct ElboTracePoint {
  int iteration;
  double elbo, moving_average;
};

struct VbResult {
  VariationalParams best;
  std::vector<ElboTracePoint> trace;
  int iterations = 0;
  bool converged = false;  // stopped by the moving-average rule rather than the cap
  double best_average = -INFINITY;
  double seconds = 0.0;
};

VbResult run_vb(const VbTarget& target, const VariationalParams& start, const VbConfig& cfg);

// Starting λ for the hierarchical target from θ₁-scale means and SDs.
VariationalParams hierarchical_start(const HierarchicalTarget& target, const VbConfig& cfg,
                                     const Eigen::VectorXd& theta1_mean, const Eigen::VectorXd& theta1_sd);

// θ₁ draws (rows) and matching Σ draws (vech rows, lower triangle by column) from q.
struct PosteriorDraws {
  Eigen::MatrixXd theta1, sigma;
};
PosteriorDraws sample_posterior(const HierarchicalTarget& target, const VariationalParams& q, int n,
                                std::uint64_t seed);

// ---- serialization -------------------------------------------------------------------------

std::string params_to_json(const VariationalParams& q, const std::vector<std::string>& names = {});
VariationalParams params_from_json(const std::string& text);
void write_trace_csv(const std::string& path, const std::vector<ElboTracePoint>& trace);

}  // namespace eam
