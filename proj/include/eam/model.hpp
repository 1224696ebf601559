#pragma once

#include <Eigen/Core>
#include <limits>
#include <vector>

#include "eam/common.hpp"
#include "eam/data.hpp"
#include "eam/design.hpp"
#include "eam/quadrature.hpp"
#include "eam/transforms.hpp"
#include "eam/wfpt.hpp"

namespace eam {

enum class ModelKind { Lba, Ddm };

struct ContaminationSpec {
  double weight = 1e-4;
  double rt_window = 2.0;  // uniform RT component on (0, rt_window)
};

// Evidence-accumulation likelihood for single trials. DDM responses: 0 = lower, 1 = upper.
class Model {
public:
  Model(ModelKind kind, int accumulators, LinkingDesign design, ContaminationSpec contamination = {},
        QuadratureRule quad = QuadratureRule(), double epsilon = kDefaultEpsilon);

  ModelKind kind() const { return kind_; }
  int choices() const { return choices_; }
  const TransformSpec& transform() const { return transform_; }
  const LinkingDesign& design() const { return design_; }
  LinkingDesign& design() { return design_; }
  const ContaminationSpec& contamination() const { return contamination_; }
  int effect_dim() const { return design_.slots(); }
  int beta_rows() const { return design_.beta_rows(); }
  // Effect slot holding the log lower non-decision bound when the design maps it one-to-one;
  // -1 otherwise.
  int tau_lower_slot() const;
  double lba_drift_sd = 1.0;

  double raw_density(const Trial& trial, const Eigen::VectorXd& natural) const;
  // Returns the raw density and fills d density / d natural.
  double raw_density_grad(const Trial& trial, const Eigen::VectorXd& natural,
                          Eigen::VectorXd& grad) const;
  double contaminant_density(const Trial& trial) const;
  double contaminated_density(const Trial& trial, const Eigen::VectorXd& natural) const;
  // Floored log of the contaminated density.
  double trial_log_density(const Trial& trial, const Eigen::VectorXd& natural) const;

  double subject_loglik(const Subject& subject, const Eigen::VectorXd& alpha,
                        const Eigen::MatrixXd& beta) const;
  // Adds d/d alpha and d/d beta of the subject log-likelihood into the given buffers.
  double subject_loglik_grad(const Subject& subject, const Eigen::VectorXd& alpha,
                             const Eigen::MatrixXd& beta, Eigen::VectorXd& grad_alpha,
                             Eigen::MatrixXd& grad_beta) const;

private:
  bool valid(const Eigen::VectorXd& natural) const;

  ModelKind kind_;
  int choices_;
  TransformSpec transform_;
  LinkingDesign design_;
  ContaminationSpec contamination_;
  QuadratureRule quad_;
  double epsilon_;
};

// Per-subject log-likelihood source used by the samplers and VB.
class SubjectLikelihood {
public:
  virtual ~SubjectLikelihood() = default;
  virtual int subjects() const = 0;
  virtual int effect_dim() const = 0;
  virtual int beta_rows() const = 0;
  virtual int covariate_dim() const = 0;
  virtual double loglik(int subject, const Eigen::VectorXd& alpha,
                        const Eigen::MatrixXd& beta) const = 0;
  virtual double loglik_grad(int subject, const Eigen::VectorXd& alpha,
                             const Eigen::MatrixXd& beta, Eigen::VectorXd& grad_alpha,
                             Eigen::MatrixXd& grad_beta) const = 0;
  virtual double min_rt(int) const { return std::numeric_limits<double>::quiet_NaN(); }
  // Effect slot eligible for the data-dependent non-decision reparameterization, or -1.
  virtual int tau_lower_slot() const { return -1; }
};

class EamLikelihood final : public SubjectLikelihood {
public:
  EamLikelihood(const Model& model, const Dataset& data);
  int subjects() const override { return static_cast<int>(data_.subjects.size()); }
  int effect_dim() const override { return model_.effect_dim(); }
  int beta_rows() const override { return model_.beta_rows(); }
  int covariate_dim() const override { return data_.covariate_dim(); }
  double loglik(int subject, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta) const override;
  double loglik_grad(int subject, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta,
                     Eigen::VectorXd& grad_alpha, Eigen::MatrixXd& grad_beta) const override;
  double min_rt(int subject) const override { return min_rt_[subject]; }
  int tau_lower_slot() const override { return model_.tau_lower_slot(); }
  const Model& model() const { return model_; }
  const Dataset& data() const { return data_; }

private:
  const Model& model_;
  const Dataset& data_;
  std::vector<double> min_rt_;
};

enum class CovariancePrior { HuangWand, InverseWishart };

struct PriorSpec {
  Eigen::VectorXd mu_mean;
  Eigen::MatrixXd mu_cov;
  Eigen::VectorXd beta_mean;  // column-major vec of the coefficient matrix
  Eigen::MatrixXd beta_cov;
  CovariancePrior cov_prior = CovariancePrior::HuangWand;
  double hw_nu = 2.0;
  Eigen::VectorXd hw_scale;  // per-dimension scale of the auxiliary inverse-gamma priors
  double iw_df = 20.0;
  Eigen::MatrixXd iw_scale;

  // Means 0, mu covariance 3I, beta covariance 9I, scales 1.
  static PriorSpec defaults(int effect_dim, int beta_size,
                            CovariancePrior cov = CovariancePrior::HuangWand);
  void validate(int effect_dim, int beta_size) const;
  bool huang_wand() const { return cov_prior == CovariancePrior::HuangWand; }
  double sigma_df(int effect_dim) const;
  Eigen::MatrixXd sigma_scale(const Eigen::VectorXd& a) const;
};

struct HierState {
  Eigen::MatrixXd alpha;  // effect_dim x J, one column per subject
  Eigen::MatrixXd beta;   // beta_rows x covariate_dim
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd a;      // empty under the fixed inverse-Wishart prior
};

double log_prior(const HierState& state, const PriorSpec& prior);
double log_joint(const HierState& state, const SubjectLikelihood& lik, const PriorSpec& prior);

// θ₁ = (α_1..α_J, vec β, μ, log a) packed into one vector.
struct Theta1Layout {
  int subjects = 0, effect_dim = 0, beta_rows = 0, covariate_dim = 0;
  bool has_log_a = true;

  Theta1Layout() = default;
  Theta1Layout(const SubjectLikelihood& lik, const PriorSpec& prior);
  int alpha_offset(int j) const { return j * effect_dim; }
  int beta_offset() const { return subjects * effect_dim; }
  int beta_size() const { return beta_rows * covariate_dim; }
  int mu_offset() const { return beta_offset() + beta_size(); }
  int log_a_offset() const { return mu_offset() + effect_dim; }
  int size() const { return log_a_offset() + (has_log_a ? effect_dim : 0); }

  Eigen::VectorXd pack(const HierState& state) const;
  // Fills alpha, beta, mu and a; sigma is left untouched.
  void unpack(const Eigen::VectorXd& theta, HierState& state) const;
};

// Exact conditional of Σ given θ₁: IW(posterior_df, posterior_scale).
double posterior_sigma_df(const PriorSpec& prior, const Theta1Layout& layout);
Eigen::MatrixXd posterior_sigma_scale(const HierState& state, const PriorSpec& prior);

struct JointEval {
  double log_joint = 0.0;       // log p(y, θ₁, Σ) including the log a Jacobian
  double log_sigma_cond = 0.0;  // log IW(Σ | posterior_df, posterior_scale(θ₁))
  Eigen::VectorXd grad;         // gradient over θ₁ (empty unless requested)
};

// Evaluates the joint at (θ₁, Σ). With gradients, returns likelihood + prior gradient minus
// the θ₁-gradient of log p(Σ | θ₁, y) when control_variate is set.
JointEval eval_theta1(const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                      const SubjectLikelihood& lik, const PriorSpec& prior,
                      const Theta1Layout& layout, bool with_grad, bool control_variate = true);

Eigen::VectorXd grad_log_joint_theta1(const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                                      const SubjectLikelihood& lik, const PriorSpec& prior,
                                      const Theta1Layout& layout, bool control_variate = true);

// θ₁-gradient of log IW(Σ | posterior_df, posterior_scale(θ₁)); zero-mean under that IW.
Eigen::VectorXd sigma_conditional_grad(const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                                       const PriorSpec& prior, const Theta1Layout& layout);

}  // namespace eam
