#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "eam/data.hpp"
#include "eam/transforms.hpp"

namespace eam {

struct TermCondition {
  std::string attribute;
  double value = 0.0;
  int index = -1;  // resolved by LinkingDesign::bind
};

// coefficient = scale * (attribute value, when given); active only if all conditions hold
struct LinkTerm {
  int slot = 0;
  double scale = 1.0;
  std::string attribute;
  std::vector<TermCondition> when;
  int attribute_index = -1;
};

struct LinkRecipe {
  std::vector<LinkTerm> terms;
  double offset = 0.0;
  int beta_row = -1;  // adds beta.row(beta_row) * covariates
};

// Maps random effects, trial attributes and covariate coefficients to the transformed model
// parameters of one trial. One recipe per model parameter, in TransformSpec order.
struct LinkingDesign {
  std::vector<std::string> slot_names;
  std::vector<std::string> beta_row_names;
  std::vector<LinkRecipe> recipes;

  int slots() const { return static_cast<int>(slot_names.size()); }
  int beta_rows() const { return static_cast<int>(beta_row_names.size()); }

  // Resolves attribute names; throws ConfigError naming anything missing.
  void bind(const std::vector<std::string>& attribute_names);
  // Throws ConfigError if a slot or beta row is unused or a reference is out of range.
  void validate(int model_parameters) const;
  bool bound() const { return bound_; }

  // Transformed (unconstrained) model parameters for a trial.
  Eigen::VectorXd link(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta,
                       const Trial& trial) const;
  // Adds the pullback of a transformed-parameter gradient into the effect and coefficient
  // gradients; grad_beta may be empty when there are no beta rows.
  void accumulate(const Eigen::VectorXd& grad_link, const Trial& trial,
                  Eigen::VectorXd& grad_alpha, Eigen::MatrixXd& grad_beta) const;

private:
  double coefficient(const LinkTerm& term, const Trial& trial) const;
  bool bound_ = false;
};

// One slot per model parameter; with covariates, one beta row per model parameter as well.
LinkingDesign identity_design(const TransformSpec& spec, bool with_covariates);

// Two-accumulator LBA whose first drift takes one effect per value 0..conditions-1 of
// `attribute`; b, A, the second drift and tau are shared. `covariate_params` lists transformed
// parameter indices (b, A, v1, v2, tau = 0..4) that get a coefficient row.
LinkingDesign lba_condition_design(int conditions, const std::string& attribute,
                                   const std::vector<int>& covariate_params = {});

Eigen::VectorXd link_trial(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta,
                           const Trial& trial, const LinkingDesign& design,
                           const TransformSpec& spec, double min_rt);

}  // namespace eam
