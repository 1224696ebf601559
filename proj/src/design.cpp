#include "eam/design.hpp"

#include <algorithm>

#include "eam/common.hpp"

namespace eam {

namespace {

int find_attribute(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("design references unknown attribute '" + name + "'");
  return static_cast<int>(it - names.begin());
}

}  // namespace

void LinkingDesign::bind(const std::vector<std::string>& attribute_names) {
  for (auto& recipe : recipes) {
    for (auto& term : recipe.terms) {
      term.attribute_index =
          term.attribute.empty() ? -1 : find_attribute(attribute_names, term.attribute);
      for (auto& cond : term.when) cond.index = find_attribute(attribute_names, cond.attribute);
    }
  }
  bound_ = true;
}

void LinkingDesign::validate(int model_parameters) const {
  if (static_cast<int>(recipes.size()) != model_parameters)
    throw ConfigError("design has " + std::to_string(recipes.size()) + " recipes, model needs " +
                      std::to_string(model_parameters));
  std::vector<int> slot_uses(slots(), 0), row_uses(beta_rows(), 0);
  for (const auto& recipe : recipes) {
    for (const auto& term : recipe.terms) {
      if (term.slot < 0 || term.slot >= slots())
        throw ConfigError("design term references undeclared slot " + std::to_string(term.slot));
      ++slot_uses[term.slot];
    }
    if (recipe.beta_row >= beta_rows())
      throw ConfigError("design references undeclared beta row " + std::to_string(recipe.beta_row));
    if (recipe.beta_row >= 0) ++row_uses[recipe.beta_row];
  }
  for (int s = 0; s < slots(); ++s)
    if (slot_uses[s] == 0) throw ConfigError("random-effect slot '" + slot_names[s] + "' is unused");
  for (int r = 0; r < beta_rows(); ++r)
    if (row_uses[r] == 0) throw ConfigError("beta row '" + beta_row_names[r] + "' is unused");
}

double LinkingDesign::coefficient(const LinkTerm& term, const Trial& trial) const {
  for (const auto& cond : term.when)
    if (trial.attributes[cond.index] != cond.value) return 0.0;
  return term.attribute_index >= 0 ? term.scale * trial.attributes[term.attribute_index]
                                   : term.scale;
}

Eigen::VectorXd LinkingDesign::link(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta,
                                    const Trial& trial) const {
  if (!bound_) throw ConfigError("design used before binding to dataset attributes");
  Eigen::VectorXd out(recipes.size());
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    const auto& recipe = recipes[i];
    double v = recipe.offset;
    for (const auto& term : recipe.terms) v += coefficient(term, trial) * alpha[term.slot];
    if (recipe.beta_row >= 0) {
      if (trial.covariates.size() != beta.cols())
        throw ConfigError("trial covariate length does not match the coefficient matrix");
      v += beta.row(recipe.beta_row).dot(trial.covariates);
    }
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

void LinkingDesign::accumulate(const Eigen::VectorXd& grad_link, const Trial& trial,
                               Eigen::VectorXd& grad_alpha, Eigen::MatrixXd& grad_beta) const {
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    const double g = grad_link[static_cast<Eigen::Index>(i)];
    if (g == 0.0) continue;
    const auto& recipe = recipes[i];
    for (const auto& term : recipe.terms) grad_alpha[term.slot] += coefficient(term, trial) * g;
    if (recipe.beta_row >= 0) grad_beta.row(recipe.beta_row) += g * trial.covariates.transpose();
  }
}

LinkingDesign identity_design(const TransformSpec& spec, bool with_covariates) {
  LinkingDesign d;
  d.slot_names = transformed_names(spec);
  for (int i = 0; i < spec.size(); ++i) {
    LinkRecipe r;
    r.terms.push_back(LinkTerm{i, 1.0, {}, {}, -1});
    if (with_covariates) {
      r.beta_row = i;
      d.beta_row_names.push_back(d.slot_names[i]);
    }
    d.recipes.push_back(std::move(r));
  }
  d.bind({});
  return d;
}

LinkingDesign lba_condition_design(int conditions, const std::string& attribute,
                                   const std::vector<int>& covariate_params) {
  if (conditions < 1) throw ConfigError("design: at least one condition is required");
  const auto names = transformed_names(lba_transform(2));
  LinkingDesign d;
  d.slot_names = {names[0], names[1]};
  for (int k = 0; k < conditions; ++k) d.slot_names.push_back(names[2] + "[" + attribute + "=" + std::to_string(k) + "]");
  d.slot_names.push_back(names[3]);
  d.slot_names.push_back(names[4]);
  d.recipes.resize(5);
  d.recipes[0].terms.push_back(LinkTerm{0, 1.0, {}, {}, -1});
  d.recipes[1].terms.push_back(LinkTerm{1, 1.0, {}, {}, -1});
  for (int k = 0; k < conditions; ++k)
    d.recipes[2].terms.push_back(LinkTerm{2 + k, 1.0, {}, {TermCondition{attribute, static_cast<double>(k), -1}}, -1});
  d.recipes[3].terms.push_back(LinkTerm{2 + conditions, 1.0, {}, {}, -1});
  d.recipes[4].terms.push_back(LinkTerm{3 + conditions, 1.0, {}, {}, -1});
  for (int p : covariate_params) {
    if (p < 0 || p > 4 || d.recipes[p].beta_row >= 0) throw ConfigError("design: invalid covariate parameter index");
    d.recipes[p].beta_row = d.beta_rows();
    d.beta_row_names.push_back(names[p]);
  }
  return d;
}

Eigen::VectorXd link_trial(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta,
                           const Trial& trial, const LinkingDesign& design,
                           const TransformSpec& spec, double min_rt) {
  return spec.from_unconstrained(design.link(alpha, beta, trial), min_rt);
}

}  // namespace eam
