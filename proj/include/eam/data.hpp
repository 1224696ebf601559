#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace eam {

struct Trial {
  int response = 0;                // 0-based response index
  double rt = 0.0;                 // seconds
  std::vector<double> attributes;  // aligned with Dataset::attribute_names
  Eigen::VectorXd covariates;      // aligned with Dataset::covariate_names
};

struct Subject {
  std::string id;
  std::vector<Trial> trials;
  double min_rt() const;  // +inf when empty
};

struct Dataset {
  std::vector<std::string> attribute_names;
  std::vector<std::string> covariate_names;
  std::vector<Subject> subjects;

  int covariate_dim() const { return static_cast<int>(covariate_names.size()); }
  int attribute_index(const std::string& name) const;  // -1 when absent
  std::size_t trial_count() const;
};

}  // namespace eam
