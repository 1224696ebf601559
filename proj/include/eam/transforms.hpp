#pragma once

#include <Eigen/Core>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace eam {

enum class SlotKind {
  Identity,          // natural = x
  Log,               // natural = exp(x)
  LogGap,            // natural = exp(x) + sum of weighted referenced naturals
  DataDependentTau,  // natural = minRT / (1 + exp(x)) + sum of weighted referenced naturals
};

struct SlotTransform {
  std::string name;  // natural parameter name
  SlotKind kind = SlotKind::Identity;
  std::vector<std::pair<int, double>> refs;  // (slot, weight) added on the natural scale
};

// Bijection between transformed (real-line) and natural model parameters.
class TransformSpec {
public:
  TransformSpec() = default;
  explicit TransformSpec(std::vector<SlotTransform> slots);

  int size() const { return static_cast<int>(slots_.size()); }
  const SlotTransform& slot(int i) const { return slots_[i]; }
  const std::vector<int>& order() const { return order_; }
  int index_of(const std::string& name) const;  // -1 when absent
  bool needs_min_rt() const;

  Eigen::VectorXd from_unconstrained(const Eigen::VectorXd& x,
                                     double min_rt = std::numeric_limits<double>::quiet_NaN()) const;
  Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& natural,
                                   double min_rt = std::numeric_limits<double>::quiet_NaN()) const;

  // Natural-scale Jacobian d natural / d x (dense; for tests and diagnostics).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x,
                           double min_rt = std::numeric_limits<double>::quiet_NaN()) const;
  // Pulls a gradient with respect to the natural parameters back to the transformed scale.
  void pullback(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_natural,
                Eigen::VectorXd& grad_x,
                double min_rt = std::numeric_limits<double>::quiet_NaN()) const;
  // log |det d natural / d x|; the map is triangular in resolution order.
  double log_abs_det_jacobian(const Eigen::VectorXd& x,
                              double min_rt = std::numeric_limits<double>::quiet_NaN()) const;

private:
  std::vector<SlotTransform> slots_;
  std::vector<int> order_;
};

// Natural order (mu_v, s_v, a, mu_z, s_z, mu_tau, s_tau).
TransformSpec ddm_transform();
// Natural order (b, A, v1..vC, tau).
TransformSpec lba_transform(int accumulators);

// Transformed-scale names matching ddm_transform()/lba_transform().
std::vector<std::string> transformed_names(const TransformSpec& spec);

// Replaces the lower non-decision bound effect log(L) by log((minRT - L) / L), which is
// unconstrained exactly when L < minRT.
struct TauReparam {
  Eigen::VectorXd effects;  // transformed vector
  double log_jacobian;      // log |d transformed / d original|
};
TauReparam tau_transform_data(const Eigen::VectorXd& alpha, double min_rt, int slot);

struct TauInverse {
  Eigen::VectorXd alpha;
  double log_jacobian;      // log |d alpha_slot / d transformed_slot|
  double d_alpha;           // d alpha_slot / d transformed_slot
  double d_log_jacobian;    // derivative of log_jacobian with respect to transformed_slot
};
TauInverse tau_transform_inverse(const Eigen::VectorXd& transformed, double min_rt, int slot);

}  // namespace eam
