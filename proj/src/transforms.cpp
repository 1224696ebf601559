#include "eam/transforms.hpp"

#include <cmath>

#include "eam/common.hpp"

namespace eam {

namespace {

double base_value(SlotKind kind, double x, double min_rt) {
  switch (kind) {
    case SlotKind::Identity: return x;
    case SlotKind::Log:
    case SlotKind::LogGap: return std::exp(x);
    case SlotKind::DataDependentTau: return min_rt / (1.0 + std::exp(x));
  }
  return x;
}

double base_derivative(SlotKind kind, double x, double min_rt) {
  switch (kind) {
    case SlotKind::Identity: return 1.0;
    case SlotKind::Log:
    case SlotKind::LogGap: return std::exp(x);
    case SlotKind::DataDependentTau: {
      const double e = std::exp(-std::abs(x));
      // -minRT * sigmoid(x) * sigmoid(-x), written to avoid overflow
      return -min_rt * e / ((1.0 + e) * (1.0 + e));
    }
  }
  return 1.0;
}

double base_inverse(const SlotTransform& s, double gap, double min_rt) {
  switch (s.kind) {
    case SlotKind::Identity: return gap;
    case SlotKind::Log:
    case SlotKind::LogGap:
      if (!(gap > 0.0)) throw DomainError("transform: " + s.name + " violates its lower bound");
      return std::log(gap);
    case SlotKind::DataDependentTau:
      if (!(gap > 0.0) || !(gap < min_rt))
        throw DomainError("transform: " + s.name + " lower bound must lie in (0, minRT)");
      return std::log((min_rt - gap) / gap);
  }
  return gap;
}

}  // namespace

TransformSpec::TransformSpec(std::vector<SlotTransform> slots) : slots_(std::move(slots)) {
  const int n = size();
  std::vector<int> state(n, 0);  // 0 unvisited, 1 in progress, 2 done
  auto visit = [&](auto&& self, int i) -> void {
    if (state[i] == 2) return;
    if (state[i] == 1) throw ConfigError("transform: cyclic reference at " + slots_[i].name);
    state[i] = 1;
    for (const auto& [ref, w] : slots_[i].refs) {
      if (ref < 0 || ref >= n) throw ConfigError("transform: bad reference in " + slots_[i].name);
      self(self, ref);
    }
    state[i] = 2;
    order_.push_back(i);
  };
  for (int i = 0; i < n; ++i) visit(visit, i);
}

int TransformSpec::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (slots_[i].name == name) return i;
  return -1;
}

bool TransformSpec::needs_min_rt() const {
  for (const auto& s : slots_)
    if (s.kind == SlotKind::DataDependentTau) return true;
  return false;
}

Eigen::VectorXd TransformSpec::from_unconstrained(const Eigen::VectorXd& x, double min_rt) const {
  Eigen::VectorXd out(size());
  for (int i : order_) {
    const auto& s = slots_[i];
    double v = base_value(s.kind, x[i], min_rt);
    for (const auto& [ref, w] : s.refs) v += w * out[ref];
    out[i] = v;
  }
  return out;
}

Eigen::VectorXd TransformSpec::to_unconstrained(const Eigen::VectorXd& natural,
                                                double min_rt) const {
  if (natural.size() != size()) throw DomainError("transform: dimension mismatch");
  Eigen::VectorXd out(size());
  for (int i : order_) {
    const auto& s = slots_[i];
    double gap = natural[i];
    for (const auto& [ref, w] : s.refs) gap -= w * natural[ref];
    out[i] = base_inverse(s, gap, min_rt);
  }
  return out;
}

Eigen::MatrixXd TransformSpec::jacobian(const Eigen::VectorXd& x, double min_rt) const {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(size(), size());
  for (int i : order_) {
    const auto& s = slots_[i];
    J(i, i) += base_derivative(s.kind, x[i], min_rt);
    for (const auto& [ref, w] : s.refs) J.row(i) += w * J.row(ref);
  }
  return J;
}

void TransformSpec::pullback(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_natural,
                             Eigen::VectorXd& grad_x, double min_rt) const {
  Eigen::VectorXd adj = grad_natural;
  grad_x.resize(size());
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const int i = *it;
    const auto& s = slots_[i];
    for (const auto& [ref, w] : s.refs) adj[ref] += w * adj[i];
    grad_x[i] = adj[i] * base_derivative(s.kind, x[i], min_rt);
  }
}

double TransformSpec::log_abs_det_jacobian(const Eigen::VectorXd& x, double min_rt) const {
  double total = 0.0;
  for (int i = 0; i < size(); ++i)
    total += std::log(std::abs(base_derivative(slots_[i].kind, x[i], min_rt)));
  return total;
}

TransformSpec ddm_transform() {
  // Gaps resolve as s_z before mu_z before a, and s_tau before mu_tau.
  return TransformSpec({{"mu_v", SlotKind::Identity, {}},
                        {"s_v", SlotKind::Log, {}},
                        {"a", SlotKind::LogGap, {{3, 1.0}, {4, 0.5}}},
                        {"mu_z", SlotKind::LogGap, {{4, 0.5}}},
                        {"s_z", SlotKind::Log, {}},
                        {"mu_tau", SlotKind::LogGap, {{6, 0.5}}},
                        {"s_tau", SlotKind::Log, {}}});
}

TransformSpec lba_transform(int accumulators) {
  if (accumulators < 2) throw ConfigError("lba: at least two accumulators required");
  std::vector<SlotTransform> slots;
  slots.push_back({"b", SlotKind::LogGap, {{1, 1.0}}});
  slots.push_back({"A", SlotKind::Log, {}});
  for (int c = 0; c < accumulators; ++c)
    slots.push_back({"v" + std::to_string(c + 1), SlotKind::Identity, {}});
  slots.push_back({"tau", SlotKind::Log, {}});
  return TransformSpec(std::move(slots));
}

std::vector<std::string> transformed_names(const TransformSpec& spec) {
  std::vector<std::string> names;
  for (int i = 0; i < spec.size(); ++i) {
    const auto& s = spec.slot(i);
    switch (s.kind) {
      case SlotKind::Identity: names.push_back(s.name); break;
      case SlotKind::Log: names.push_back("log_" + s.name); break;
      case SlotKind::LogGap: names.push_back("log_gap_" + s.name); break;
      case SlotKind::DataDependentTau: names.push_back("tau_ratio_" + s.name); break;
    }
  }
  return names;
}

TauReparam tau_transform_data(const Eigen::VectorXd& alpha, double min_rt, int slot) {
  const double lower = std::exp(alpha[slot]);
  if (!(lower < min_rt))
    throw DomainError("non-decision lower bound must lie below the subject's fastest response");
  TauReparam out{alpha, 0.0};
  out.effects[slot] = std::log((min_rt - lower) / lower);
  out.log_jacobian = std::log(min_rt / (min_rt - lower));
  return out;
}

TauInverse tau_transform_inverse(const Eigen::VectorXd& transformed, double min_rt, int slot) {
  const double x = transformed[slot];
  TauInverse out{transformed, 0.0, 0.0, 0.0};
  // log(1 + e^x) and the logistic function in overflow-safe form
  const double softplus = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  const double sig = x > 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  out.alpha[slot] = std::log(min_rt) - softplus;
  out.d_alpha = -sig;
  out.log_jacobian = x - softplus;  // log sigmoid(x)
  out.d_log_jacobian = 1.0 - sig;
  return out;
}

}  // namespace eam
