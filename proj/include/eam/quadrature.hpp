#pragma once

#include <vector>

namespace eam {

// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n);
  int size() const { return static_cast<int>(nodes.size()); }

  // Nodes and weights mapped to [lo, hi]; weights sum to hi - lo.
  void map_to(double lo, double hi, std::vector<double>& x, std::vector<double>& w) const;
};

// Tensor rule over (start point, non-decision time).
struct QuadratureRule {
  GaussLegendre z;
  GaussLegendre tau;

  explicit QuadratureRule(int nodes_z = 32, int nodes_tau = 32);
};

}  // namespace eam
