#include "eam/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "eam/common.hpp"

namespace eam {

GaussLegendre::GaussLegendre(int n) {
  if (n < 2) throw DomainError("Gauss-Legendre rule needs at least 2 nodes");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

void GaussLegendre::map_to(double lo, double hi, std::vector<double>& x,
                           std::vector<double>& w) const {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  x.resize(nodes.size());
  w.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    x[i] = mid + half * nodes[i];
    w[i] = half * weights[i];
  }
}

QuadratureRule::QuadratureRule(int nodes_z, int nodes_tau) : z(nodes_z), tau(nodes_tau) {}

}  // namespace eam
