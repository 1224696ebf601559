#include "eam/ddm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace eam {

namespace {

constexpr double kSupportGuard = 1e-9;

// Below this multiple of z_lo^2 the lower-boundary integrand is under 1e-10 of its peak.
constexpr double kNegligibleTimeScale = 1.0 / 60.0;

struct Support {
  double z_lo, z_hi, tau_lo, tau_hi;
  double t_lo, t_hi;  // decision-time range actually integrated
  bool upper_open;    // the tau_hi edge lies inside the integrated range and moves the integral
};

Support support_of(const DdmParams& p, double rt) {
  Support s;
  s.z_lo = p.mu_z - 0.5 * p.s_z;
  s.z_hi = p.mu_z + 0.5 * p.s_z;
  s.tau_lo = p.mu_tau - 0.5 * p.s_tau;
  s.tau_hi = p.mu_tau + 0.5 * p.s_tau;
  const double cutoff = kNegligibleTimeScale * s.z_lo * s.z_lo;
  s.t_hi = rt - s.tau_lo;
  s.upper_open = rt - s.tau_hi > cutoff;
  s.t_lo = s.upper_open ? rt - s.tau_hi : cutoff;
  return s;
}

// Non-decision nodes from a Gauss-Legendre rule in log decision time; resolves the sharp rise
// of the integrand near t = 0 when the response falls inside the non-decision support.
void tau_nodes(const GaussLegendre& rule, double rt, const Support& s, std::vector<double>& tx,
               std::vector<double>& tw) {
  rule.map_to(std::log(s.t_lo), std::log(s.t_hi), tx, tw);
  for (std::size_t k = 0; k < tx.size(); ++k) {
    const double t = std::exp(tx[k]);
    tw[k] *= t;
    tx[k] = rt - t;
  }
}

SeriesPlan plan_for(double t, double a, double epsilon) {
  return choose_representation(t / (a * a), epsilon);
}

// 1-D integral of the raw integrand along z at fixed non-decision time.
double line_over_z(const std::vector<double>& zx, const std::vector<double>& zw, double tau,
                   double rt, const DdmParams& p, double var, double epsilon) {
  const double t = rt - tau;
  if (!(t > 0.0)) return 0.0;
  const SeriesPlan plan = plan_for(t, p.a, epsilon);
  double sum = 0.0;
  for (std::size_t i = 0; i < zx.size(); ++i)
    sum += zw[i] * detail::ddm_integrand_raw(plan, zx[i], t, p.mu_v, var, p.a);
  return sum;
}

// 1-D integral of the raw integrand along non-decision time at fixed start point.
double line_over_tau(const std::vector<double>& tx, const std::vector<double>& tw, double z,
                     double rt, const DdmParams& p, double var, double epsilon) {
  double sum = 0.0;
  for (std::size_t k = 0; k < tx.size(); ++k) {
    const double t = rt - tx[k];
    if (!(t > 0.0)) continue;
    sum += tw[k] * detail::ddm_integrand_raw(plan_for(t, p.a, epsilon), z, t, p.mu_v, var, p.a);
  }
  return sum;
}

}  // namespace

void check_params(const DdmParams& p) {
  if (!(p.s_v > 0.0 && p.s_z > 0.0 && p.s_tau > 0.0))
    throw DomainError("ddm: variability parameters must be positive");
  if (!(p.a > 0.0)) throw DomainError("ddm: boundary separation must be positive");
  if (!(p.mu_z - 0.5 * p.s_z > 0.0)) throw DomainError("ddm: start-point support must exceed 0");
  if (!(p.a > p.mu_z + 0.5 * p.s_z)) throw DomainError("ddm: start-point support must lie below a");
  if (!(p.mu_tau - 0.5 * p.s_tau > 0.0))
    throw DomainError("ddm: non-decision support must be positive");
}

double ddm_density(Boundary choice, double rt, const DdmParams& params, const QuadratureRule& quad,
                   double epsilon) {
  check_params(params);
  const DdmParams p = choice == Boundary::Upper ? reflect(params) : params;
  const Support s = support_of(p, rt);
  if (s.t_hi <= kSupportGuard || s.t_hi <= s.t_lo) return 0.0;
  std::vector<double> zx, zw, tx, tw;
  quad.z.map_to(s.z_lo, s.z_hi, zx, zw);
  tau_nodes(quad.tau, rt, s, tx, tw);
  const double var = p.s_v * p.s_v;
  double total = 0.0;
  for (std::size_t k = 0; k < tx.size(); ++k)
    total += tw[k] * line_over_z(zx, zw, tx[k], rt, p, var, epsilon);
  const double density = total / (p.s_z * p.s_tau);
  return density < kDensityFloor ? 0.0 : density;
}

DdmDensityGrad ddm_density_grad(Boundary choice, double rt, const DdmParams& params,
                                const QuadratureRule& quad, double epsilon) {
  check_params(params);
  const bool upper = choice == Boundary::Upper;
  const DdmParams p = upper ? reflect(params) : params;
  const Support s = support_of(p, rt);
  DdmDensityGrad out;
  if (s.t_hi <= kSupportGuard || s.t_hi <= s.t_lo) return out;

  std::vector<double> zx, zw, tx, tw;
  quad.z.map_to(s.z_lo, s.z_hi, zx, zw);
  tau_nodes(quad.tau, rt, s, tx, tw);
  const double var = p.s_v * p.s_v;

  double total = 0.0, d_mu_v = 0.0, d_var = 0.0, d_a = 0.0;
  for (std::size_t k = 0; k < tx.size(); ++k) {
    const double t = rt - tx[k];
    if (!(t > 0.0)) continue;
    const SeriesPlan plan = plan_for(t, p.a, epsilon);
    for (std::size_t i = 0; i < zx.size(); ++i) {
      const auto g = detail::ddm_integrand_grad_raw(plan, zx[i], t, p.mu_v, var, p.a);
      const double w = tw[k] * zw[i];
      total += w * g.value;
      d_mu_v += w * g.d_mu_v;
      d_var += w * g.d_var_v;
      d_a += w * g.d_a;
    }
  }
  const double density = total / (p.s_z * p.s_tau);
  if (!(density >= kDensityFloor)) return out;
  out.density = density;

  // Moving edges of the uniform supports contribute the integrand along the edge.
  const double at_z_lo = line_over_tau(tx, tw, s.z_lo, rt, p, var, epsilon);
  const double at_z_hi = line_over_tau(tx, tw, s.z_hi, rt, p, var, epsilon);
  const double at_tau_lo = line_over_z(zx, zw, s.tau_lo, rt, p, var, epsilon);
  const double at_tau_hi = s.upper_open ? line_over_z(zx, zw, s.tau_hi, rt, p, var, epsilon) : 0.0;

  const double inv = 1.0 / total;
  auto& g = out.grad_log;
  g[0] = d_mu_v * inv;
  g[1] = 2.0 * p.s_v * d_var * inv;
  g[2] = d_a * inv;
  g[3] = (at_z_hi - at_z_lo) * inv;
  g[4] = 0.5 * (at_z_hi + at_z_lo) * inv - 1.0 / p.s_z;
  g[5] = (at_tau_hi - at_tau_lo) * inv;
  g[6] = 0.5 * (at_tau_hi + at_tau_lo) * inv - 1.0 / p.s_tau;

  if (upper) {
    // Reflected start mean is a - mu_z, reflected drift is -mu_v.
    g[2] += g[3];
    g[3] = -g[3];
    g[0] = -g[0];
  }
  return out;
}

std::array<double, kDdmParamCount> ddm_loglik_grad(Boundary choice, double rt, const DdmParams& p,
                                                   const QuadratureRule& quad, double epsilon,
                                                   std::size_t trial_index) {
  const DdmDensityGrad r = ddm_density_grad(choice, rt, p, quad, epsilon);
  if (r.density <= 0.0) throw ZeroDensityError(trial_index);
  return r.grad_log;
}

}  // namespace eam
