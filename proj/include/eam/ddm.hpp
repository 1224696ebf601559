#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "eam/common.hpp"
#include "eam/quadrature.hpp"
#include "eam/wfpt.hpp"

namespace eam {

template <typename Scalar>
struct BasicDdmParams {
  Scalar mu_v;
  Scalar s_v;
  Scalar a;
  Scalar mu_z;
  Scalar s_z;
  Scalar mu_tau;
  Scalar s_tau;
};
using DdmParams = BasicDdmParams<double>;

inline constexpr std::size_t kDdmParamCount = 7;

// Partials of the drift-marginalized integrand.
template <typename Scalar>
struct IntegrandGrad {
  Scalar value{};
  Scalar d_mu_v{};
  Scalar d_var_v{};  // with respect to s_v^2
  Scalar d_a{};
  Scalar d_z{};
  Scalar d_tau{};
};

namespace detail {

// Log of the closed-form drift integral and its partials, for decision time t.
template <typename Scalar>
struct DriftFactor {
  Scalar log_value, d_mu, d_var, d_z, d_t;

  DriftFactor(Scalar z, Scalar t, Scalar mu, Scalar var) {
    using std::log;
    const Scalar den = Scalar(1) + t * var;
    const Scalar num = var * z * z - Scalar(2) * mu * z - mu * mu * t;
    const Scalar shift = z + mu * t;
    log_value = num / (Scalar(2) * den) - Scalar(0.5) * log(den);
    d_mu = -shift / den;
    d_var = (shift * shift - t * den) / (Scalar(2) * den * den);
    d_z = (var * z - mu) / den;
    d_t = -var / (Scalar(2) * den) - mu * mu / (Scalar(2) * den) - num * var / (Scalar(2) * den * den);
  }
};

// Unclamped integrand at the lower boundary; t = rt - tau > 0 is assumed.
template <typename Scalar>
Scalar ddm_integrand_raw(const SeriesPlan& plan, Scalar z, Scalar t, Scalar mu, Scalar var,
                         Scalar a) {
  using std::exp;
  using std::sin;
  using std::sqrt;
  constexpr double pi = std::numbers::pi;
  const Scalar drift = exp(DriftFactor<Scalar>(z, t, mu, var).log_value);
  Scalar sum(0);
  if (plan.representation == Representation::LargeTime) {
    const Scalar decay = Scalar(pi * pi) * t / (Scalar(2) * a * a);
    for (int k = 1; k <= plan.kappa; ++k) {
      const Scalar kk(k);
      sum += kk * sin(kk * Scalar(pi) * z / a) * exp(-kk * kk * decay);
    }
    return Scalar(pi) / (a * a) * drift * sum;
  }
  const auto [lo, hi] = small_time_range(plan.kappa);
  for (int k = lo; k <= hi; ++k) {
    const Scalar y = z + Scalar(2 * k) * a;
    sum += (z / a + Scalar(2 * k)) * exp(-y * y / (Scalar(2) * t));
  }
  return a / (t * sqrt(Scalar(2 * pi) * t)) * drift * sum;
}

template <typename Scalar>
IntegrandGrad<Scalar> ddm_integrand_grad_raw(const SeriesPlan& plan, Scalar z, Scalar t, Scalar mu,
                                             Scalar var, Scalar a) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::sqrt;
  constexpr double pi = std::numbers::pi;
  const DriftFactor<Scalar> df(z, t, mu, var);
  const Scalar drift = exp(df.log_value);
  IntegrandGrad<Scalar> out;
  Scalar s(0), s_z(0), s_a(0), s_t(0);
  Scalar pre, pre_a, pre_t;  // prefactor and its log-derivatives
  if (plan.representation == Representation::LargeTime) {
    const Scalar decay = Scalar(pi * pi) / (Scalar(2) * a * a);
    for (int k = 1; k <= plan.kappa; ++k) {
      const Scalar kk(k);
      const Scalar arg = kk * Scalar(pi) * z / a;
      const Scalar e = exp(-kk * kk * decay * t);
      const Scalar sn = sin(arg), cs = cos(arg);
      s += kk * sn * e;
      s_z += kk * e * cs * kk * Scalar(pi) / a;
      s_a += kk * e * (-cs * arg / a + sn * kk * kk * Scalar(pi * pi) * t / (a * a * a));
      s_t += -kk * sn * e * kk * kk * decay;
    }
    pre = Scalar(pi) / (a * a);
    pre_a = Scalar(-2) / a;
    pre_t = Scalar(0);
  } else {
    const auto [lo, hi] = small_time_range(plan.kappa);
    for (int k = lo; k <= hi; ++k) {
      const Scalar kk(2 * k);
      const Scalar x = z / a + kk;
      const Scalar y = z + kk * a;
      const Scalar e = exp(-y * y / (Scalar(2) * t));
      s += x * e;
      s_z += e * (Scalar(1) / a - x * y / t);
      s_a += e * (-z / (a * a) - x * y * kk / t);
      s_t += x * e * y * y / (Scalar(2) * t * t);
    }
    pre = a / (t * sqrt(Scalar(2 * pi) * t));
    pre_a = Scalar(1) / a;
    pre_t = Scalar(-1.5) / t;
  }
  const Scalar base = pre * drift;
  out.value = base * s;
  out.d_mu_v = out.value * df.d_mu;
  out.d_var_v = out.value * df.d_var;
  out.d_z = out.value * df.d_z + base * s_z;
  out.d_a = out.value * pre_a + base * s_a;
  const Scalar d_t = out.value * (df.d_t + pre_t) + base * s_t;
  out.d_tau = -d_t;
  return out;
}

}  // namespace detail

// Integrand of the full density at the lower boundary (drift integrated out in closed form).
template <typename Scalar>
Scalar ddm_integrand(const SeriesPlan& plan, Scalar z, Scalar tau, Scalar rt,
                     const BasicDdmParams<Scalar>& p) {
  const Scalar t = rt - tau;
  if (!(t > Scalar(0))) return Scalar(0);
  const Scalar g = detail::ddm_integrand_raw(plan, z, t, p.mu_v, p.s_v * p.s_v, p.a);
  return g > Scalar(0) ? g : Scalar(0);
}

template <typename Scalar>
IntegrandGrad<Scalar> ddm_integrand_grad(const SeriesPlan& plan, Scalar z, Scalar tau, Scalar rt,
                                         const BasicDdmParams<Scalar>& p) {
  const Scalar t = rt - tau;
  if (!(t > Scalar(0))) return {};
  return detail::ddm_integrand_grad_raw(plan, z, t, p.mu_v, p.s_v * p.s_v, p.a);
}

void check_params(const DdmParams& p);

// Reflected parameters: the upper-boundary density equals the lower-boundary one here.
inline DdmParams reflect(DdmParams p) {
  p.mu_v = -p.mu_v;
  p.mu_z = p.a - p.mu_z;
  return p;
}

double ddm_density(Boundary choice, double rt, const DdmParams& p, const QuadratureRule& quad,
                   double epsilon = kDefaultEpsilon);

struct DdmDensityGrad {
  double density = 0.0;
  // Log-density partials in the order (mu_v, s_v, a, mu_z, s_z, mu_tau, s_tau); zero when density is 0.
  std::array<double, kDdmParamCount> grad_log{};
};

DdmDensityGrad ddm_density_grad(Boundary choice, double rt, const DdmParams& p,
                                const QuadratureRule& quad, double epsilon = kDefaultEpsilon);

// Log-density gradient; throws ZeroDensityError(trial_index) when the density vanishes.
std::array<double, kDdmParamCount> ddm_loglik_grad(Boundary choice, double rt, const DdmParams& p,
                                                   const QuadratureRule& quad,
                                                   double epsilon = kDefaultEpsilon,
                                                   std::size_t trial_index = 0);

}  // namespace eam
