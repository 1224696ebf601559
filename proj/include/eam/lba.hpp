#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>

#include "eam/common.hpp"
#include "eam/normal.hpp"

namespace eam {

inline constexpr int kMaxAccumulators = 16;

template <typename Scalar>
using AccumulatorVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxAccumulators, 1>;

template <typename Scalar>
struct BasicLbaParams {
  Scalar b;    // threshold
  Scalar A;    // start-point range
  AccumulatorVector<Scalar> v;  // mean drift per accumulator
  Scalar s = Scalar(1);         // drift SD
  Scalar tau;  // non-decision time

  int accumulators() const { return static_cast<int>(v.size()); }
  // Length of the gradient vector: (b, A, v_1..v_C, tau).
  int gradient_size() const { return accumulators() + 3; }
};
using LbaParams = BasicLbaParams<double>;

template <typename Scalar>
struct AccumulatorValue {
  Scalar cdf{0}, sf{1}, pdf{0};
};

// Partials of the single-accumulator CDF and density with respect to (b, A, v, t).
template <typename Scalar>
struct AccumulatorGrad {
  Scalar cdf_b{}, cdf_A{}, cdf_v{}, cdf_t{};
  Scalar pdf_b{}, pdf_A{}, pdf_v{}, pdf_t{};
};

namespace detail {

template <typename Scalar>
struct RaceTerms {
  Scalar x1, x2, phi1, phi2, Phi_diff;  // Phi_diff = Phi(x1) - Phi(x2)
};

template <typename Scalar>
RaceTerms<Scalar> race_terms(Scalar t, Scalar b, Scalar A, Scalar v, Scalar s) {
  RaceTerms<Scalar> r;
  r.x1 = (b - t * v) / (t * s);
  r.x2 = (b - A - t * v) / (t * s);
  r.phi1 = norm_pdf(r.x1);
  r.phi2 = norm_pdf(r.x2);
  r.Phi_diff = r.x2 > Scalar(0) ? norm_sf(r.x2) - norm_sf(r.x1) : norm_cdf(r.x1) - norm_cdf(r.x2);
  return r;
}

}  // namespace detail

// Single accumulator at decision time t (time since encoding ended).
template <typename Scalar>
AccumulatorValue<Scalar> lba_accumulator(Scalar t, Scalar b, Scalar A, Scalar v, Scalar s) {
  AccumulatorValue<Scalar> out;
  if (!(t > Scalar(0))) return out;
  const auto r = detail::race_terms(t, b, A, v, s);
  const Scalar scale = t * s / A;
  // Survival as the integral of Phi over [x2, x1]; CDF as the integral of the upper tail.
  const Scalar sf_lower = scale * ((r.x1 * norm_cdf(r.x1) + r.phi1) - (r.x2 * norm_cdf(r.x2) + r.phi2));
  if (sf_lower < Scalar(0.5)) {
    out.sf = sf_lower < Scalar(0) ? Scalar(0) : sf_lower;
    out.cdf = Scalar(1) - out.sf;
  } else {
    const Scalar cdf_upper =
        scale * ((r.x1 * norm_sf(r.x1) - r.phi1) - (r.x2 * norm_sf(r.x2) - r.phi2));
    out.cdf = cdf_upper < Scalar(0) ? Scalar(0) : cdf_upper;
    out.sf = Scalar(1) - out.cdf;
  }
  const Scalar pdf = (v * r.Phi_diff + s * (r.phi2 - r.phi1)) / A;
  out.pdf = pdf > Scalar(0) ? pdf : Scalar(0);
  return out;
}

template <typename Scalar>
AccumulatorGrad<Scalar> lba_accumulator_grad(Scalar t, Scalar b, Scalar A, Scalar v, Scalar s) {
  AccumulatorGrad<Scalar> g;
  if (!(t > Scalar(0))) return g;
  const auto r = detail::race_terms(t, b, A, v, s);
  const auto val = lba_accumulator(t, b, A, v, s);
  const Scalar pdf = (v * r.Phi_diff + s * (r.phi2 - r.phi1)) / A;
  g.cdf_b = -r.Phi_diff / A;
  g.cdf_A = (norm_sf(r.x2) - val.cdf) / A;
  g.cdf_v = t * r.Phi_diff / A;
  g.cdf_t = pdf;
  const Scalar f1 = r.phi1 * b / (t * A);
  const Scalar f2 = -r.phi2 * (b - A) / (t * A);
  g.pdf_b = (f1 + f2) / (t * s);
  g.pdf_A = -pdf / A - f2 / (t * s);
  g.pdf_v = r.Phi_diff / A - (f1 + f2) / s;
  g.pdf_t = -(f1 * b + f2 * (b - A)) / (t * t * s);
  return g;
}

inline void check_params(const LbaParams& p) {
  if (p.accumulators() < 2) throw DomainError("lba: at least two accumulators required");
  if (!(p.A > 0.0)) throw DomainError("lba: start-point range must be positive");
  if (!(p.b > p.A)) throw DomainError("lba: threshold must exceed the start-point range");
  if (!(p.s > 0.0)) throw DomainError("lba: drift SD must be positive");
  if (!(p.tau > 0.0)) throw DomainError("lba: non-decision time must be positive");
}

// CDF of one accumulator's finishing time at response time t.
template <typename Scalar>
Scalar lba_cdf_single(Scalar t, const BasicLbaParams<Scalar>& p, int accumulator) {
  return lba_accumulator(t - p.tau, p.b, p.A, p.v[accumulator], p.s).cdf;
}

template <typename Scalar>
Scalar lba_pdf_single(Scalar t, const BasicLbaParams<Scalar>& p, int accumulator) {
  return lba_accumulator(t - p.tau, p.b, p.A, p.v[accumulator], p.s).pdf;
}

// Joint density of accumulator `choice` finishing first at response time rt.
template <typename Scalar>
Scalar lba_density(int choice, Scalar rt, const BasicLbaParams<Scalar>& p) {
  const Scalar t = rt - p.tau;
  if (!(t > Scalar(0))) return Scalar(0);
  Scalar dens(1);
  for (int k = 0; k < p.accumulators(); ++k) {
    const auto acc = lba_accumulator(t, p.b, p.A, p.v[k], p.s);
    dens *= k == choice ? acc.pdf : acc.sf;
  }
  return dens < Scalar(kDensityFloor) ? Scalar(0) : dens;
}

// Joint density and its gradient over (b, A, v_1..v_C, tau); zero gradient outside the support.
template <typename Scalar, typename Derived>
Scalar lba_density_grad(int choice, Scalar rt, const BasicLbaParams<Scalar>& p,
                        Eigen::MatrixBase<Derived>& grad) {
  const int C = p.accumulators();
  grad.setZero();
  const Scalar t = rt - p.tau;
  if (!(t > Scalar(0))) return Scalar(0);
  AccumulatorVector<Scalar> factor(C);
  AccumulatorVector<Scalar> d_b(C), d_A(C), d_v(C), d_t(C);
  for (int k = 0; k < C; ++k) {
    const auto acc = lba_accumulator(t, p.b, p.A, p.v[k], p.s);
    const auto g = lba_accumulator_grad(t, p.b, p.A, p.v[k], p.s);
    if (k == choice) {
      factor[k] = acc.pdf;
      d_b[k] = g.pdf_b;
      d_A[k] = g.pdf_A;
      d_v[k] = g.pdf_v;
      d_t[k] = g.pdf_t;
    } else {
      factor[k] = acc.sf;
      d_b[k] = -g.cdf_b;
      d_A[k] = -g.cdf_A;
      d_v[k] = -g.cdf_v;
      d_t[k] = -g.cdf_t;
    }
  }
  Scalar dens(1);
  for (int k = 0; k < C; ++k) dens *= factor[k];
  for (int k = 0; k < C; ++k) {
    Scalar others(1);
    for (int m = 0; m < C; ++m)
      if (m != k) others *= factor[m];
    grad[0] += d_b[k] * others;
    grad[1] += d_A[k] * others;
    grad[2 + k] = d_v[k] * others;
    grad[C + 2] -= d_t[k] * others;
  }
  return dens;
}

}  // namespace eam
