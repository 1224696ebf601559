#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include "eam/common.hpp"

namespace eam {

inline constexpr double kDefaultEpsilon = 1e-10;
inline constexpr int kMaxSeriesTerms = 10000;

enum class Representation { SmallTime, LargeTime };

struct SeriesPlan {
  Representation representation = Representation::LargeTime;
  int kappa = 1;
  double epsilon = kDefaultEpsilon;
};

template <typename Scalar>
struct BasicSimpleDiffusionParams {
  Scalar v;    // drift
  Scalar a;    // boundary separation
  Scalar w;    // relative start point z/a
  Scalar t_d;  // decision time
};
using SimpleDiffusionParams = BasicSimpleDiffusionParams<double>;

// Number of times a truncation length was clipped at kMaxSeriesTerms.
inline std::atomic<std::uint64_t>& series_cap_hits() {
  static std::atomic<std::uint64_t> hits{0};
  return hits;
}

namespace detail {
inline int clip_terms(double k) {
  if (!(k <= kMaxSeriesTerms)) {
    series_cap_hits().fetch_add(1, std::memory_order_relaxed);
    return kMaxSeriesTerms;
  }
  return std::max(1, static_cast<int>(k));
}

// Term counts of the two truncation bounds; a negative root argument contributes 0.
inline double small_time_root(double t, double eps) {
  const double arg = -2.0 * t * std::log(2.0 * eps * std::sqrt(2.0 * std::numbers::pi * t));
  return arg > 0.0 ? std::sqrt(arg) : 0.0;
}
inline double large_time_root(double t, double eps) {
  constexpr double pi = std::numbers::pi;
  const double arg = -2.0 * std::log(pi * t * eps) / (pi * pi * t);
  return arg > 0.0 ? std::sqrt(arg) : 0.0;
}
}  // namespace detail

inline SeriesPlan choose_representation(double t_scaled, double epsilon = kDefaultEpsilon) {
  if (!(t_scaled > 0.0)) throw DomainError("choose_representation: scaled time must be positive");
  if (!(epsilon > 0.0) || epsilon > 0.01)
    throw DomainError("choose_representation: epsilon must lie in (0, 0.01]");
  const double small_root = detail::small_time_root(t_scaled, epsilon);
  const double large_root = detail::large_time_root(t_scaled, epsilon);
  const double lambda = 2.0 + small_root - large_root;
  SeriesPlan plan;
  plan.epsilon = epsilon;
  if (lambda >= 0.0) {
    plan.representation = Representation::LargeTime;
    plan.kappa = detail::clip_terms(
        std::ceil(std::max(large_root, 1.0 / (std::numbers::pi * std::sqrt(t_scaled)))));
  } else {
    plan.representation = Representation::SmallTime;
    plan.kappa =
        detail::clip_terms(std::ceil(std::max(2.0 + small_root, 1.0 + std::sqrt(t_scaled))));
  }
  return plan;
}

// Index range of the symmetric small-time sum for a given truncation length.
inline std::pair<int, int> small_time_range(int kappa) {
  return {-((kappa - 1) / 2), kappa / 2};
}

// Density of the unit-boundary, zero-drift process at the lower boundary.
template <typename Scalar>
Scalar wfpt_unit_density(Scalar t, Scalar w, const SeriesPlan& plan) {
  using std::exp;
  using std::sin;
  using std::sqrt;
  constexpr double pi = std::numbers::pi;
  Scalar sum(0);
  if (plan.representation == Representation::SmallTime) {
    const auto [lo, hi] = small_time_range(plan.kappa);
    for (int k = lo; k <= hi; ++k) {
      const Scalar x = w + Scalar(2 * k);
      sum += x * exp(-x * x / (Scalar(2) * t));
    }
    sum /= sqrt(Scalar(2 * pi) * t * t * t);
  } else {
    for (int k = 1; k <= plan.kappa; ++k) {
      const Scalar kk(k);
      sum += kk * exp(-kk * kk * Scalar(pi * pi) * t / Scalar(2)) * sin(kk * Scalar(pi) * w);
    }
    sum *= Scalar(pi);
  }
  return sum > Scalar(0) ? sum : Scalar(0);
}

inline void check_params(const SimpleDiffusionParams& p) {
  if (!(p.a > 0.0)) throw DomainError("wfpt: boundary separation must be positive");
  if (!(p.w > 0.0 && p.w < 1.0)) throw DomainError("wfpt: relative start must lie in (0,1)");
  if (!(p.t_d > 0.0)) throw DomainError("wfpt: decision time must be positive");
}

// Reflected parameters: the upper-boundary density equals the lower-boundary one at (-v, 1-w).
template <typename Scalar>
BasicSimpleDiffusionParams<Scalar> reflect(BasicSimpleDiffusionParams<Scalar> p) {
  p.v = -p.v;
  p.w = Scalar(1) - p.w;
  return p;
}

template <typename Scalar>
Scalar wfpt_density_with_plan(Boundary choice, BasicSimpleDiffusionParams<Scalar> p,
                              const SeriesPlan& plan) {
  using std::exp;
  if (choice == Boundary::Upper) p = reflect(p);
  const Scalar u = p.t_d / (p.a * p.a);
  const Scalar f = exp(-p.v * p.a * p.w - p.v * p.v * p.t_d / Scalar(2)) / (p.a * p.a) *
                   wfpt_unit_density(u, p.w, plan);
  return f < Scalar(kDensityFloor) ? Scalar(0) : f;
}

inline double wfpt_density(Boundary choice, const SimpleDiffusionParams& p,
                           double epsilon = kDefaultEpsilon) {
  check_params(p);
  const SeriesPlan plan = choose_representation(p.t_d / (p.a * p.a), epsilon);
  return wfpt_density_with_plan(choice, p, plan);
}

}  // namespace eam
