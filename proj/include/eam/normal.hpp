#pragma once

#include <cmath>
#include <numbers>

namespace eam {

template <typename Scalar>
Scalar norm_pdf(Scalar x) {
  using std::exp;
  return exp(Scalar(-0.5) * x * x) * Scalar(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

template <typename Scalar>
Scalar norm_cdf(Scalar x) {
  using std::erfc;
  return Scalar(0.5) * erfc(-x * Scalar(0.5 * std::numbers::sqrt2));
}

// Upper tail 1 - Phi(x), accurate for large positive x.
template <typename Scalar>
Scalar norm_sf(Scalar x) {
  using std::erfc;
  return Scalar(0.5) * erfc(x * Scalar(0.5 * std::numbers::sqrt2));
}

}  // namespace eam
