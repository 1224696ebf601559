#include "eam/random.hpp"

#include <cmath>
#include <numbers>

#include "eam/common.hpp"

namespace eam {

Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
  return Rng(seq);
}

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = z(rng);
  return out;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           Rng& rng) {
  return mean + chol_lower.triangularView<Eigen::Lower>() * standard_normal(mean.size(), rng);
}

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::VectorXd r = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet +
                 r.squaredNorm());
}

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  return mvn_logpdf(x, mean, llt);
}

double ig_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

double sample_ig(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0);
  return rate / g(rng);
}

double log_multigamma(double x, int dim) {
  double out = 0.25 * dim * (dim - 1) * std::log(std::numbers::pi);
  for (int j = 0; j < dim; ++j) out += std::lgamma(x - 0.5 * j);
  return out;
}

double iw_logpdf(const Eigen::MatrixXd& sigma, double df, const Eigen::MatrixXd& scale) {
  const int D = static_cast<int>(sigma.rows());
  Eigen::LLT<Eigen::MatrixXd> ls(sigma), lp(scale);
  if (ls.info() != Eigen::Success || lp.info() != Eigen::Success)
    throw DomainError("inverse-Wishart argument is not positive definite");
  const double logdet_s = 2.0 * ls.matrixLLT().diagonal().array().log().sum();
  const double logdet_p = 2.0 * lp.matrixLLT().diagonal().array().log().sum();
  const double trace = ls.solve(scale).trace();
  return 0.5 * df * logdet_p - 0.5 * df * D * std::log(2.0) - log_multigamma(0.5 * df, D) -
         0.5 * (df + D + 1) * logdet_s - 0.5 * trace;
}

BartlettNoise sample_bartlett_noise(int dim, double df, Rng& rng) {
  if (!(df > dim - 1)) throw DomainError("inverse-Wishart degrees of freedom too small");
  BartlettNoise n{Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd(dim)};
  std::normal_distribution<double> z(0.0, 1.0);
  for (int i = 0; i < dim; ++i) {
    std::chi_squared_distribution<double> chi(df - i);
    n.chi2[i] = chi(rng);
    for (int j = 0; j < i; ++j) n.lower(i, j) = z(rng);
  }
  return n;
}

Eigen::MatrixXd iw_from_noise(const Eigen::MatrixXd& scale, const BartlettNoise& noise) {
  // Σ⁻¹ ~ Wishart(df, scale⁻¹) = C⁻ᵀ A Aᵀ C⁻¹ with scale = C Cᵀ, so Σ = (C A⁻ᵀ)(C A⁻ᵀ)ᵀ.
  const int D = static_cast<int>(scale.rows());
  const auto llt = robust_llt(scale);
  Eigen::MatrixXd A = noise.lower.triangularView<Eigen::StrictlyLower>();
  for (int i = 0; i < D; ++i) A(i, i) = std::sqrt(noise.chi2[i]);
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd Ainv = A.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(D, D));
  const Eigen::MatrixXd M = L * Ainv.transpose();
  Eigen::MatrixXd sigma = M * M.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd sample_iw(double df, const Eigen::MatrixXd& scale, Rng& rng) {
  return iw_from_noise(scale, sample_bartlett_noise(static_cast<int>(scale.rows()), df, rng));
}

Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& m, double ridge, bool* repaired) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (repaired) *repaired = false;
  if (llt.info() == Eigen::Success) return llt;
  const double base = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  for (double r = ridge; r < 1e3; r *= 10.0) {
    llt.compute(m + r * base * Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    if (llt.info() == Eigen::Success) {
      if (repaired) *repaired = true;
      return llt;
    }
  }
  throw NumericError("matrix is not positive definite even after ridge repair");
}

}  // namespace eam
