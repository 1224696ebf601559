#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace eam {

using Rng = std::mt19937_64;

// Independent stream keyed by (seed, a, b, c); used to pre-assign streams to work items so
// results do not depend on the worker count.
Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng);

// Draw from N(mean, L Lᵀ) with L lower triangular.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower, Rng& rng);

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::LLT<Eigen::MatrixXd>& cov_llt);
double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

// Inverse gamma with shape/rate, density ∝ x^{-shape-1} exp(-rate/x).
double ig_logpdf(double x, double shape, double rate);
double sample_ig(double shape, double rate, Rng& rng);

double log_multigamma(double x, int dim);

// Inverse Wishart with density ∝ |Σ|^{-(df+D+1)/2} exp(-tr(scale Σ⁻¹)/2).
double iw_logpdf(const Eigen::MatrixXd& sigma, double df, const Eigen::MatrixXd& scale);

// Bartlett noise for an inverse-Wishart draw: a lower-triangular matrix of standard normals
// below the diagonal and chi-square variates (df − i degrees) on it, before square roots.
struct BartlettNoise {
  Eigen::MatrixXd lower;  // strictly lower part used
  Eigen::VectorXd chi2;
};
BartlettNoise sample_bartlett_noise(int dim, double df, Rng& rng);
// Deterministic map from noise to Σ ~ IW(df, scale).
Eigen::MatrixXd iw_from_noise(const Eigen::MatrixXd& scale, const BartlettNoise& noise);
Eigen::MatrixXd sample_iw(double df, const Eigen::MatrixXd& scale, Rng& rng);

// Cholesky with a diagonal ridge added on failure; throws NumericError if still indefinite.
Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& m, double ridge = 1e-6,
                                       bool* repaired = nullptr);

}  // namespace eam
