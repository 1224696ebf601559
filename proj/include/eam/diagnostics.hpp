#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace eam {

struct IactResult {
  bool defined = false;  // false for zero-variance chains
  double value = 0.0;
  int window = 0;        // number of autocorrelation lags summed
};

enum class AutocorrMethod { Fft, Direct };

// Autocorrelations at lags 0..max_lag (biased autocovariance normalized by lag 0).
Eigen::VectorXd autocorrelation(const Eigen::VectorXd& chain, int max_lag,
                                AutocorrMethod method = AutocorrMethod::Fft);

// 1 + 2 Σ_{k=1}^{L_M} ρ̂_k with L = first lag where |ρ̂| < 2/√M and L_M = min(1000, L).
// Requires at least 100 draws.
IactResult iact(const Eigen::VectorXd& chain, AutocorrMethod method = AutocorrMethod::Fft);

struct ParamSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q50 = 0.0, q975 = 0.0;
  IactResult iact;
};

// draws: one row per retained iteration, one column per parameter.
std::vector<ParamSummary> summarize(const Eigen::MatrixXd& draws, const std::vector<std::string>& names);

// Applies `map` to each draw (row) before summarizing, e.g. to report natural-scale values.
std::vector<ParamSummary> summarize_mapped(
    const Eigen::MatrixXd& draws, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
    const std::vector<std::string>& mapped_names);

struct MomentComparison {
  std::string name;
  double mean_reference = 0.0, mean_approx = 0.0, sd_reference = 0.0, sd_approx = 0.0;
  double standardized_gap = 0.0;  // (mean_approx − mean_reference) / sd_reference
};

struct ComparisonReport {
  std::vector<MomentComparison> rows;
  std::vector<std::string> unmatched;  // names present on one side only
};

ComparisonReport compare_moments(const std::vector<ParamSummary>& reference,
                                 const std::vector<ParamSummary>& approx);

}  // namespace eam
