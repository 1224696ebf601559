#include "eam/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <unsupported/Eigen/FFT>

#include "eam/common.hpp"

namespace eam {

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Eigen::VectorXd autocorrelation(const Eigen::VectorXd& chain, int max_lag, AutocorrMethod method) {
  const Eigen::Index M = chain.size();
  max_lag = static_cast<int>(std::min<Eigen::Index>(max_lag, M - 1));
  const Eigen::VectorXd x = chain.array() - chain.mean();
  Eigen::VectorXd acov(max_lag + 1);
  if (method == AutocorrMethod::Direct) {
    for (int k = 0; k <= max_lag; ++k)
      acov[k] = x.head(M - k).dot(x.tail(M - k)) / static_cast<double>(M);
  } else {
    Eigen::Index n = 1;
    while (n < 2 * M) n <<= 1;
    std::vector<double> padded(static_cast<std::size_t>(n), 0.0);
    std::copy(x.data(), x.data() + M, padded.begin());
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, padded);
    for (auto& c : spec) c = std::norm(c);
    std::vector<double> back;
    fft.inv(back, spec);
    for (int k = 0; k <= max_lag; ++k) acov[k] = back[static_cast<std::size_t>(k)] / static_cast<double>(M);
  }
  if (!(acov[0] > 0.0)) return Eigen::VectorXd::Zero(max_lag + 1);
  return acov / acov[0];
}

IactResult iact(const Eigen::VectorXd& chain, AutocorrMethod method) {
  const Eigen::Index M = chain.size();
  if (M < 100) throw DomainError("iact needs at least 100 draws");
  IactResult out;
  const double centered_ss = (chain.array() - chain.mean()).square().sum();
  if (!(centered_ss > 0.0) || !std::isfinite(centered_ss)) return out;
  // L_M ≤ 1000, so lags beyond 1000 are never needed
  const int max_lag = static_cast<int>(std::min<Eigen::Index>(1000, M - 1));
  const Eigen::VectorXd rho = autocorrelation(chain, max_lag, method);
  const double cutoff = 2.0 / std::sqrt(static_cast<double>(M));
  int L = max_lag;
  for (int k = 1; k <= max_lag; ++k) {
    if (std::abs(rho[k]) < cutoff) {
      L = k;
      break;
    }
  }
  out.defined = true;
  out.window = L;
  out.value = 1.0 + 2.0 * rho.segment(1, L).sum();
  return out;
}

std::vector<ParamSummary> summarize(const Eigen::MatrixXd& draws, const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != draws.cols())
    throw ConfigError("summarize: name count does not match draw columns");
  std::vector<ParamSummary> out;
  const Eigen::Index M = draws.rows();
  for (Eigen::Index p = 0; p < draws.cols(); ++p) {
    ParamSummary s;
    s.name = names[static_cast<std::size_t>(p)];
    const Eigen::VectorXd col = draws.col(p);
    s.mean = col.mean();
    s.sd = M > 1 ? std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(M - 1)) : 0.0;
    std::vector<double> v(col.data(), col.data() + M);
    std::sort(v.begin(), v.end());
    if (!v.empty()) {
      s.q025 = quantile_sorted(v, 0.025);
      s.q50 = quantile_sorted(v, 0.5);
      s.q975 = quantile_sorted(v, 0.975);
    }
    if (M >= 100) s.iact = iact(col);
    out.push_back(s);
  }
  return out;
}

std::vector<ParamSummary> summarize_mapped(
    const Eigen::MatrixXd& draws, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
    const std::vector<std::string>& mapped_names) {
  Eigen::MatrixXd mapped(draws.rows(), static_cast<Eigen::Index>(mapped_names.size()));
  for (Eigen::Index r = 0; r < draws.rows(); ++r) mapped.row(r) = map(draws.row(r).transpose()).transpose();
  return summarize(mapped, mapped_names);
}

ComparisonReport compare_moments(const std::vector<ParamSummary>& reference,
                                 const std::vector<ParamSummary>& approx) {
  std::map<std::string, const ParamSummary*> other;
  for (const auto& s : approx) other[s.name] = &s;
  ComparisonReport rep;
  for (const auto& r : reference) {
    const auto it = other.find(r.name);
    if (it == other.end()) {
      rep.unmatched.push_back(r.name);
      continue;
    }
    const auto& a = *it->second;
    const double gap = r.sd > 0.0 ? (a.mean - r.mean) / r.sd : (a.mean == r.mean ? 0.0 : INFINITY);
    rep.rows.push_back({r.name, r.mean, a.mean, r.sd, a.sd, gap});
    other.erase(it);
  }
  for (const auto& [name, ptr] : other) rep.unmatched.push_back(name);
  return rep;
}

}  // namespace eam
