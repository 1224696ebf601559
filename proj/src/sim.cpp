#include "eam/sim.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "eam/parallel.hpp"

namespace eam {

SimulatedTrial simulate_lba_trial(const LbaParams& p, Rng& rng, long* redraws) {
  std::normal_distribution<double> drift(0.0, 1.0);
  std::uniform_real_distribution<double> start(0.0, 1.0);
  const int C = p.accumulators();
  for (;;) {
    int winner = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      const double d = p.v[c] + p.s * drift(rng);
      const double k = p.A * start(rng);
      if (d <= 0.0) continue;
      const double t = (p.b - k) / d;
      if (t < best) {
        best = t;
        winner = c;
      }
    }
    if (winner >= 0) return {winner, p.tau + best};
    if (redraws) ++*redraws;
  }
}

SimulatedTrial simulate_ddm_trial(const DdmParams& p, Rng& rng, const DdmSimOptions& opt,
                                  long* redraws) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double dt = opt.dt, sd = std::sqrt(dt);
  // exp(-40) is far below any uniform draw resolution that matters here
  constexpr double kBridgeCutoff = 40.0;
  for (;;) {
    const double v = p.mu_v + p.s_v * gauss(rng);
    const double z = p.mu_z + p.s_z * (unif(rng) - 0.5);
    const double tau = p.mu_tau + p.s_tau * (unif(rng) - 0.5);
    const double a = p.a;
    double x = z, t = 0.0;
    const double drift_step = v * dt;
    while (t < opt.max_decision_time) {
      const double next = x + drift_step + sd * gauss(rng);
      t += dt;
      if (next <= 0.0) return {0, tau + t - 0.5 * dt};
      if (next >= a) return {1, tau + t - 0.5 * dt};
      const double lo_arg = 2.0 * x * next / dt;
      if (lo_arg < kBridgeCutoff && unif(rng) < std::exp(-lo_arg)) return {0, tau + t - 0.5 * dt};
      const double hi_arg = 2.0 * (a - x) * (a - next) / dt;
      if (hi_arg < kBridgeCutoff && unif(rng) < std::exp(-hi_arg)) return {1, tau + t - 0.5 * dt};
      x = next;
    }
    if (redraws) ++*redraws;
  }
}

SimulatedTrial simulate_trial(const Model& model, const Eigen::VectorXd& n, Rng& rng,
                              const DdmSimOptions& opt) {
  if (model.kind() == ModelKind::Lba) {
    const int C = model.choices();
    LbaParams p;
    p.b = n[0];
    p.A = n[1];
    p.v = n.segment(2, C);
    p.s = model.lba_drift_sd;
    p.tau = n[C + 2];
    return simulate_lba_trial(p, rng);
  }
  return simulate_ddm_trial(DdmParams{n[0], n[1], n[2], n[3], n[4], n[5], n[6]}, rng, opt);
}

Dataset simulate_responses(const Model& model, const Dataset& skeleton, const Eigen::MatrixXd& alpha,
                           const Eigen::MatrixXd& beta, std::uint64_t seed, std::uint64_t stream_tag,
                           const DdmSimOptions& opt) {
  Dataset out = skeleton;
  const double no_min_rt = std::numeric_limits<double>::quiet_NaN();
  parallel_for(out.subjects.size(), [&](std::size_t j) {
    Rng rng = substream(seed, stream_tag, j);
    const Eigen::VectorXd a = alpha.col(static_cast<Eigen::Index>(j));
    for (auto& trial : out.subjects[j].trials) {
      const auto natural = link_trial(a, beta, trial, model.design(), model.transform(), no_min_rt);
      const auto s = simulate_trial(model, natural, rng, opt);
      trial.response = s.response;
      trial.rt = s.rt;
    }
  });
  return out;
}

SimulatedDataset simulate_dataset(const Model& model, const GroupTruth& truth, const Dataset& skeleton,
                                  std::uint64_t seed, const DdmSimOptions& opt) {
  const int D = static_cast<int>(truth.mu.size());
  const int J = static_cast<int>(skeleton.subjects.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(truth.sigma);
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  SimulatedDataset out;
  out.alpha.resize(D, J);
  for (int j = 0; j < J; ++j) {
    Rng rng = substream(seed, 0x5eed, static_cast<std::uint64_t>(j));
    out.alpha.col(j) = truth.mu + root * standard_normal(D, rng);
  }
  out.data = simulate_responses(model, skeleton, out.alpha, truth.beta, seed, 1, opt);
  return out;
}

Dataset make_skeleton(int subjects, const std::vector<int>& counts, const std::string& attribute,
                      const std::vector<std::string>& covariate_names,
                      const CovariateGenerator& covariates, std::uint64_t seed) {
  Dataset d;
  d.attribute_names = {attribute};
  d.covariate_names = covariate_names;
  for (int j = 0; j < subjects; ++j) {
    Rng rng = substream(seed, 0xc0, static_cast<std::uint64_t>(j));
    Subject s;
    s.id = "s" + std::to_string(j + 1);
    int i = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      for (int c = 0; c < counts[k]; ++c, ++i) {
        Trial t;
        t.attributes = {static_cast<double>(k)};
        t.covariates = covariates ? covariates(j, i, rng) : Eigen::VectorXd();
        s.trials.push_back(std::move(t));
      }
    }
    d.subjects.push_back(std::move(s));
  }
  return d;
}

// ---- posterior predictive ------------------------------------------------------------------

double sample_quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

std::string format_value(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

std::vector<CellStatistic> cell_statistics(const Dataset& data, const PpcSpec& spec) {
  std::vector<int> idx;
  for (const auto& name : spec.cell_attributes) {
    const int k = data.attribute_index(name);
    if (k < 0) throw ConfigError("ppc: unknown cell attribute '" + name + "'");
    idx.push_back(k);
  }
  int correct = -1;
  if (!spec.correct_attribute.empty()) {
    correct = data.attribute_index(spec.correct_attribute);
    if (correct < 0) throw ConfigError("ppc: unknown attribute '" + spec.correct_attribute + "'");
  }
  struct Sums {
    double median_sum = 0.0, accuracy_sum = 0.0;
    int subjects = 0;
  };
  std::map<std::vector<double>, Sums> cells;
  for (const auto& s : data.subjects) {
    std::map<std::vector<double>, std::pair<std::vector<double>, int>> per;
    for (const auto& t : s.trials) {
      std::vector<double> key;
      for (int k : idx) key.push_back(t.attributes[k]);
      auto& [rts, hits] = per[key];
      rts.push_back(t.rt);
      const bool hit = correct >= 0 ? t.response == static_cast<int>(t.attributes[correct])
                                    : t.response == 1;
      hits += hit ? 1 : 0;
    }
    for (const auto& [key, cell] : per) {
      auto& c = cells[key];
      c.median_sum += sample_quantile(cell.first, 0.5);
      c.accuracy_sum += static_cast<double>(cell.second) / static_cast<double>(cell.first.size());
      ++c.subjects;
    }
  }
  std::vector<CellStatistic> out;
  for (const auto& [key, c] : cells) {
    std::string label;
    for (std::size_t k = 0; k < key.size(); ++k) {
      if (k) label += ",";
      label += spec.cell_attributes[k] + "=" + format_value(key[k]);
    }
    if (label.empty()) label = "all";
    out.push_back({label, "median_rt", c.median_sum / c.subjects});
    out.push_back({label, "accuracy", c.accuracy_sum / c.subjects});
  }
  return out;
}

std::vector<PpcRow> posterior_predictive(const Model& model, const Dataset& observed,
                                         const std::vector<EffectDraw>& draws, const PpcSpec& spec,
                                         std::uint64_t seed, const std::string& block,
                                         const DdmSimOptions& opt) {
  const auto obs = cell_statistics(observed, spec);
  std::vector<std::vector<double>> predicted(obs.size());
  for (std::size_t r = 0; r < draws.size(); ++r) {
    const auto rep = simulate_responses(model, observed, draws[r].alpha, draws[r].beta, seed, 100 + r, opt);
    const auto stats = cell_statistics(rep, spec);
    // cells are keyed identically because the skeleton is shared
    for (std::size_t k = 0; k < obs.size(); ++k) predicted[k].push_back(stats[k].value);
  }
  std::vector<PpcRow> rows;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    PpcRow row{block, obs[k].condition, obs[k].statistic, {}, obs[k].value};
    const double qs[5] = {0.025, 0.25, 0.5, 0.75, 0.975};
    for (int q = 0; q < 5; ++q) row.quantiles[q] = sample_quantile(predicted[k], qs[q]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace eam
