#include "eam/pmwg.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <chrono>
#include <cmath>

#include "eam/common.hpp"
#include "eam/parallel.hpp"

namespace eam {

namespace {

constexpr std::uint64_t kGibbsStream = 1, kAlphaStream = 2, kBetaStream = 3;

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m) {
  return robust_llt(m).solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

// Sample covariances from collinear draws can factor with a pivot that is only roundoff.
bool near_singular(const Eigen::MatrixXd& m) {
  const Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return true;
  const Eigen::VectorXd piv = llt.matrixLLT().diagonal().cwiseAbs2();
  return piv.minCoeff() < 1e-12 * m.diagonal().cwiseAbs().maxCoeff();
}

}  // namespace

// ---- mixture -------------------------------------------------------------------------------

void GaussianMixture::add(double weight, Eigen::VectorXd mean, const Eigen::MatrixXd& cov) {
  if (!(weight > 0.0)) return;
  weights_.push_back(weight);
  means_.push_back(std::move(mean));
  factors_.push_back(robust_llt(0.5 * (cov + cov.transpose())));
}

Eigen::MatrixXd GaussianMixture::covariance(int k) const { return factors_[k].reconstructedMatrix(); }

Eigen::VectorXd GaussianMixture::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double total = 0.0;
  for (double w : weights_) total += w;
  double pick = u(rng) * total;
  int k = 0;
  while (k + 1 < components() && pick > weights_[k]) pick -= weights_[k++];
  return sample_mvn(means_[k], factors_[k].matrixL(), rng);
}

double GaussianMixture::log_density(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (double w : weights_) total += w;
  std::vector<double> terms(weights_.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    terms[k] = std::log(weights_[k] / total) + mvn_logpdf(x, means_[k], factors_[k]);
    top = std::max(top, terms[k]);
  }
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

// ---- configuration -------------------------------------------------------------------------

void PmwgConfig::validate() const {
  if (burn_in < 0 || adaptation < 0 || sampling < 0 || iterations() < 1)
    throw ConfigError("pmwg: stage lengths must be non-negative with at least one iteration");
  if (particles_alpha < 1 || particles_beta < 1) throw ConfigError("pmwg: particle counts must be >= 1");
  if (!(rw_scale > 0.0)) throw ConfigError("pmwg: random-walk scale must be positive");
  if (!(early_mix >= 0.0 && early_mix <= 1.0)) throw ConfigError("pmwg: early mixture weight must lie in [0, 1]");
  const double s = late_weights[0] + late_weights[1] + late_weights[2];
  if (std::abs(s - 1.0) > 1e-12 || late_weights[0] < 0 || late_weights[1] < 0 || late_weights[2] < 0)
    throw ConfigError("pmwg: stage-3 mixture weights must be non-negative and sum to 1");
  if (refresh_period < 1) throw ConfigError("pmwg: proposal refresh period must be >= 1");
  if (min_history < 2) throw ConfigError("pmwg: minimum history must be >= 2");
}

// ---- Gibbs blocks --------------------------------------------------------------------------

GaussianParams gibbs_mu_params(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& sigma,
                               const PriorSpec& prior) {
  const Eigen::Index J = alpha.cols();
  const Eigen::MatrixXd sigma_inv = inverse_spd(sigma);
  const Eigen::MatrixXd prior_prec = inverse_spd(prior.mu_cov);
  GaussianParams g;
  g.cov = inverse_spd(static_cast<double>(J) * sigma_inv + prior_prec);
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  const Eigen::VectorXd total = J > 0 ? Eigen::VectorXd(alpha.rowwise().sum()) : Eigen::VectorXd::Zero(sigma.rows());
  g.mean = g.cov * (sigma_inv * total + prior_prec * prior.mu_mean);
  return g;
}

Eigen::VectorXd gibbs_mu(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& sigma,
                         const PriorSpec& prior, Rng& rng) {
  const auto g = gibbs_mu_params(alpha, sigma, prior);
  return sample_mvn(g.mean, robust_llt(g.cov).matrixL(), rng);
}

IwParams gibbs_sigma_params(const Eigen::MatrixXd& alpha, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& a, const PriorSpec& prior) {
  const Eigen::MatrixXd centered = alpha.colwise() - mu;
  return {prior.sigma_df(static_cast<int>(mu.size())) + static_cast<double>(alpha.cols()),
          prior.sigma_scale(a) + centered * centered.transpose()};
}

Eigen::MatrixXd gibbs_sigma(const Eigen::MatrixXd& alpha, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& a, const PriorSpec& prior, Rng& rng) {
  const auto p = gibbs_sigma_params(alpha, mu, a, prior);
  return sample_iw(p.df, p.scale, rng);
}

IgParams gibbs_a_params(const Eigen::MatrixXd& sigma, const PriorSpec& prior) {
  if (!prior.huang_wand()) throw ConfigError("auxiliary scale draws need the Huang-Wand prior");
  const Eigen::Index D = sigma.rows();
  const Eigen::MatrixXd sigma_inv = inverse_spd(sigma);
  IgParams p{0.5 * (prior.hw_nu + static_cast<double>(D)), Eigen::VectorXd(D)};
  for (Eigen::Index d = 0; d < D; ++d)
    p.rate[d] = prior.hw_nu * sigma_inv(d, d) + 1.0 / (prior.hw_scale[d] * prior.hw_scale[d]);
  return p;
}

Eigen::VectorXd gibbs_a(const Eigen::MatrixXd& sigma, const PriorSpec& prior, Rng& rng) {
  const auto p = gibbs_a_params(sigma, prior);
  Eigen::VectorXd a(p.rate.size());
  for (Eigen::Index d = 0; d < a.size(); ++d) a[d] = sample_ig(p.shape, p.rate[d], rng);
  return a;
}

// ---- conditional Monte Carlo -----------------------------------------------------------------

CmcResult conditional_monte_carlo(const std::function<double(const Eigen::VectorXd&)>& log_target,
                                  const Eigen::VectorXd& retained, const GaussianMixture& proposal,
                                  int R, Rng& rng, bool parallel) {
  CmcResult out;
  out.value = retained;
  if (R <= 1) {
    out.weights = Eigen::VectorXd::Ones(1);
    return out;
  }
  std::vector<Eigen::VectorXd> particles(static_cast<std::size_t>(R));
  particles[0] = retained;
  for (int r = 1; r < R; ++r) particles[r] = proposal.sample(rng);
  Eigen::VectorXd logw(R);
  auto eval = [&](std::size_t r) {
    const double lt = log_target(particles[r]);
    logw[static_cast<Eigen::Index>(r)] = std::isnan(lt) ? -INFINITY : lt - proposal.log_density(particles[r]);
  };
  if (parallel)
    parallel_for(static_cast<std::size_t>(R), eval);
  else
    for (int r = 0; r < R; ++r) eval(static_cast<std::size_t>(r));

  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) {
    out.degenerate = true;
    out.weights = Eigen::VectorXd::Zero(R);
    out.weights[0] = 1.0;
    return out;
  }
  out.weights = (logw.array() - top).exp();
  out.weights /= out.weights.sum();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double pick = u(rng);
  int k = 0;
  while (k + 1 < R && pick > out.weights[k]) pick -= out.weights[k++];
  out.index = k;
  out.value = particles[k];
  return out;
}

CmcResult cmc_alpha(const SubjectLikelihood& lik, int subject, const Eigen::VectorXd& retained,
                    const Eigen::MatrixXd& beta, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                    const GaussianMixture& proposal, int R, Rng& rng) {
  const auto llt = robust_llt(sigma);
  auto target = [&](const Eigen::VectorXd& x) {
    return lik.loglik(subject, x, beta) + mvn_logpdf(x, mu, llt);
  };
  return conditional_monte_carlo(target, retained, proposal, R, rng, false);
}

CmcResult cmc_beta(const SubjectLikelihood& lik, const Eigen::MatrixXd& alpha,
                   const Eigen::MatrixXd& retained, const PriorSpec& prior,
                   const GaussianMixture& proposal, int R, Rng& rng) {
  const auto prior_llt = robust_llt(prior.beta_cov);
  const Eigen::Index rows = retained.rows(), cols = retained.cols();
  auto target = [&](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd b = unvec(x, rows, cols);
    double total = mvn_logpdf(x, prior.beta_mean, prior_llt);
    for (int j = 0; j < lik.subjects(); ++j) total += lik.loglik(j, alpha.col(j), b);
    return total;
  };
  auto res = conditional_monte_carlo(target, vec(retained), proposal, R, rng, true);
  return res;
}

// ---- proposals -----------------------------------------------------------------------------

ConditionalGaussian::ConditionalGaussian(const Eigen::MatrixXd& draws, int target_dim, double ridge) {
  const Eigen::Index n = draws.rows(), p = draws.cols();
  if (n < 2) throw NumericError("proposal fit needs at least two draws");
  const Eigen::VectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const int g = static_cast<int>(p) - target_dim;
  target_mean_ = mean.head(target_dim);
  given_mean_ = mean.tail(g);
  if (g > 0) {
    Eigen::MatrixXd Scc = cov.bottomRightCorner(g, g);
    const Eigen::MatrixXd Sac = cov.topRightCorner(target_dim, g);
    if (near_singular(Scc)) {
      Scc += ridge * Eigen::MatrixXd::Identity(g, g);
      repaired_ = true;
    }
    bool rep = false;
    const auto llt = robust_llt(Scc, ridge, &rep);
    repaired_ |= rep;
    gain_ = llt.solve(Sac.transpose()).transpose();
    cov_ = cov.topLeftCorner(target_dim, target_dim) - gain_ * Sac.transpose();
  } else {
    gain_.resize(target_dim, 0);
    cov_ = cov;
  }
  cov_ = 0.5 * (cov_ + cov_.transpose());
  if (near_singular(cov_)) {
    cov_ += ridge * std::max(1.0, cov_.diagonal().cwiseAbs().maxCoeff()) *
            Eigen::MatrixXd::Identity(target_dim, target_dim);
    repaired_ = true;
  }
  fitted_ = true;
}

Eigen::VectorXd ConditionalGaussian::mean(const Eigen::VectorXd& given) const {
  if (gain_.cols() == 0) return target_mean_;
  return target_mean_ + gain_ * (given - given_mean_);
}

GaussianMixture early_alpha_proposal(const Eigen::VectorXd& current, const Eigen::VectorXd& mu,
                                     const Eigen::MatrixXd& sigma, const PmwgConfig& cfg) {
  GaussianMixture m;
  m.add(cfg.early_mix, current, cfg.rw_scale * sigma);
  m.add(1.0 - cfg.early_mix, mu, sigma);
  return m;
}

GaussianMixture late_alpha_proposal(const Eigen::VectorXd& current, const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& sigma, const Eigen::VectorXd& cond_mean,
                                    const Eigen::MatrixXd& cond_cov, const PmwgConfig& cfg) {
  GaussianMixture m;
  m.add(cfg.late_weights[0], cond_mean, cond_cov);
  m.add(cfg.late_weights[1], current, cond_cov);
  m.add(cfg.late_weights[2], mu, sigma);
  return m;
}

Eigen::MatrixXd beta_walk_covariance(int beta_rows, const std::vector<Eigen::MatrixXd>& covariates) {
  if (covariates.empty()) throw ConfigError("coefficient proposals need covariate rows");
  const Eigen::Index d = covariates.front().cols();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : covariates) xtx += x.transpose() * x;
  const Eigen::MatrixXd inv = inverse_spd(xtx);
  const Eigen::Index n = beta_rows * d;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index c2 = 0; c2 < d; ++c2)
      for (Eigen::Index r = 0; r < beta_rows; ++r) out(r + beta_rows * c, r + beta_rows * c2) = inv(c, c2);
  return out;
}

std::vector<Eigen::MatrixXd> covariate_blocks(const Dataset& data) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& s : data.subjects) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(s.trials.size()), data.covariate_dim());
    for (std::size_t i = 0; i < s.trials.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = s.trials[i].covariates.transpose();
    out.push_back(std::move(x));
  }
  return out;
}

// ---- output ----------------------------------------------------------------------------------

Eigen::MatrixXd ChainOutput::rows(const Eigen::MatrixXd& m, int stage_id) const {
  std::vector<int> keep;
  for (std::size_t t = 0; t < stage.size(); ++t)
    if (stage[t] == stage_id) keep.push_back(static_cast<int>(t));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), m.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(keep[k]);
  return out;
}

HierState ChainOutput::state_at(int t) const {
  HierState s;
  s.mu = mu.row(t).transpose();
  s.sigma.resize(effect_dim, effect_dim);
  int k = 0;
  for (int c = 0; c < effect_dim; ++c)
    for (int r = c; r < effect_dim; ++r, ++k) s.sigma(r, c) = s.sigma(c, r) = sigma(t, k);
  s.a = a.cols() > 0 ? Eigen::VectorXd(a.row(t).transpose()) : Eigen::VectorXd();
  s.beta = unvec(beta.row(t).transpose(), beta_rows, covariate_dim);
  s.alpha = unvec(alpha.row(t).transpose(), effect_dim, subjects);
  return s;
}

std::vector<std::string> sigma_names(const std::vector<std::string>& slots) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < slots.size(); ++c)
    for (std::size_t r = c; r < slots.size(); ++r) out.push_back("sigma[" + slots[r] + "," + slots[c] + "]");
  return out;
}

std::vector<std::string> alpha_names(const std::vector<std::string>& slots, const std::vector<std::string>& subjects) {
  std::vector<std::string> out;
  for (const auto& s : subjects)
    for (const auto& p : slots) out.push_back(p + "[" + s + "]");
  return out;
}

std::vector<std::string> beta_names(const std::vector<std::string>& rows, const std::vector<std::string>& covariates) {
  std::vector<std::string> out;
  for (const auto& c : covariates)
    for (const auto& r : rows) out.push_back("beta[" + r + "," + c + "]");
  return out;
}

// ---- driver ----------------------------------------------------------------------------------

ChainOutput run_pmwg(const SubjectLikelihood& lik, const PriorSpec& prior, const HierState& init,
                     const PmwgConfig& cfg, const std::vector<Eigen::MatrixXd>& covariates,
                     const IterationCallback& on_iteration) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const int J = lik.subjects(), D = lik.effect_dim();
  const int R = lik.beta_rows();
  const int d = R > 0 ? lik.covariate_dim() : 0;
  const int P = R * d;
  prior.validate(D, P);
  if (init.alpha.rows() != D || init.alpha.cols() != J || init.mu.size() != D || init.sigma.rows() != D)
    throw ConfigError("pmwg: initial state has the wrong dimensions");

  HierState s = init;
  if (s.beta.size() != P) s.beta = Eigen::MatrixXd::Zero(R, d);
  if (prior.huang_wand() && s.a.size() != D) s.a = Eigen::VectorXd::Ones(D);

  for (int j = 0; j < J; ++j) {
    const double ll = lik.loglik(j, s.alpha.col(j), s.beta);
    if (!std::isfinite(ll))
      throw NumericError("pmwg: non-finite log-likelihood at the initial state for subject " + std::to_string(j));
  }

  const int T = cfg.iterations();
  ChainOutput out;
  out.effect_dim = D;
  out.subjects = J;
  out.beta_rows = R;
  out.covariate_dim = d;
  out.stage.resize(T);
  out.mu.resize(T, D);
  out.sigma.resize(T, D * (D + 1) / 2);
  out.a.resize(T, prior.huang_wand() ? D : 0);
  out.beta.resize(T, P);
  out.alpha.resize(T, J * D);
  out.alpha_move_rate = Eigen::VectorXd::Zero(J);

  const bool sample_beta = P > 0;
  Eigen::MatrixXd beta_walk;
  if (sample_beta) beta_walk = cfg.rw_scale * beta_walk_covariance(R, covariates);

  std::vector<ConditionalGaussian> fits(J);
  ConditionalGaussian beta_fit;
  bool have_fit = false, beta_conditional = false;
  const int stage3_start = cfg.burn_in + cfg.adaptation;
  int sampling_iters = 0;
  long beta_moves = 0;

  for (int t = 0; t < T; ++t) {
    const int stage = t < cfg.burn_in ? 1 : (t < stage3_start ? 2 : 3);
    Rng g = substream(cfg.seed, static_cast<std::uint64_t>(t), 0, kGibbsStream);
    s.mu = gibbs_mu(s.alpha, s.sigma, prior, g);
    s.sigma = gibbs_sigma(s.alpha, s.mu, s.a, prior, g);
    if (prior.huang_wand()) s.a = gibbs_a(s.sigma, prior, g);

    // stage-3 proposal fits from post-burn-in history
    const int history = t - cfg.burn_in;
    if (stage == 3 && t < cfg.refresh_stop && history >= cfg.min_history &&
        (!have_fit || (t - stage3_start) % cfg.refresh_period == 0)) {
      parallel_for(static_cast<std::size_t>(J), [&](std::size_t j) {
        Eigen::MatrixXd draws(history, 2 * D + P);
        for (int i = 0; i < history; ++i) {
          const int row = cfg.burn_in + i;
          draws.row(i) << out.alpha.row(row).segment(static_cast<Eigen::Index>(j) * D, D),
              out.mu.row(row), out.beta.row(row);
        }
        fits[j] = ConditionalGaussian(draws, D, cfg.ridge);
      }, cfg.threads);
      for (const auto& f : fits) out.ridge_repairs += f.repaired();
      if (sample_beta) {
        // condition on the random effects only when the joint fit is well determined
        beta_conditional = J * D + P < history / 2;
        const bool conditional = beta_conditional;
        Eigen::MatrixXd draws(history, P + (conditional ? J * D : 0));
        for (int i = 0; i < history; ++i) {
          const int row = cfg.burn_in + i;
          if (conditional)
            draws.row(i) << out.beta.row(row), out.alpha.row(row);
          else
            draws.row(i) = out.beta.row(row);
        }
        beta_fit = ConditionalGaussian(draws, P, cfg.ridge);
        out.ridge_repairs += beta_fit.repaired();
      }
      have_fit = true;
    }
    const bool late = stage == 3 && have_fit;

    // random effects, one conditional Monte Carlo step per subject
    const Eigen::VectorXd beta_vec = vec(s.beta);
    std::vector<int> moved(J, 0), degenerate(J, 0);
    Eigen::MatrixXd next_alpha = s.alpha;
    parallel_for(static_cast<std::size_t>(J), [&](std::size_t jj) {
      const int j = static_cast<int>(jj);
      Rng r = substream(cfg.seed, static_cast<std::uint64_t>(t), jj, kAlphaStream);
      const Eigen::VectorXd current = s.alpha.col(j);
      GaussianMixture proposal;
      if (late) {
        Eigen::VectorXd given(D + P);
        given << s.mu, beta_vec;
        proposal = late_alpha_proposal(current, s.mu, s.sigma, fits[j].mean(given), fits[j].cov(), cfg);
      } else {
        proposal = early_alpha_proposal(current, s.mu, s.sigma, cfg);
      }
      const auto res = cmc_alpha(lik, j, current, s.beta, s.mu, s.sigma, proposal, cfg.particles_alpha, r);
      next_alpha.col(j) = res.value;
      moved[j] = res.index != 0;
      degenerate[j] = res.degenerate;
    }, cfg.threads);
    s.alpha = next_alpha;
    for (int j = 0; j < J; ++j) {
      out.degenerate_steps += degenerate[j];
      if (stage == 3) out.alpha_move_rate[j] += moved[j];
    }

    if (sample_beta) {
      Rng r = substream(cfg.seed, static_cast<std::uint64_t>(t), 0, kBetaStream);
      GaussianMixture proposal;
      const Eigen::VectorXd current = vec(s.beta);
      if (late) {
        const Eigen::VectorXd given = beta_fit.mean(beta_conditional ? vec(s.alpha) : Eigen::VectorXd());
        proposal.add(cfg.late_weights[0], given, beta_fit.cov());
        proposal.add(cfg.late_weights[1], current, beta_fit.cov());
        proposal.add(cfg.late_weights[2], prior.beta_mean, prior.beta_cov);
      } else {
        proposal.add(cfg.early_mix, current, beta_walk);
        proposal.add(1.0 - cfg.early_mix, prior.beta_mean, prior.beta_cov);
      }
      const auto res = cmc_beta(lik, s.alpha, s.beta, prior, proposal, cfg.particles_beta, r);
      s.beta = unvec(res.value, R, d);
      out.degenerate_steps += res.degenerate;
      if (stage == 3) beta_moves += res.index != 0;
    }

    out.stage[t] = stage;
    out.mu.row(t) = s.mu.transpose();
    int k = 0;
    for (int c = 0; c < D; ++c)
      for (int r = c; r < D; ++r) out.sigma(t, k++) = s.sigma(r, c);
    if (prior.huang_wand()) out.a.row(t) = s.a.transpose();
    if (P > 0) out.beta.row(t) = vec(s.beta).transpose();
    out.alpha.row(t) = vec(s.alpha).transpose();
    if (stage == 3) ++sampling_iters;
    if (on_iteration) on_iteration(t, s);
  }
  if (sampling_iters > 0) {
    out.alpha_move_rate /= sampling_iters;
    out.beta_move_rate = static_cast<double>(beta_moves) / sampling_iters;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace eam
