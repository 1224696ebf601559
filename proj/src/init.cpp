#include "eam/init.hpp"

#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <map>

#include "eam/common.hpp"
#include "eam/parallel.hpp"
#include "eam/transforms.hpp"

namespace eam {

namespace {

constexpr std::uint64_t kHeuristicStream = 0x4e0, kMapStream = 0x4e1;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double dataset_min_rt(const Dataset& data) {
  double m = INFINITY;
  for (const auto& s : data.subjects) m = std::min(m, s.min_rt());
  if (!std::isfinite(m) || !(m > 0.0)) throw ConfigError("initialization needs positive response times");
  return m;
}

}  // namespace

Eigen::VectorXd heuristic_natural(const Model& model, double min_rt, Rng& rng) {
  const auto& T = model.transform();
  Eigen::VectorXd n(T.size());
  if (model.kind() == ModelKind::Ddm) {
    const double a = uniform(rng, 0.5, 2.0);
    const double s_tau = uniform(rng, 0.01, 0.1);
    // lower non-decision bound strictly below the fastest response
    const double lower = std::max(0.5 * min_rt, min_rt - 0.01 - 0.1 * uniform(rng, 0.0, 0.1));
    n << uniform(rng, 1.0, 2.0), uniform(rng, 0.1, 2.0), a, a / 2, uniform(rng, 0.01, 0.5), lower + 0.5 * s_tau, s_tau;
    return n;
  }
  const int C = model.choices();
  const double A = uniform(rng, 0.3, 1.0);
  n[0] = A + uniform(rng, 0.2, 1.0);
  n[1] = A;
  for (int c = 0; c < C; ++c) n[2 + c] = uniform(rng, 1.0, 3.0);
  n[2 + C] = min_rt * uniform(rng, 0.3, 0.8);
  return n;
}

Eigen::VectorXd effects_for(const Model& model, const Dataset& data, const Eigen::VectorXd& transformed) {
  const auto& design = model.design();
  const int D = design.slots(), P = static_cast<int>(transformed.size());
  const Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(design.beta_rows(), data.covariate_dim());
  std::map<std::vector<double>, const Trial*> patterns;
  for (const auto& s : data.subjects)
    for (const auto& t : s.trials) patterns.emplace(t.attributes, &t);
  if (patterns.empty()) {
    static const Trial blank{};
    patterns.emplace(std::vector<double>{}, &blank);
  }
  Eigen::MatrixXd A(P * static_cast<int>(patterns.size()), D);
  Eigen::VectorXd rhs(A.rows());
  int row = 0;
  for (const auto& [key, trial] : patterns) {
    Trial t = *trial;
    t.covariates = Eigen::VectorXd::Zero(data.covariate_dim());
    const Eigen::VectorXd base = design.link(Eigen::VectorXd::Zero(D), beta, t);
    for (int k = 0; k < D; ++k)
      A.block(row, k, P, 1) = design.link(Eigen::VectorXd::Unit(D, k), beta, t) - base;
    rhs.segment(row, P) = transformed - base;
    row += P;
  }
  return A.completeOrthogonalDecomposition().solve(rhs);
}

HierState heuristic_state(const EamLikelihood& lik, const PriorSpec& prior, std::uint64_t seed) {
  const Model& model = lik.model();
  const Dataset& data = lik.data();
  const int D = lik.effect_dim(), J = lik.subjects();
  const double min_rt = dataset_min_rt(data);
  HierState s;
  s.beta = Eigen::MatrixXd::Zero(lik.beta_rows(), lik.beta_rows() > 0 ? lik.covariate_dim() : 0);
  s.sigma = 0.1 * Eigen::MatrixXd::Identity(D, D);
  if (prior.huang_wand()) s.a = Eigen::VectorXd::Ones(D);
  s.alpha.resize(D, J);

  Rng rng = substream(seed, kHeuristicStream);
  for (int attempt = 0;; ++attempt) {
    const Eigen::VectorXd natural = heuristic_natural(model, min_rt, rng);
    s.mu = effects_for(model, data, model.transform().to_unconstrained(natural, min_rt));
    bool ok = true;
    for (int j = 0; j < J && ok; ++j) ok = std::isfinite(lik.loglik(j, s.mu, s.beta));
    if (ok) break;
    if (attempt >= 10) throw NumericError("initialization: no heuristic start with a finite likelihood");
  }
  const double sd = std::sqrt(0.1);
  for (int j = 0; j < J; ++j) {
    Rng r = substream(seed, kHeuristicStream, static_cast<std::uint64_t>(j) + 1);
    s.alpha.col(j) = s.mu;
    for (int attempt = 0; attempt < 20; ++attempt) {
      const Eigen::VectorXd cand = s.mu + sd * standard_normal(D, r);
      if (std::isfinite(lik.loglik(j, cand, s.beta))) {
        s.alpha.col(j) = cand;
        break;
      }
    }
  }
  return s;
}

bool covariates_subject_level(const Dataset& data) {
  if (data.covariate_dim() == 0) return false;
  for (const auto& s : data.subjects)
    for (const auto& t : s.trials)
      if (!(t.covariates.array() == s.trials.front().covariates.array()).all()) return false;
  return true;
}

SubjectFit map_subject(const SubjectLikelihood& lik, int subject, const Eigen::VectorXd& start, bool fit_beta,
                       const MapConfig& cfg) {
  const int D = lik.effect_dim(), R = lik.beta_rows();
  const int d = R > 0 ? lik.covariate_dim() : 0;
  const int P = fit_beta ? R * d : 0;
  const int n = D + P;
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const Eigen::VectorXd alpha = x.head(D);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(R, d);
    if (P > 0) beta = Eigen::Map<const Eigen::MatrixXd>(x.data() + D, R, d);
    double f = -0.5 * x.squaredNorm() / cfg.prior_var;
    if (!grad) return f + lik.loglik(subject, alpha, beta);
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(D);
    Eigen::MatrixXd gb = Eigen::MatrixXd::Zero(R, d);
    f += lik.loglik_grad(subject, alpha, beta, ga, gb);
    grad->resize(n);
    grad->head(D) = ga;
    if (P > 0) grad->tail(P) = Eigen::Map<const Eigen::VectorXd>(gb.data(), P);
    *grad -= x / cfg.prior_var;
    return f;
  };

  SubjectFit fit;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  x.head(D) = start;
  OptimizerConfig oc;
  Optimizer opt(oc, Eigen::VectorXd::Constant(n, cfg.step));
  Eigen::VectorXd g;
  double f = objective(x, &g);
  Eigen::VectorXd best = x;
  double best_f = f;
  for (int step = 0; step < cfg.max_steps && std::isfinite(f); ++step) {
    if (g.norm() < cfg.grad_tol) {
      fit.converged = true;
      break;
    }
    opt.step(x, g);
    f = objective(x, &g);
    fit.steps = step + 1;
    if (f > best_f) {
      best_f = f;
      best = x;
    }
  }
  fit.alpha = best.head(D);
  fit.beta = Eigen::MatrixXd::Zero(R, d);
  if (P > 0) fit.beta = Eigen::Map<const Eigen::MatrixXd>(best.data() + D, R, d);
  fit.objective = best_f;
  return fit;
}

Eigen::VectorXd assemble_theta1(const std::vector<SubjectFit>& fits, const Theta1Layout& L) {
  if (static_cast<int>(fits.size()) != L.subjects) throw ConfigError("one fit per subject is required");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(L.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(L.effect_dim);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(L.beta_size());
  for (int j = 0; j < L.subjects; ++j) {
    theta.segment(L.alpha_offset(j), L.effect_dim) = fits[j].alpha;
    mu += fits[j].alpha;
    if (L.beta_size() > 0) beta += Eigen::Map<const Eigen::VectorXd>(fits[j].beta.data(), L.beta_size());
  }
  if (L.subjects > 0) {
    mu /= L.subjects;
    beta /= L.subjects;
  }
  theta.segment(L.beta_offset(), L.beta_size()) = beta;
  theta.segment(L.mu_offset(), L.effect_dim) = mu;
  return theta;  // log a stays zero
}

VariationalParams start_lambda(const HierarchicalTarget& target, const VbConfig& cfg, const Eigen::VectorXd& theta1) {
  const auto& L = target.layout();
  auto q = make_params(cfg.structure, target.from_theta1(theta1), Eigen::VectorXd::Constant(L.size(), 0.01),
                       cfg.factors, L.effect_dim, L.subjects, cfg.subject_factors);
  for (auto& b : q.blocks) b.B.setConstant(0.01);
  const auto e = elbo_estimate(target, q, cfg.effective_draws(), cfg.seed, 0, false);
  if (!std::isfinite(e.value)) throw NumericError("initialization: the ELBO at the starting point is not finite");
  return q;
}

InitResult map_init(const EamLikelihood& lik, const PriorSpec& prior, const VbConfig& vb, const MapConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  InitResult out;
  const int J = lik.subjects();
  for (const auto& s : lik.data().subjects)
    if (s.trials.empty()) throw ConfigError("initialization: subject '" + s.id + "' has no trials");
  out.subject_level_covariates = covariates_subject_level(lik.data());
  const bool fit_beta = lik.beta_rows() > 0 && lik.covariate_dim() > 0 && !out.subject_level_covariates;
  const HierState h = heuristic_state(lik, prior, cfg.seed);

  out.fits.resize(J);
  parallel_for(static_cast<std::size_t>(J), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    Rng rng = substream(cfg.seed, kMapStream, jj);
    Eigen::VectorXd start = h.alpha.col(j);
    const double min_rt = lik.data().subjects[jj].min_rt();
    for (int attempt = 0;; ++attempt) {
      SubjectFit fit = map_subject(lik, j, start, fit_beta, cfg);
      fit.restarts = attempt;
      if (std::isfinite(fit.objective)) {
        out.fits[jj] = std::move(fit);
        return;
      }
      if (attempt >= cfg.retries)
        throw NumericError("initialization: MAP objective not finite for subject '" + lik.data().subjects[jj].id + "'");
      const Eigen::VectorXd natural = heuristic_natural(lik.model(), min_rt, rng);
      start = effects_for(lik.model(), lik.data(), lik.model().transform().to_unconstrained(natural, min_rt));
    }
  }, cfg.threads);

  const HierarchicalTarget target(lik, prior);
  out.theta1 = assemble_theta1(out.fits, target.layout());
  out.lambda = start_lambda(target, vb, out.theta1);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Eigen::VectorXd average_draws(const ChainOutput& chain, const Theta1Layout& L, int last) {
  const int T = static_cast<int>(chain.mu.rows());
  if (last < 1 || last > T) throw ConfigError("averaging window must lie within the chain length");
  const int from = T - last;
  Eigen::VectorXd theta(L.size());
  theta.head(L.subjects * L.effect_dim) = chain.alpha.bottomRows(last).colwise().mean().transpose();
  if (L.beta_size() > 0) theta.segment(L.beta_offset(), L.beta_size()) = chain.beta.bottomRows(last).colwise().mean().transpose();
  theta.segment(L.mu_offset(), L.effect_dim) = chain.mu.bottomRows(last).colwise().mean().transpose();
  if (L.has_log_a)
    theta.tail(L.effect_dim) = chain.a.middleRows(from, last).array().log().colwise().mean().transpose().matrix();
  return theta;
}

InitResult pmwg_init(const EamLikelihood& lik, const PriorSpec& prior, const VbConfig& vb, const PmwgInitConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.average_last < 1 || cfg.average_last > cfg.iterations)
    throw ConfigError("initialization: averaging window must lie within the run length");
  PmwgConfig pc = cfg.pmwg;
  pc.burn_in = cfg.iterations;
  pc.adaptation = 0;
  pc.sampling = 0;
  const HierState start = heuristic_state(lik, prior, pc.seed);
  const auto chain = run_pmwg(lik, prior, start, pc, covariate_blocks(lik.data()));
  const HierarchicalTarget target(lik, prior);
  InitResult out;
  out.theta1 = average_draws(chain, target.layout(), cfg.average_last);
  out.lambda = start_lambda(target, vb, out.theta1);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace eam
