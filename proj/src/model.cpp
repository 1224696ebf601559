#include "eam/model.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "eam/ddm.hpp"
#include "eam/lba.hpp"
#include "eam/parallel.hpp"
#include "eam/random.hpp"

namespace eam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

LbaParams lba_params(const Eigen::VectorXd& n, double s) {
  const int C = static_cast<int>(n.size()) - 3;
  LbaParams p;
  p.b = n[0];
  p.A = n[1];
  p.v = n.segment(2, C);
  p.s = s;
  p.tau = n[C + 2];
  return p;
}

DdmParams ddm_params(const Eigen::VectorXd& n) {
  return DdmParams{n[0], n[1], n[2], n[3], n[4], n[5], n[6]};
}

Boundary ddm_boundary(int response) { return response == 1 ? Boundary::Upper : Boundary::Lower; }

}  // namespace

Model::Model(ModelKind kind, int accumulators, LinkingDesign design, ContaminationSpec contamination,
             QuadratureRule quad, double epsilon)
    : kind_(kind),
      choices_(kind == ModelKind::Lba ? accumulators : 2),
      transform_(kind == ModelKind::Lba ? lba_transform(accumulators) : ddm_transform()),
      design_(std::move(design)),
      contamination_(contamination),
      quad_(std::move(quad)),
      epsilon_(epsilon) {
  if (!(contamination_.weight >= 0.0 && contamination_.weight < 1.0))
    throw ConfigError("contamination weight must lie in [0, 1)");
  if (!(contamination_.rt_window > 0.0)) throw ConfigError("contamination RT window must be positive");
  design_.validate(transform_.size());
}

int Model::tau_lower_slot() const {
  if (kind_ != ModelKind::Ddm) return -1;
  const auto& r = design_.recipes[5];
  if (r.terms.size() != 1 || r.beta_row >= 0 || r.offset != 0.0) return -1;
  const auto& t = r.terms[0];
  if (t.scale != 1.0 || !t.attribute.empty() || !t.when.empty()) return -1;
  return t.slot;
}

bool Model::valid(const Eigen::VectorXd& n) const {
  if (!n.allFinite()) return false;
  if (kind_ == ModelKind::Lba) {
    const int C = choices_;
    return n[1] > 0.0 && n[0] > n[1] && n[C + 2] > 0.0;
  }
  return n[1] > 0.0 && n[4] > 0.0 && n[6] > 0.0 && n[3] - 0.5 * n[4] > 0.0 &&
         n[2] > n[3] + 0.5 * n[4] && n[5] - 0.5 * n[6] > 0.0;
}

double Model::raw_density(const Trial& trial, const Eigen::VectorXd& natural) const {
  if (!valid(natural)) return 0.0;
  if (kind_ == ModelKind::Lba)
    return lba_density(trial.response, trial.rt, lba_params(natural, lba_drift_sd));
  return ddm_density(ddm_boundary(trial.response), trial.rt, ddm_params(natural), quad_, epsilon_);
}

double Model::raw_density_grad(const Trial& trial, const Eigen::VectorXd& natural,
                               Eigen::VectorXd& grad) const {
  grad.setZero(natural.size());
  if (!valid(natural)) return 0.0;
  if (kind_ == ModelKind::Lba) {
    const auto p = lba_params(natural, lba_drift_sd);
    return lba_density_grad(trial.response, trial.rt, p, grad);
  }
  const auto r = ddm_density_grad(ddm_boundary(trial.response), trial.rt, ddm_params(natural), quad_,
                                  epsilon_);
  for (int k = 0; k < 7; ++k) grad[k] = r.density * r.grad_log[k];
  return r.density;
}

double Model::contaminant_density(const Trial& trial) const {
  const double W = contamination_.rt_window;
  return (trial.rt > 0.0 && trial.rt < W) ? 1.0 / (choices_ * W) : 0.0;
}

double Model::contaminated_density(const Trial& trial, const Eigen::VectorXd& natural) const {
  const double w = contamination_.weight;
  return (1.0 - w) * raw_density(trial, natural) + w * contaminant_density(trial);
}

double Model::trial_log_density(const Trial& trial, const Eigen::VectorXd& natural) const {
  const double d = contaminated_density(trial, natural);
  return d > 0.0 ? std::max(std::log(d), kLogFloor) : kLogFloor;
}

double Model::subject_loglik(const Subject& subject, const Eigen::VectorXd& alpha,
                             const Eigen::MatrixXd& beta) const {
  double total = 0.0;
  for (const auto& trial : subject.trials)
    total += trial_log_density(trial, transform_.from_unconstrained(design_.link(alpha, beta, trial), kNaN));
  return total;
}

double Model::subject_loglik_grad(const Subject& subject, const Eigen::VectorXd& alpha,
                                  const Eigen::MatrixXd& beta, Eigen::VectorXd& grad_alpha,
                                  Eigen::MatrixXd& grad_beta) const {
  const double w = contamination_.weight;
  double total = 0.0;
  Eigen::VectorXd grad_natural, grad_link;
  for (const auto& trial : subject.trials) {
    const Eigen::VectorXd x = design_.link(alpha, beta, trial);
    const Eigen::VectorXd natural = transform_.from_unconstrained(x, kNaN);
    const double p = raw_density_grad(trial, natural, grad_natural);
    const double mixed = (1.0 - w) * p + w * contaminant_density(trial);
    const double logd = mixed > 0.0 ? std::log(mixed) : kLogFloor;
    if (logd <= kLogFloor) {
      total += kLogFloor;  // floored: flat in the parameters
      continue;
    }
    total += logd;
    if (p == 0.0) continue;
    grad_natural *= (1.0 - w) / mixed;
    transform_.pullback(x, grad_natural, grad_link, kNaN);
    design_.accumulate(grad_link, trial, grad_alpha, grad_beta);
  }
  return total;
}

EamLikelihood::EamLikelihood(const Model& model, const Dataset& data) : model_(model), data_(data) {
  if (!model.design().bound()) throw ConfigError("design must be bound to the dataset attributes");
  if (model.beta_rows() > 0 && data.covariate_dim() == 0)
    throw ConfigError("design declares coefficient rows but the data has no covariates");
  for (const auto& s : data.subjects) {
    for (std::size_t i = 0; i < s.trials.size(); ++i) {
      const auto& t = s.trials[i];
      if (t.response < 0 || t.response >= model.choices())
        throw ConfigError("subject " + s.id + " trial " + std::to_string(i) +
                          ": response out of range");
      if (static_cast<int>(t.attributes.size()) != static_cast<int>(data.attribute_names.size()) ||
          t.covariates.size() != data.covariate_dim())
        throw ConfigError("subject " + s.id + " trial " + std::to_string(i) +
                          ": attribute or covariate count mismatch");
    }
    min_rt_.push_back(s.min_rt());
  }
}

double EamLikelihood::loglik(int subject, const Eigen::VectorXd& alpha,
                             const Eigen::MatrixXd& beta) const {
  return model_.subject_loglik(data_.subjects[subject], alpha, beta);
}

double EamLikelihood::loglik_grad(int subject, const Eigen::VectorXd& alpha,
                                  const Eigen::MatrixXd& beta, Eigen::VectorXd& grad_alpha,
                                  Eigen::MatrixXd& grad_beta) const {
  return model_.subject_loglik_grad(data_.subjects[subject], alpha, beta, grad_alpha, grad_beta);
}

// ---- priors --------------------------------------------------------------------------------

PriorSpec PriorSpec::defaults(int D, int beta_size, CovariancePrior cov) {
  PriorSpec p;
  p.mu_mean = Eigen::VectorXd::Zero(D);
  p.mu_cov = 3.0 * Eigen::MatrixXd::Identity(D, D);
  p.beta_mean = Eigen::VectorXd::Zero(beta_size);
  p.beta_cov = 9.0 * Eigen::MatrixXd::Identity(beta_size, beta_size);
  p.cov_prior = cov;
  p.hw_scale = Eigen::VectorXd::Ones(D);
  p.iw_scale = Eigen::MatrixXd::Identity(D, D);
  return p;
}

void PriorSpec::validate(int D, int beta_size) const {
  auto spd = [](const Eigen::MatrixXd& m) {
    return m.rows() == m.cols() && Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success;
  };
  if (mu_mean.size() != D || mu_cov.rows() != D || !spd(mu_cov))
    throw ConfigError("prior: group-mean prior has wrong size or is not positive definite");
  if (beta_mean.size() != beta_size || beta_cov.rows() != beta_size ||
      (beta_size > 0 && !spd(beta_cov)))
    throw ConfigError("prior: coefficient prior has wrong size or is not positive definite");
  if (huang_wand()) {
    if (!(hw_nu > 0.0) || hw_scale.size() != D || !(hw_scale.array() > 0.0).all())
      throw ConfigError("prior: Huang-Wand settings invalid");
  } else {
    if (!(iw_df > D - 1) || iw_scale.rows() != D || !spd(iw_scale))
      throw ConfigError("prior: inverse-Wishart settings invalid");
  }
}

double PriorSpec::sigma_df(int D) const { return huang_wand() ? hw_nu + D - 1 : iw_df; }

Eigen::MatrixXd PriorSpec::sigma_scale(const Eigen::VectorXd& a) const {
  if (!huang_wand()) return iw_scale;
  return (2.0 * hw_nu * a.cwiseInverse()).asDiagonal();
}

double log_prior(const HierState& s, const PriorSpec& prior) {
  double lp = mvn_logpdf(s.mu, prior.mu_mean, prior.mu_cov);
  if (s.beta.size() > 0) {
    const Eigen::Map<const Eigen::VectorXd> bvec(s.beta.data(), s.beta.size());
    lp += mvn_logpdf(bvec, prior.beta_mean, prior.beta_cov);
  }
  const int D = static_cast<int>(s.mu.size());
  lp += iw_logpdf(s.sigma, prior.sigma_df(D), prior.sigma_scale(s.a));
  if (prior.huang_wand())
    for (int d = 0; d < D; ++d)
      lp += ig_logpdf(s.a[d], 0.5, 1.0 / (prior.hw_scale[d] * prior.hw_scale[d])) + std::log(s.a[d]);
  return lp;
}

double log_joint(const HierState& s, const SubjectLikelihood& lik, const PriorSpec& prior) {
  Eigen::LLT<Eigen::MatrixXd> llt(s.sigma);
  if (llt.info() != Eigen::Success) throw DomainError("group covariance is not positive definite");
  const int J = lik.subjects();
  std::vector<double> per(J);
  parallel_for(J, [&](std::size_t j) {
    const Eigen::VectorXd a = s.alpha.col(j);
    per[j] = lik.loglik(static_cast<int>(j), a, s.beta) + mvn_logpdf(a, s.mu, llt);
  });
  double total = log_prior(s, prior);
  for (double v : per) total += v;
  return total;
}

// ---- θ₁ layout and gradients ---------------------------------------------------------------

Theta1Layout::Theta1Layout(const SubjectLikelihood& lik, const PriorSpec& prior)
    : subjects(lik.subjects()),
      effect_dim(lik.effect_dim()),
      beta_rows(lik.beta_rows()),
      covariate_dim(lik.beta_rows() > 0 ? lik.covariate_dim() : 0),
      has_log_a(prior.huang_wand()) {}

Eigen::VectorXd Theta1Layout::pack(const HierState& s) const {
  Eigen::VectorXd t(size());
  for (int j = 0; j < subjects; ++j) t.segment(alpha_offset(j), effect_dim) = s.alpha.col(j);
  if (beta_size() > 0)
    t.segment(beta_offset(), beta_size()) =
        Eigen::Map<const Eigen::VectorXd>(s.beta.data(), beta_size());
  t.segment(mu_offset(), effect_dim) = s.mu;
  if (has_log_a) t.segment(log_a_offset(), effect_dim) = s.a.array().log().matrix();
  return t;
}

void Theta1Layout::unpack(const Eigen::VectorXd& t, HierState& s) const {
  s.alpha.resize(effect_dim, subjects);
  for (int j = 0; j < subjects; ++j) s.alpha.col(j) = t.segment(alpha_offset(j), effect_dim);
  s.beta = Eigen::Map<const Eigen::MatrixXd>(t.data() + beta_offset(), beta_rows, covariate_dim);
  s.mu = t.segment(mu_offset(), effect_dim);
  if (has_log_a)
    s.a = t.segment(log_a_offset(), effect_dim).array().exp().matrix();
  else
    s.a.resize(0);
}

double posterior_sigma_df(const PriorSpec& prior, const Theta1Layout& layout) {
  return prior.sigma_df(layout.effect_dim) + layout.subjects;
}

Eigen::MatrixXd posterior_sigma_scale(const HierState& s, const PriorSpec& prior) {
  const Eigen::MatrixXd centered = s.alpha.colwise() - s.mu;
  return prior.sigma_scale(s.a) + centered * centered.transpose();
}

Eigen::VectorXd sigma_conditional_grad(const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                                       const PriorSpec& prior, const Theta1Layout& layout) {
  HierState s;
  layout.unpack(theta, s);
  const int D = layout.effect_dim;
  const double nu = posterior_sigma_df(prior, layout);
  const auto psi_llt = robust_llt(posterior_sigma_scale(s, prior));
  const Eigen::MatrixXd psi_inv = psi_llt.solve(Eigen::MatrixXd::Identity(D, D));
  const Eigen::MatrixXd sigma_inv = robust_llt(sigma).solve(Eigen::MatrixXd::Identity(D, D));
  const Eigen::MatrixXd M = nu * psi_inv - sigma_inv;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.size());
  for (int j = 0; j < layout.subjects; ++j) {
    const Eigen::VectorXd gj = M * (s.alpha.col(j) - s.mu);
    g.segment(layout.alpha_offset(j), D) = gj;
    g.segment(layout.mu_offset(), D) -= gj;
  }
  if (layout.has_log_a)
    for (int d = 0; d < D; ++d)
      g[layout.log_a_offset() + d] = -(prior.hw_nu / s.a[d]) * M(d, d);
  return g;
}

JointEval eval_theta1(const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                      const SubjectLikelihood& lik, const PriorSpec& prior,
                      const Theta1Layout& layout, bool with_grad, bool control_variate) {
  HierState s;
  layout.unpack(theta, s);
  s.sigma = sigma;
  const int J = layout.subjects, D = layout.effect_dim;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("group covariance is not positive definite");

  std::vector<double> per(J);
  std::vector<Eigen::VectorXd> ga(with_grad ? J : 0);
  std::vector<Eigen::MatrixXd> gb(with_grad ? J : 0);
  parallel_for(J, [&](std::size_t j) {
    const Eigen::VectorXd a = s.alpha.col(j);
    const int jj = static_cast<int>(j);
    if (with_grad) {
      ga[j].setZero(D);
      gb[j].setZero(layout.beta_rows, layout.covariate_dim);
      per[j] = lik.loglik_grad(jj, a, s.beta, ga[j], gb[j]);
    } else {
      per[j] = lik.loglik(jj, a, s.beta);
    }
    per[j] += mvn_logpdf(a, s.mu, llt);
  });

  JointEval out;
  out.log_joint = log_prior(s, prior);
  for (double v : per) out.log_joint += v;
  out.log_sigma_cond = iw_logpdf(sigma, posterior_sigma_df(prior, layout), posterior_sigma_scale(s, prior));
  if (!with_grad) return out;

  const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(D, D));
  Eigen::VectorXd& g = out.grad;
  g.setZero(layout.size());
  for (int j = 0; j < J; ++j) {
    const Eigen::VectorXd r = sigma_inv * (s.alpha.col(j) - s.mu);
    g.segment(layout.alpha_offset(j), D) = ga[j] - r;
    g.segment(layout.mu_offset(), D) += r;
    if (layout.beta_size() > 0)
      g.segment(layout.beta_offset(), layout.beta_size()) +=
          Eigen::Map<const Eigen::VectorXd>(gb[j].data(), layout.beta_size());
  }
  g.segment(layout.mu_offset(), D) -= prior.mu_cov.llt().solve(s.mu - prior.mu_mean);
  if (layout.beta_size() > 0) {
    const Eigen::Map<const Eigen::VectorXd> bvec(s.beta.data(), layout.beta_size());
    g.segment(layout.beta_offset(), layout.beta_size()) -=
        prior.beta_cov.llt().solve(bvec - prior.beta_mean);
  }
  if (layout.has_log_a) {
    const double nu0 = prior.sigma_df(D);
    for (int d = 0; d < D; ++d) {
      const double rate = 1.0 / (prior.hw_scale[d] * prior.hw_scale[d]);
      // IW prior scale, IG(1/2, rate) prior and the log Jacobian
      g[layout.log_a_offset() + d] =
          -0.5 * nu0 + prior.hw_nu * sigma_inv(d, d) / s.a[d] - 1.5 + rate / s.a[d] + 1.0;
    }
  }
  if (control_variate) g -= sigma_conditional_grad(theta, sigma, prior, layout);
  return out;
}

Eigen::VectorXd grad_log_joint_theta1(const Eigen::VectorXd& theta, const Eigen::MatrixXd& sigma,
                                      const SubjectLikelihood& lik, const PriorSpec& prior,
                                      const Theta1Layout& layout, bool control_variate) {
  return eval_theta1(theta, sigma, lik, prior, layout, true, control_variate).grad;
}

}  // namespace eam
