#include "eam/vb.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "eam/common.hpp"
#include "eam/transforms.hpp"

namespace eam {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr std::uint64_t kElboStream = 7, kPosteriorStream = 9;

}  // namespace

// ---- Woodbury ------------------------------------------------------------------------------

WoodburyFactor::WoodburyFactor(const Eigen::MatrixXd& B, const Eigen::VectorXd& d) : B_(B) {
  if ((d.array() == 0.0).any()) throw NumericError("factor covariance needs nonzero diagonal scales");
  inv_d2_ = d.array().square().inverse();
  const Eigen::Index r = B.cols();
  Eigen::MatrixXd core = Eigen::MatrixXd::Identity(r, r);
  if (r > 0) core.noalias() += B.transpose() * inv_d2_.asDiagonal() * B;
  core_ = robust_llt(core, 1e-10, &repaired_);
  const Eigen::VectorXd L = core_.matrixLLT().diagonal();
  log_det_ = d.array().square().log().sum() + 2.0 * L.array().log().sum();
}

Eigen::VectorXd WoodburyFactor::solve(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = inv_d2_.cwiseProduct(x);
  if (B_.cols() == 0) return y;
  const Eigen::VectorXd inner = core_.solve(B_.transpose() * y);
  return y - inv_d2_.cwiseProduct(B_ * inner);
}

Eigen::VectorXd woodbury_inverse_apply(const Eigen::MatrixXd& B, const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& x) {
  return WoodburyFactor(B, d).solve(x);
}

// ---- family --------------------------------------------------------------------------------

Eigen::MatrixXd FactorBlock::covariance() const {
  Eigen::MatrixXd c = B * B.transpose();
  c.diagonal() += d.cwiseAbs2();
  return c;
}

int VariationalParams::dim() const {
  int n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

int VariationalParams::flat_size() const {
  int n = 0;
  for (const auto& b : blocks) n += b.size() * (2 + b.factors());
  return n;
}

Eigen::VectorXd VariationalParams::flatten() const {
  Eigen::VectorXd out(flat_size());
  Eigen::Index k = 0;
  for (const auto& b : blocks) {
    out.segment(k, b.size()) = b.mu;
    k += b.size();
    out.segment(k, b.B.size()) = Eigen::Map<const Eigen::VectorXd>(b.B.data(), b.B.size());
    k += b.B.size();
    out.segment(k, b.size()) = b.d;
    k += b.size();
  }
  return out;
}

void VariationalParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != flat_size()) throw ConfigError("variational parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (auto& b : blocks) {
    b.mu = flat.segment(k, b.size());
    k += b.size();
    b.B = Eigen::Map<const Eigen::MatrixXd>(flat.data() + k, b.size(), b.factors());
    k += b.B.size();
    b.d = flat.segment(k, b.size());
    k += b.size();
  }
}

Eigen::VectorXd VariationalParams::mean() const {
  Eigen::VectorXd m(dim());
  for (const auto& b : blocks) m.segment(b.offset, b.size()) = b.mu;
  return m;
}

Eigen::MatrixXd VariationalParams::covariance() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim(), dim());
  for (const auto& b : blocks) c.block(b.offset, b.offset, b.size(), b.size()) = b.covariance();
  return c;
}

QNoise draw_noise(const VariationalParams& q, Rng& rng) {
  QNoise n;
  for (const auto& b : q.blocks) {
    n.z.push_back(standard_normal(b.factors(), rng));
    n.eta.push_back(standard_normal(b.size(), rng));
  }
  n.aux_seed = rng();
  return n;
}

Eigen::VectorXd sample_q(const VariationalParams& q, const QNoise& noise) {
  Eigen::VectorXd x(q.dim());
  for (std::size_t k = 0; k < q.blocks.size(); ++k) {
    const auto& b = q.blocks[k];
    x.segment(b.offset, b.size()) = b.mu + b.B * noise.z[k] + b.d.cwiseProduct(noise.eta[k]);
  }
  return x;
}

double q_logpdf(const VariationalParams& q, const Eigen::VectorXd& x) {
  double total = 0.0;
  for (const auto& b : q.blocks) {
    const WoodburyFactor w(b.B, b.d);
    const Eigen::VectorXd r = x.segment(b.offset, b.size()) - b.mu;
    total += -0.5 * (r.dot(w.solve(r)) + w.log_det() + b.size() * kLog2Pi);
  }
  return total;
}

VariationalParams make_params(VbStructure structure, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd,
                              int factors, int block_dim, int blocks, int block_factors) {
  if (mean.size() != sd.size()) throw ConfigError("start mean and scale differ in length");
  VariationalParams q;
  q.structure = structure;
  auto add = [&](int offset, int size, int r) {
    FactorBlock b;
    b.offset = offset;
    b.mu = mean.segment(offset, size);
    b.B = Eigen::MatrixXd::Zero(size, r);
    b.d = sd.segment(offset, size);
    q.blocks.push_back(std::move(b));
  };
  const int p = static_cast<int>(mean.size());
  if (structure == VbStructure::Full) {
    add(0, p, factors);
    return q;
  }
  if (block_dim * blocks > p) throw ConfigError("subject blocks exceed the parameter vector");
  for (int j = 0; j < blocks; ++j) add(j * block_dim, block_dim, block_factors);
  if (p > block_dim * blocks) add(block_dim * blocks, p - block_dim * blocks, factors);
  return q;
}

// ---- hierarchical target -------------------------------------------------------------------

HierarchicalTarget::HierarchicalTarget(const SubjectLikelihood& lik, const PriorSpec& prior, bool control_variate)
    : lik_(lik), prior_(prior), layout_(lik, prior), control_variate_(control_variate),
      tau_slot_(lik.tau_lower_slot()) {
  if (tau_slot_ >= 0)
    for (int j = 0; j < lik.subjects(); ++j)
      if (!(lik.min_rt(j) > 0.0)) throw ConfigError("subject " + std::to_string(j) + " has no positive response time");
}

Eigen::VectorXd HierarchicalTarget::to_theta1(const Eigen::VectorXd& x) const {
  Eigen::VectorXd theta = x;
  if (tau_slot_ < 0) return theta;
  const int D = layout_.effect_dim;
  for (int j = 0; j < layout_.subjects; ++j)
    theta.segment(layout_.alpha_offset(j), D) =
        tau_transform_inverse(x.segment(layout_.alpha_offset(j), D), lik_.min_rt(j), tau_slot_).alpha;
  return theta;
}

Eigen::VectorXd HierarchicalTarget::from_theta1(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd x = theta;
  if (tau_slot_ < 0) return x;
  const int D = layout_.effect_dim;
  for (int j = 0; j < layout_.subjects; ++j)
    x.segment(layout_.alpha_offset(j), D) =
        tau_transform_data(theta.segment(layout_.alpha_offset(j), D), lik_.min_rt(j), tau_slot_).effects;
  return x;
}

Eigen::MatrixXd HierarchicalTarget::sample_sigma(const Eigen::VectorXd& theta1, Rng& rng) const {
  HierState st;
  layout_.unpack(theta1, st);
  return sample_iw(posterior_sigma_df(prior_, layout_), posterior_sigma_scale(st, prior_), rng);
}

double HierarchicalTarget::log_density(const Eigen::VectorXd& x, std::uint64_t aux_seed,
                                       Eigen::VectorXd* grad) const {
  const int D = layout_.effect_dim;
  Eigen::VectorXd theta = x;
  Eigen::VectorXd chain = Eigen::VectorXd::Ones(x.size());
  Eigen::VectorXd d_log_jac = Eigen::VectorXd::Zero(x.size());
  double log_jac = 0.0;
  if (tau_slot_ >= 0) {
    for (int j = 0; j < layout_.subjects; ++j) {
      const int off = layout_.alpha_offset(j);
      const auto inv = tau_transform_inverse(x.segment(off, D), lik_.min_rt(j), tau_slot_);
      theta.segment(off, D) = inv.alpha;
      log_jac += inv.log_jacobian;
      chain[off + tau_slot_] = inv.d_alpha;
      d_log_jac[off + tau_slot_] = inv.d_log_jacobian;
    }
  }
  Rng rng(aux_seed);
  const Eigen::MatrixXd sigma = sample_sigma(theta, rng);
  const auto je = eval_theta1(theta, sigma, lik_, prior_, layout_, grad != nullptr, control_variate_);
  if (grad) *grad = je.grad.cwiseProduct(chain) + d_log_jac;
  return je.log_joint - je.log_sigma_cond + log_jac;
}

// ---- ELBO ----------------------------------------------------------------------------------

double elbo_draw(const VbTarget& target, const VariationalParams& q, const QNoise& noise, Eigen::VectorXd* grad,
                 const VariationalParams* density) {
  const VariationalParams& dq = density ? *density : q;
  const Eigen::VectorXd x = sample_q(q, noise);
  Eigen::VectorXd gx;
  const double lp = target.log_density(x, noise.aux_seed, grad ? &gx : nullptr);
  double lq = 0.0;
  if (grad) grad->resize(q.flat_size());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < q.blocks.size(); ++i) {
    const auto& b = q.blocks[i];
    const auto& db = dq.blocks[i];
    const WoodburyFactor w(db.B, db.d);
    const Eigen::VectorXd r = x.segment(b.offset, b.size()) - db.mu;
    const Eigen::VectorXd s = w.solve(r);
    lq += -0.5 * (r.dot(s) + w.log_det() + b.size() * kLog2Pi);
    if (!grad) continue;
    const Eigen::VectorXd g = gx.segment(b.offset, b.size()) + s;
    grad->segment(k, b.size()) = g;
    k += b.size();
    Eigen::Map<Eigen::MatrixXd>(grad->data() + k, b.size(), b.factors()) = g * noise.z[i].transpose();
    k += b.B.size();
    grad->segment(k, b.size()) = g.cwiseProduct(noise.eta[i]);
    k += b.size();
  }
  return lp - lq;
}

ElboEstimate elbo_estimate(const VbTarget& target, const VariationalParams& q, int draws, std::uint64_t seed,
                           std::uint64_t iteration, bool with_grad) {
  if (draws < 1) throw ConfigError("ELBO estimate needs at least one draw");
  ElboEstimate out;
  if (with_grad) out.grad = Eigen::VectorXd::Zero(q.flat_size());
  int used = 0;
  Eigen::VectorXd g;
  for (int s = 0; s < draws; ++s) {
    Rng rng = substream(seed, iteration, static_cast<std::uint64_t>(s), kElboStream);
    const QNoise noise = draw_noise(q, rng);
    const double v = elbo_draw(target, q, noise, with_grad ? &g : nullptr);
    out.value += v;
    if (with_grad && std::isfinite(v) && g.allFinite()) {
      out.grad += g;
      ++used;
    }
  }
  out.value /= draws;
  if (with_grad && used > 0) out.grad /= used;
  return out;
}

// ---- optimizers ----------------------------------------------------------------------------

Optimizer::Optimizer(const OptimizerConfig& cfg, Eigen::VectorXd steps)
    : cfg_(cfg), steps_(std::move(steps)), m_(Eigen::VectorXd::Zero(steps_.size())),
      v_(Eigen::VectorXd::Zero(steps_.size())) {}

void Optimizer::step(Eigen::VectorXd& lambda, const Eigen::VectorXd& grad) {
  ++t_;
  if (cfg_.kind == OptimizerKind::Adam) {
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    lambda.array() += steps_.array() * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.adam_eps);
    return;
  }
  // m_ holds the running mean of squared gradients, v_ that of squared updates
  m_ = cfg_.decay * m_ + (1.0 - cfg_.decay) * grad.cwiseAbs2();
  const Eigen::ArrayXd delta = ((v_.array() + cfg_.xi).sqrt() / (m_.array() + cfg_.xi).sqrt()) * grad.array();
  v_ = cfg_.decay * v_.array() + (1.0 - cfg_.decay) * delta.square();
  lambda.array() += delta;
}

Eigen::VectorXd step_sizes(const VariationalParams& q, const OptimizerConfig& cfg) {
  Eigen::VectorXd out(q.flat_size());
  Eigen::Index k = 0;
  for (const auto& b : q.blocks) {
    out.segment(k, b.size()).setConstant(cfg.step_mu);
    k += b.size();
    out.segment(k, b.B.size() + b.size()).setConstant(cfg.step_factor);
    k += b.B.size() + b.size();
  }
  return out;
}

StoppingRule::StoppingRule(int window, int patience) : window_(window), patience_(patience) {
  if (window < 1 || patience < 1) throw ConfigError("stopping window and patience must be >= 1");
}

bool StoppingRule::update(double elbo) {
  buffer_.push_back(elbo);
  if (static_cast<int>(buffer_.size()) > window_) buffer_.pop_front();
  improved_ = false;
  if (!ready()) return false;
  // summed afresh so a flat stream cannot drift upward through roundoff
  sum_ = 0.0;
  for (double v : buffer_) sum_ += v;
  average_ = sum_ / window_;
  if (average_ > best_) {
    best_ = average_;
    stale_ = 0;
    improved_ = true;
    return false;
  }
  return ++stale_ >= patience_;
}

// ---- driver --------------------------------------------------------------------------------

void VbConfig::validate() const {
  if (factors < 0 || subject_factors < 0) throw ConfigError("vb: factor counts must be >= 0");
  if (draws < 0) throw ConfigError("vb: draw count must be >= 1 (or 0 for the structure default)");
  if (window < 1 || patience < 1) throw ConfigError("vb: stopping window and patience must be >= 1");
  if (max_iterations < 1) throw ConfigError("vb: iteration cap must be >= 1");
  const auto& o = optimizer;
  if (!(o.step_mu > 0 && o.step_factor > 0)) throw ConfigError("vb: step sizes must be positive");
  if (!(o.beta1 >= 0 && o.beta1 < 1 && o.beta2 >= 0 && o.beta2 < 1)) throw ConfigError("vb: ADAM decay rates must lie in [0, 1)");
  if (!(o.decay > 0 && o.decay < 1 && o.xi > 0)) throw ConfigError("vb: ADADELTA constants out of range");
}

VbConfig VbConfig::for_structure(VbStructure s) {
  VbConfig c;
  c.structure = s;
  if (s == VbStructure::Blocked) c.factors = 10;
  return c;
}

VbResult run_vb(const VbTarget& target, const VariationalParams& start, const VbConfig& cfg) {
  cfg.validate();
  if (start.dim() != target.dim()) throw ConfigError("vb: start dimension does not match the target");
  const auto t0 = std::chrono::steady_clock::now();
  VbResult out;
  VariationalParams q = start;
  Eigen::VectorXd lambda = q.flatten();
  Optimizer opt(cfg.optimizer, step_sizes(q, cfg.optimizer));
  StoppingRule rule(cfg.window, cfg.patience);
  const int N = cfg.effective_draws();
  bool have_best = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const auto est = elbo_estimate(target, q, N, cfg.seed, static_cast<std::uint64_t>(it), true);
    if (!std::isfinite(est.value)) {
      if (it == 0) throw NumericError("vb: non-finite ELBO at the starting point");
      out.trace.push_back({it, est.value, NAN});
      out.iterations = it + 1;
      opt.step(lambda, est.grad);
      q.assign(lambda);
      continue;
    }
    const bool stop = rule.update(est.value);
    out.trace.push_back({it, est.value, rule.ready() ? rule.average() : NAN});
    out.iterations = it + 1;
    if (rule.improved()) {
      out.best = q;
      out.best_average = rule.average();
      have_best = true;
    }
    if (stop) {
      out.converged = true;
      break;
    }
    opt.step(lambda, est.grad);
    q.assign(lambda);
  }
  if (!have_best) out.best = q;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

VariationalParams hierarchical_start(const HierarchicalTarget& target, const VbConfig& cfg,
                                     const Eigen::VectorXd& theta1_mean, const Eigen::VectorXd& theta1_sd) {
  const auto& L = target.layout();
  if (theta1_mean.size() != L.size() || theta1_sd.size() != L.size())
    throw ConfigError("vb: starting values have the wrong length");
  const Eigen::VectorXd x = target.from_theta1(theta1_mean);
  Eigen::VectorXd sd = theta1_sd;
  if (target.reparameterized()) {
    // first-order scale change of the reparameterized coordinate
    const double h = 1e-6;
    for (int j = 0; j < L.subjects; ++j)
      for (int k = 0; k < L.effect_dim; ++k) {
        const int i = L.alpha_offset(j) + k;
        Eigen::VectorXd up = theta1_mean;
        up[i] += h;
        const double slope = (target.from_theta1(up)[i] - x[i]) / h;
        sd[i] *= std::abs(slope);
      }
  }
  return make_params(cfg.structure, x, sd, cfg.factors, L.effect_dim, L.subjects, cfg.subject_factors);
}

PosteriorDraws sample_posterior(const HierarchicalTarget& target, const VariationalParams& q, int n,
                                std::uint64_t seed) {
  const int D = target.layout().effect_dim;
  PosteriorDraws out{Eigen::MatrixXd(n, q.dim()), Eigen::MatrixXd(n, D * (D + 1) / 2)};
  for (int i = 0; i < n; ++i) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(i), 0, kPosteriorStream);
    const Eigen::VectorXd theta = target.to_theta1(sample_q(q, draw_noise(q, rng)));
    const Eigen::MatrixXd sigma = target.sample_sigma(theta, rng);
    out.theta1.row(i) = theta.transpose();
    int k = 0;
    for (int c = 0; c < D; ++c)
      for (int r = c; r < D; ++r) out.sigma(i, k++) = sigma(r, c);
  }
  return out;
}

// ---- serialization -------------------------------------------------------------------------

std::string params_to_json(const VariationalParams& q, const std::vector<std::string>& names) {
  nlohmann::json j;
  j["structure"] = q.structure == VbStructure::Full ? "vb" : "vbl";
  j["dim"] = q.dim();
  if (!names.empty()) j["names"] = names;
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : q.blocks) {
    nlohmann::json jb;
    jb["offset"] = b.offset;
    jb["mu"] = std::vector<double>(b.mu.data(), b.mu.data() + b.mu.size());
    jb["d"] = std::vector<double>(b.d.data(), b.d.data() + b.d.size());
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < b.B.rows(); ++r) {
      const Eigen::RowVectorXd row = b.B.row(r);
      rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    jb["B"] = rows;
    j["blocks"].push_back(jb);
  }
  return j.dump(2);
}

VariationalParams params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("variational parameters: ") + e.what());
  }
  VariationalParams q;
  const std::string s = j.value("structure", "vb");
  if (s != "vb" && s != "vbl") throw ConfigError("variational parameters: unknown structure '" + s + "'");
  q.structure = s == "vb" ? VbStructure::Full : VbStructure::Blocked;
  int expect = 0;
  for (const auto& jb : j.at("blocks")) {
    FactorBlock b;
    b.offset = jb.at("offset").get<int>();
    const auto mu = jb.at("mu").get<std::vector<double>>();
    const auto d = jb.at("d").get<std::vector<double>>();
    const auto rows = jb.at("B").get<std::vector<std::vector<double>>>();
    if (b.offset != expect || d.size() != mu.size() || rows.size() != mu.size())
      throw ConfigError("variational parameters: inconsistent block layout");
    b.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    b.d = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    const Eigen::Index r = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    b.B.resize(b.size(), r);
    for (int i = 0; i < b.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != r) throw ConfigError("variational parameters: ragged factor matrix");
      for (Eigen::Index c = 0; c < r; ++c) b.B(i, c) = rows[i][c];
    }
    expect += b.size();
    q.blocks.push_back(std::move(b));
  }
  return q;
}

void write_trace_csv(const std::string& path, const std::vector<ElboTracePoint>& trace) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f.precision(10);
  f << "iteration,elbo,moving_average\n";
  for (const auto& p : trace) {
    f << p.iteration << ',' << p.elbo << ',';
    if (std::isfinite(p.moving_average)) f << p.moving_average;
    f << '\n';
  }
}

}  // namespace eam
