#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "eam/model.hpp"
#include "eam/random.hpp"
#include "eam/transforms.hpp"
#include "eam/vb.hpp"
#include "test_support.hpp"

using namespace eam;

namespace {

// log p(x) = log N(x | m, S) + shift: q of matching structure can equal p exactly.
class GaussianTarget final : public VbTarget {
public:
  GaussianTarget(Eigen::VectorXd m, Eigen::MatrixXd S, double shift = 0.0)
      : m_(std::move(m)), S_(std::move(S)), llt_(S_), shift_(shift) {}
  int dim() const override { return static_cast<int>(m_.size()); }
  double log_density(const Eigen::VectorXd& x, std::uint64_t, Eigen::VectorXd* grad) const override {
    if (grad) *grad = -llt_.solve(x - m_);
    return mvn_logpdf(x, m_, llt_) + shift_;
  }

private:
  Eigen::VectorXd m_;
  Eigen::MatrixXd S_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double shift_;
};

Eigen::MatrixXd random_spd(int p, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd M(p, p);
  for (auto& v : M.reshaped()) v = 0.4 * z(g);
  return M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(p, p);
}

VariationalParams random_params(VbStructure s, int p, int r, std::uint64_t seed, int block_dim = 0, int blocks = 0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd m(p), sd(p);
  for (int i = 0; i < p; ++i) {
    m[i] = 0.3 * z(g);
    sd[i] = 0.3 + 0.1 * std::abs(z(g));
  }
  auto q = make_params(s, m, sd, r, block_dim, blocks, 2);
  for (auto& b : q.blocks)
    for (auto& v : b.B.reshaped()) v = 0.2 * z(g);
  return q;
}

// Subject likelihood plus a constant, spread over subjects.
class ShiftedLik final : public SubjectLikelihood {
public:
  ShiftedLik(const SubjectLikelihood& base, double c) : base_(base), c_(c) {}
  int subjects() const override { return base_.subjects(); }
  int effect_dim() const override { return base_.effect_dim(); }
  int beta_rows() const override { return base_.beta_rows(); }
  int covariate_dim() const override { return base_.covariate_dim(); }
  double loglik(int j, const Eigen::VectorXd& a, const Eigen::MatrixXd& b) const override {
    return base_.loglik(j, a, b) + c_ / subjects();
  }
  double loglik_grad(int j, const Eigen::VectorXd& a, const Eigen::MatrixXd& b, Eigen::VectorXd& ga,
                     Eigen::MatrixXd& gb) const override {
    return base_.loglik_grad(j, a, b, ga, gb) + c_ / subjects();
  }

private:
  const SubjectLikelihood& base_;
  double c_;
};

Dataset ddm_toy(int J, int n, std::uint64_t seed) {
  Dataset data;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int j = 0; j < J; ++j) {
    Subject s;
    s.id = "s" + std::to_string(j);
    for (int i = 0; i < n; ++i) s.trials.push_back(Trial{static_cast<int>(u(rng) < 0.6), 0.45 + 0.6 * u(rng), {}, {}});
    data.subjects.push_back(s);
  }
  return data;
}

// Relative gap with a floor so near-zero components compare absolutely.
double rel_gap(double a, double b, double floor = 1e-2) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Worst relative gap between the analytic single-draw gradient and central differences with
// common random numbers, holding the q inside log q at the base λ.
double fd_check(const VbTarget& target, const VariationalParams& q, std::uint64_t seed, double h = 1e-6) {
  Rng rng(seed);
  const QNoise noise = draw_noise(q, rng);
  Eigen::VectorXd g;
  elbo_draw(target, q, noise, &g);
  const Eigen::VectorXd flat = q.flatten();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    VariationalParams qp = q, qm = q;
    Eigen::VectorXd fp = flat, fm = flat;
    fp[k] += h;
    fm[k] -= h;
    qp.assign(fp);
    qm.assign(fm);
    const double fd = (elbo_draw(target, qp, noise, nullptr, &q) - elbo_draw(target, qm, noise, nullptr, &q)) / (2 * h);
    worst = std::max(worst, rel_gap(fd, g[k]));
  }
  return worst;
}

}  // namespace

TEST_SUITE("vb") {
  TEST_CASE("Woodbury solves and log-determinants") {
    std::mt19937_64 g(1);
    std::normal_distribution<double> z(0.0, 1.0);
    const int p = 50, r = 5;
    Eigen::MatrixXd B(p, r);
    Eigen::VectorXd d(p), x(p);
    for (auto& v : B.reshaped()) v = z(g);
    for (int i = 0; i < p; ++i) {
      d[i] = 0.5 + std::abs(z(g));
      x[i] = z(g);
    }
    CHECK((woodbury_inverse_apply(Eigen::MatrixXd(p, 0), d, x) - x.cwiseQuotient(d.cwiseAbs2())).norm() < 1e-14);
    CHECK((woodbury_inverse_apply(Eigen::MatrixXd::Zero(p, r), d, x) - x.cwiseQuotient(d.cwiseAbs2())).norm() < 1e-14);

    Eigen::MatrixXd S = B * B.transpose();
    S.diagonal() += d.cwiseAbs2();
    const Eigen::VectorXd dense = S.lu().solve(x);
    CHECK((woodbury_inverse_apply(B, d, x) - dense).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(WoodburyFactor(B, d).log_det() == doctest::Approx(std::log(S.determinant())).epsilon(1e-10));

    // rank one against Sherman-Morrison
    const Eigen::VectorXd u = B.col(0);
    const Eigen::VectorXd Ainv_x = x.cwiseQuotient(d.cwiseAbs2());
    const Eigen::VectorXd Ainv_u = u.cwiseQuotient(d.cwiseAbs2());
    const Eigen::VectorXd sm = Ainv_x - Ainv_u * (u.dot(Ainv_x) / (1.0 + u.dot(Ainv_u)));
    CHECK((woodbury_inverse_apply(B.leftCols(1), d, x) - sm).cwiseAbs().maxCoeff() < 1e-12);

    // d enters only through its square
    CHECK((woodbury_inverse_apply(B, -d, x) - dense).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("sampling from the factor family") {
    Eigen::VectorXd m(3), sd = Eigen::VectorXd::Ones(3);
    m << 1, -2, 0.5;
    auto diag = make_params(VbStructure::Full, m, sd, 2);
    Rng rng(2);
    const auto noise = draw_noise(diag, rng);
    CHECK((sample_q(diag, noise) - (m + noise.eta[0])).norm() < 1e-15);

    const auto q = random_params(VbStructure::Full, 4, 2, 5);
    const int n = 100000;
    Eigen::MatrixXd x(n, 4);
    for (int i = 0; i < n; ++i) x.row(i) = sample_q(q, draw_noise(q, rng)).transpose();
    const Eigen::VectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = c.transpose() * c / (n - 1);
    const Eigen::MatrixXd S = q.covariance();
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(mean[i] - q.blocks[0].mu[i]) < 3 * std::sqrt(S(i, i) / n));
      for (int k = 0; k < 4; ++k)
        CHECK(std::abs(cov(i, k) - S(i, k)) < 3 * std::sqrt((S(i, i) * S(k, k) + S(i, k) * S(i, k)) / n));
    }

    // blocked structure: cross-block covariance is exactly zero
    const auto vbl = random_params(VbStructure::Blocked, 7, 3, 6, 2, 2);
    REQUIRE(vbl.blocks.size() == 3);
    CHECK(vbl.blocks[2].size() == 3);
    CHECK(vbl.blocks[0].factors() == 2);
    CHECK(vbl.blocks[2].factors() == 3);
    const Eigen::MatrixXd V = vbl.covariance();
    CHECK(V.block(0, 2, 2, 5).norm() == 0.0);
    CHECK((V.block(2, 2, 2, 2) - vbl.blocks[1].covariance()).norm() == 0.0);

    // q log-density integrates the dense Gaussian
    const Eigen::VectorXd y = sample_q(vbl, draw_noise(vbl, rng));
    CHECK(q_logpdf(vbl, y) == doctest::Approx(mvn_logpdf(y, vbl.mean(), V)).epsilon(1e-10));
  }

  TEST_CASE("covariance draws follow the exact conditional") {
    auto stub = eam::testing::make_stub(3, 4, 2, 0, 3);
    const auto prior = PriorSpec::defaults(2, 0);
    HierarchicalTarget target(stub, prior);
    Eigen::VectorXd theta(target.dim());
    theta << 0.2, 0.4, -0.3, 0.1, 0.5, 0.9, 0.1, 0.3, 0.2, -0.4;
    HierState st;
    target.layout().unpack(theta, st);
    const Eigen::MatrixXd psi = posterior_sigma_scale(st, prior);
    const double df = posterior_sigma_df(prior, target.layout());
    CHECK(df == doctest::Approx(2 + 1 + 3));
    const Eigen::MatrixXd expect = psi / (df - 2 - 1);
    Rng rng(8);
    const int n = 100000;
    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(2, 2), sq = Eigen::ArrayXXd::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      const Eigen::ArrayXXd s = target.sample_sigma(theta, rng).array();
      sum += s;
      sq += s.square();
    }
    const Eigen::ArrayXXd mean = sum / n;
    const Eigen::ArrayXXd se = ((sq / n - mean.square()) / n).sqrt();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) CHECK(std::abs(mean(r, c) - expect(r, c)) < 3.5 * se(r, c));
  }

  TEST_CASE("ELBO on a Gaussian target") {
    const int p = 4;
    const Eigen::VectorXd m = Eigen::Vector4d(0.5, -1, 2, 0);
    const Eigen::MatrixXd S = random_spd(p, 3);
    // q equal to the target: S = LLᵀ with L as the factor matrix and a tiny diagonal
    const double tiny = 0.1;
    Eigen::MatrixXd Sb = S;
    Sb.diagonal().array() -= tiny * tiny;
    const Eigen::MatrixXd L = Sb.llt().matrixL();
    VariationalParams exact = make_params(VbStructure::Full, m, Eigen::VectorXd::Constant(p, tiny), p);
    exact.blocks[0].B = L;
    const double log_z = 1.7;
    GaussianTarget target(m, S, log_z);
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd g;
      const double v = elbo_draw(target, exact, draw_noise(exact, rng), &g);
      CHECK(v == doctest::Approx(log_z).epsilon(1e-8));
      CHECK(g.norm() < 1e-6);
    }

    // additive constants pass straight through
    const auto q = random_params(VbStructure::Full, p, 2, 9);
    GaussianTarget shifted(m, S, log_z + 3.25);
    const auto e0 = elbo_estimate(target, q, 10, 5, 0, false);
    const auto e1 = elbo_estimate(shifted, q, 10, 5, 0, false);
    CHECK(e1.value - e0.value == doctest::Approx(3.25).epsilon(1e-12));

    // estimator variance scales like 1/N
    double var[3];
    const int Ns[3] = {1, 10, 100};
    for (int k = 0; k < 3; ++k) {
      const int reps = 400;
      double s = 0, s2 = 0;
      for (int r = 0; r < reps; ++r) {
        const double v = elbo_estimate(target, q, Ns[k], 77, static_cast<std::uint64_t>(r), false).value;
        s += v;
        s2 += v * v;
      }
      var[k] = (s2 - s * s / reps) / (reps - 1);
    }
    MESSAGE("variances " << var[0] << " " << var[1] << " " << var[2]);
    CHECK(var[0] / var[1] == doctest::Approx(10).epsilon(0.35));
    CHECK(var[1] / var[2] == doctest::Approx(10).epsilon(0.35));
  }

  TEST_CASE("ELBO gradient against finite differences") {
    SUBCASE("hierarchical toy with coefficients") {
      auto stub = eam::testing::make_stub(2, 4, 2, 1, 11);
      for (auto cp : {CovariancePrior::HuangWand, CovariancePrior::InverseWishart}) {
        const auto prior = PriorSpec::defaults(2, 2, cp);
        HierarchicalTarget target(stub, prior);
        for (auto s : {VbStructure::Full, VbStructure::Blocked}) {
          const auto q = random_params(s, target.dim(), 3, 12, 2, 2);
          CHECK(fd_check(target, q, 13) <= 1e-4);
        }
      }
    }
    SUBCASE("DDM with the data-dependent non-decision time") {
      const Dataset data = ddm_toy(2, 4, 21);
      Model model(ModelKind::Ddm, 2, identity_design(ddm_transform(), false), {}, QuadratureRule(16, 16));
      EamLikelihood lik(model, data);
      const auto prior = PriorSpec::defaults(7, 0);
      HierarchicalTarget target(lik, prior);
      REQUIRE(target.reparameterized());
      Eigen::VectorXd base(7);
      base << 1.0, std::log(0.8), std::log(0.6), std::log(0.5), std::log(0.2), std::log(0.25), std::log(0.1);
      Eigen::VectorXd theta(target.dim());
      theta << base, base, base, Eigen::VectorXd::Zero(7);
      const Eigen::VectorXd x = target.from_theta1(theta);
      CHECK((target.to_theta1(x) - theta).norm() < 1e-12);
      VbConfig cfg = VbConfig::for_structure(VbStructure::Blocked);
      auto q = hierarchical_start(target, cfg, theta, Eigen::VectorXd::Constant(theta.size(), 0.05));
      std::mt19937_64 g(3);
      std::normal_distribution<double> z(0.0, 0.02);
      for (auto& b : q.blocks)
        for (auto& v : b.B.reshaped()) v = z(g);
      CHECK(fd_check(target, q, 19) <= 1e-4);

      // the lower non-decision bound stays below each subject's fastest response
      Rng rng(5);
      for (int i = 0; i < 200; ++i) {
        const Eigen::VectorXd t = target.to_theta1(sample_q(q, draw_noise(q, rng)));
        for (int j = 0; j < 2; ++j) CHECK(std::exp(t[7 * j + 5]) < lik.min_rt(j));
      }
    }
  }

  TEST_CASE("gradient estimator is unbiased") {
    // mean of reparameterization gradients vs mean of common-random-number differences of the
    // full single-draw objective (score term included)
    const int p = 3;
    GaussianTarget target(Eigen::Vector3d(0.2, -0.5, 1.0), random_spd(p, 8));
    const auto q = random_params(VbStructure::Full, p, 1, 14);
    const Eigen::VectorXd flat = q.flatten();
    const int n = 10000;
    const double h = 1e-5;
    Eigen::MatrixXd an(n, flat.size()), fd(n, flat.size());
    for (int i = 0; i < n; ++i) {
      Rng rng = substream(21, static_cast<std::uint64_t>(i));
      const QNoise noise = draw_noise(q, rng);
      Eigen::VectorXd g;
      elbo_draw(target, q, noise, &g);
      an.row(i) = g.transpose();
      for (Eigen::Index k = 0; k < flat.size(); ++k) {
        VariationalParams qp = q, qm = q;
        Eigen::VectorXd fp = flat, fm = flat;
        fp[k] += h;
        fm[k] -= h;
        qp.assign(fp);
        qm.assign(fm);
        fd(i, k) = (elbo_draw(target, qp, noise) - elbo_draw(target, qm, noise)) / (2 * h);
      }
    }
    const Eigen::MatrixXd diff = an - fd;
    const Eigen::VectorXd mean = diff.colwise().mean();
    for (Eigen::Index k = 0; k < flat.size(); ++k) {
      const double sd = std::sqrt((diff.col(k).array() - mean[k]).square().sum() / (n - 1));
      CHECK(std::abs(mean[k]) <= 3 * sd / std::sqrt(n) + 1e-9);
    }
  }

  TEST_CASE("control variate keeps the mean and cuts the variance") {
    auto stub = eam::testing::make_stub(3, 6, 2, 0, 17);
    const auto prior = PriorSpec::defaults(2, 0);
    HierarchicalTarget with_cv(stub, prior, true), without(stub, prior, false);
    const auto q = random_params(VbStructure::Full, with_cv.dim(), 3, 18);
    const int n = 4000;
    const int P = q.flat_size();
    Eigen::MatrixXd a(n, P), b(n, P);
    for (int i = 0; i < n; ++i) {
      Rng rng = substream(33, static_cast<std::uint64_t>(i));
      const QNoise noise = draw_noise(q, rng);
      Eigen::VectorXd g1, g2;
      elbo_draw(with_cv, q, noise, &g1);
      elbo_draw(without, q, noise, &g2);
      a.row(i) = g1.transpose();
      b.row(i) = g2.transpose();
    }
    const Eigen::MatrixXd diff = a - b;
    const Eigen::VectorXd dm = diff.colwise().mean();
    int off = 0;
    for (int k = 0; k < P; ++k) {
      const double sd = std::sqrt((diff.col(k).array() - dm[k]).square().sum() / (n - 1));
      if (std::abs(dm[k]) > 3.5 * sd / std::sqrt(n) + 1e-12) ++off;
    }
    CHECK(off <= P / 50 + 1);
    auto total_var = [&](const Eigen::MatrixXd& m) {
      const Eigen::RowVectorXd mu = m.colwise().mean();
      return (m.rowwise() - mu).squaredNorm() / (n - 1);
    };
    MESSAGE("gradient variance with/without control variate " << total_var(a) << " " << total_var(b));
    CHECK(total_var(a) < total_var(b));
  }

  TEST_CASE("optimizer steps") {
    OptimizerConfig cfg;
    Eigen::VectorXd lam = Eigen::Vector3d(1, 2, 3);
    const Eigen::VectorXd steps = Eigen::Vector3d(0.01, 0.001, 0.001);
    Optimizer zero(cfg, steps);
    zero.step(lam, Eigen::Vector3d::Zero());
    CHECK(lam == Eigen::Vector3d(1, 2, 3));

    Optimizer adam(cfg, steps);
    Eigen::VectorXd l2 = lam;
    adam.step(l2, Eigen::Vector3d(5.0, -0.2, 1e-3));
    CHECK(l2[0] - lam[0] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(l2[1] - lam[1] == doctest::Approx(-0.001).epsilon(1e-6));
    CHECK(l2[2] - lam[2] == doctest::Approx(0.001).epsilon(1e-4));

    // ten steps against a scalar reference loop
    Optimizer run(cfg, steps);
    Eigen::VectorXd x = lam;
    double ref[3] = {1, 2, 3}, m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
    for (int t = 1; t <= 10; ++t) {
      Eigen::VectorXd g(3);
      for (int k = 0; k < 3; ++k) g[k] = std::sin(t + k) * (k + 1);
      run.step(x, g);
      for (int k = 0; k < 3; ++k) {
        m[k] = 0.9 * m[k] + 0.1 * g[k];
        v[k] = 0.99 * v[k] + 0.01 * g[k] * g[k];
        const double mh = m[k] / (1 - std::pow(0.9, t)), vh = v[k] / (1 - std::pow(0.99, t));
        ref[k] += steps[k] * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    for (int k = 0; k < 3; ++k) CHECK(x[k] == ref[k]);

    OptimizerConfig ad = cfg;
    ad.kind = OptimizerKind::Adadelta;
    Optimizer delta(ad, steps);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
    double eg = 0, ex = 0, yr = 0;
    for (int t = 1; t <= 5; ++t) {
      const double g = 1.0 / t;
      delta.step(y, Eigen::VectorXd::Constant(1, g));
      eg = 0.95 * eg + 0.05 * g * g;
      const double dx = std::sqrt(ex + 1e-7) / std::sqrt(eg + 1e-7) * g;
      ex = 0.95 * ex + 0.05 * dx * dx;
      yr += dx;
    }
    CHECK(y[0] == doctest::Approx(yr).epsilon(1e-14));
  }

  TEST_CASE("moving-average stopping rule") {
    StoppingRule flat(100, 50);
    int stopped = 0;
    for (int i = 1; i <= 1000; ++i)
      if (flat.update(-3.0)) {
        stopped = i;
        break;
      }
    CHECK(stopped == 150);

    StoppingRule rising(10, 5);
    for (int i = 0; i < 500; ++i) CHECK_FALSE(rising.update(static_cast<double>(i)));
    CHECK_THROWS_AS(StoppingRule(0, 5), ConfigError);
  }

  TEST_CASE("optimization recovers a Gaussian target") {
    const int p = 4;
    const Eigen::VectorXd m = Eigen::Vector4d(0.5, -1, 2, 0.3);
    const Eigen::MatrixXd S = random_spd(p, 23);
    GaussianTarget target(m, S);
    VbConfig cfg;
    cfg.factors = p;
    cfg.max_iterations = 20000;
    cfg.patience = 1000;  // the default patience stops while the 0.001-step factors still drift
    cfg.seed = 4;
    const auto start = make_params(VbStructure::Full, Eigen::VectorXd::Zero(p), Eigen::VectorXd::Ones(p), p);
    const auto res = run_vb(target, start, cfg);
    MESSAGE("iterations " << res.iterations << " converged " << res.converged);
    CHECK((res.best.mean() - m).cwiseAbs().maxCoeff() < 1e-2);
    CHECK((res.best.covariance() - S).cwiseAbs().maxCoeff() < 0.1);
    CHECK(res.trace.size() == static_cast<std::size_t>(res.iterations));

    const auto again = run_vb(target, start, cfg);
    CHECK(again.best.flatten() == res.best.flatten());
  }

  TEST_CASE("hierarchical runs and serialization") {
    auto stub = eam::testing::make_stub(3, 8, 2, 1, 41);
    const auto prior = PriorSpec::defaults(2, 2);
    HierarchicalTarget target(stub, prior);
    VbConfig cfg = VbConfig::for_structure(VbStructure::Blocked);
    cfg.max_iterations = 300;
    cfg.window = 20;
    cfg.patience = 10;
    const Eigen::VectorXd mean = Eigen::VectorXd::Zero(target.dim());
    const auto start = hierarchical_start(target, cfg, mean, Eigen::VectorXd::Constant(target.dim(), 0.1));
    CHECK(start.blocks.size() == 4);
    CHECK(start.blocks[3].factors() == 10);
    CHECK(cfg.effective_draws() == 1);
    CHECK(VbConfig::for_structure(VbStructure::Full).effective_draws() == 10);
    const auto res = run_vb(target, start, cfg);
    CHECK(res.iterations > 0);
    CHECK(std::isfinite(res.best_average));

    const auto draws = sample_posterior(target, res.best, 50, 3);
    CHECK(draws.theta1.rows() == 50);
    CHECK(draws.sigma.cols() == 3);

    const auto text = params_to_json(res.best);
    const auto back = params_from_json(text);
    CHECK(back.structure == VbStructure::Blocked);
    CHECK((back.flatten() - res.best.flatten()).norm() == 0.0);
    CHECK_THROWS_AS(params_from_json("{\"blocks\": 3"), ConfigError);

    const std::string path = "vb_trace_test.csv";
    write_trace_csv(path, res.trace);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "iteration,elbo,moving_average");
    std::remove(path.c_str());

    // constant shift in the likelihood shifts the ELBO exactly
    ShiftedLik shifted(stub, 2.5);
    HierarchicalTarget t2(shifted, prior);
    const auto e0 = elbo_estimate(target, start, 5, 1, 0, false);
    const auto e1 = elbo_estimate(t2, start, 5, 1, 0, false);
    CHECK(e1.value - e0.value == doctest::Approx(2.5).epsilon(1e-9));
  }
}
