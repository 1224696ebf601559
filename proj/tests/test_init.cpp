#include <doctest.h>

#include <Eigen/LU>
#include <cmath>

#include "eam/init.hpp"
#include "eam/sim.hpp"
#include "test_support.hpp"

using namespace eam;

namespace {

Model lba_model() { return Model(ModelKind::Lba, 2, identity_design(lba_transform(2), false)); }

Dataset lba_data(int J, int n, const Eigen::VectorXd& natural, double spread, std::uint64_t seed) {
  const Model model = lba_model();
  const Dataset skel = make_skeleton(J, {n}, "cond", {}, nullptr, seed);
  GroupTruth truth;
  truth.mu = model.transform().to_unconstrained(natural);
  truth.sigma = spread * spread * Eigen::MatrixXd::Identity(truth.mu.size(), truth.mu.size());
  truth.beta = Eigen::MatrixXd::Zero(0, 0);
  return simulate_dataset(model, truth, skel, seed + 1).data;
}

Eigen::VectorXd lba_truth() {
  Eigen::VectorXd n(5);
  n << 1.0, 0.8, 3.0, 1.5, 0.3;  // negligible no-finisher mass
  return n;
}

double correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::ArrayXd a = x.array() - x.mean(), b = y.array() - y.mean();
  return (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
}

}  // namespace

TEST_SUITE("init") {
  TEST_CASE("heuristic DDM draws respect the model constraints") {
    const Model model(ModelKind::Ddm, 2, identity_design(ddm_transform(), false));
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      const double min_rt = 0.15 + 0.5 * std::uniform_real_distribution<double>()(rng);
      const Eigen::VectorXd p = heuristic_natural(model, min_rt, rng);
      // natural order: mu_v, s_v, a, mu_z, s_z, mu_tau, s_tau
      CHECK(p[2] > p[3] + 0.5 * p[4]);
      CHECK(p[3] == doctest::Approx(p[2] / 2));
      CHECK(p[5] - 0.5 * p[6] < min_rt);
      CHECK(p[5] - 0.5 * p[6] > 0.0);
      const Eigen::VectorXd x = model.transform().to_unconstrained(p, min_rt);
      REQUIRE(x.allFinite());
      CHECK((model.transform().from_unconstrained(x, min_rt) - p).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("heuristic LBA draws respect the model constraints") {
    const Model model = lba_model();
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      const Eigen::VectorXd p = heuristic_natural(model, 0.3, rng);
      CHECK(p[0] > p[1]);
      CHECK(p[1] > 0.0);
      CHECK(p[4] < 0.3);
      const Eigen::VectorXd x = model.transform().to_unconstrained(p);
      REQUIRE(x.allFinite());
      CHECK((model.transform().from_unconstrained(x) - p).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("effects for an identity design are the transformed values") {
    const Model model = lba_model();
    const Dataset data = lba_data(2, 10, lba_truth(), 0.0, 5);
    const Eigen::VectorXd x = model.transform().to_unconstrained(lba_truth());
    CHECK((effects_for(model, data, x) - x).norm() < 1e-10);
  }

  TEST_CASE("MAP with no data returns the regularizer mode") {
    auto stub = eam::testing::make_stub(1, 0, 3, 0, 1);
    MapConfig cfg;
    cfg.max_steps = 5000;
    const auto fit = map_subject(stub, 0, Eigen::Vector3d(1.0, -0.5, 2.0), true, cfg);
    CHECK(fit.alpha.cwiseAbs().maxCoeff() < 1e-3);
    CHECK(fit.objective == doctest::Approx(0.0).epsilon(1e-6));
  }

  TEST_CASE("MAP on a conjugate stub matches the closed form") {
    auto stub = eam::testing::make_stub(1, 30, 2, 0, 2);
    MapConfig cfg;
    cfg.max_steps = 20000;
    const auto fit = map_subject(stub, 0, Eigen::Vector2d::Zero(), false, cfg);
    // posterior mode of N(0, 10) prior and unit-variance observations
    const Eigen::VectorXd expect = stub.obs[0].rowwise().sum() / (30.0 + 0.1);
    CHECK((fit.alpha - expect).cwiseAbs().maxCoeff() < 1e-3);
  }

  TEST_CASE("group block is the average of subject fits") {
    auto stub = eam::testing::make_stub(3, 5, 2, 1, 3);
    const PriorSpec prior = PriorSpec::defaults(2, 2);
    const Theta1Layout L(stub, prior);
    std::vector<SubjectFit> fits(3);
    for (int j = 0; j < 3; ++j) {
      fits[j].alpha = Eigen::Vector2d(j, 2.0 * j + 1);
      fits[j].beta = Eigen::MatrixXd::Constant(2, 1, j - 1.0);
      fits[j].beta(1, 0) = 3.0;
    }
    const Eigen::VectorXd t = assemble_theta1(fits, L);
    CHECK(t.segment(L.mu_offset(), 2).isApprox(Eigen::Vector2d(1.0, 3.0)));
    CHECK(t.segment(L.alpha_offset(2), 2).isApprox(fits[2].alpha));
    CHECK(t.segment(L.beta_offset(), 2).isApprox(Eigen::Vector2d(0.0, 3.0)));
    CHECK(t.tail(2).isZero());
  }

  TEST_CASE("single-subject LBA recovery") {
    const Model model = lba_model();
    const Eigen::VectorXd truth = model.transform().to_unconstrained(lba_truth());
    const Eigen::MatrixXd none(0, 0);
    for (int n : {500, 10000}) {
      const Dataset data = lba_data(1, n, lba_truth(), 0.0, 7);
      const EamLikelihood lik(model, data);
      const HierState h = heuristic_state(lik, PriorSpec::defaults(5, 0), 9);
      const auto fit = map_subject(lik, 0, h.alpha.col(0), false, MapConfig{});
      const Eigen::VectorXd err = fit.alpha - truth;
      INFO("n " << n << " error " << err.transpose());
      if (n == 500) {
        // curvature of the regularized objective at the fit gives the sampling scale
        Eigen::MatrixXd H(5, 5);
        for (int i = 0; i < 5; ++i) {
          const Eigen::VectorXd e = 1e-5 * Eigen::VectorXd::Unit(5, i);
          Eigen::VectorXd gp = Eigen::VectorXd::Zero(5), gm = Eigen::VectorXd::Zero(5);
          Eigen::MatrixXd gb(0, 0);
          lik.loglik_grad(0, fit.alpha + e, none, gp, gb);
          lik.loglik_grad(0, fit.alpha - e, none, gm, gb);
          H.col(i) = -(gp - gm) / 2e-5;
        }
        H.diagonal().array() += 0.1;
        const Eigen::VectorXd se = H.inverse().diagonal().cwiseSqrt();
        INFO("se " << se.transpose());
        CHECK((err.cwiseAbs().array() < 3.0 * se.array()).all());
      } else {
        CHECK(err.cwiseAbs().maxCoeff() < 0.2);
      }
    }
  }

  TEST_CASE("averaging window arithmetic") {
    ChainOutput c;
    c.effect_dim = 1;
    c.subjects = 2;
    const int T = 200;
    c.mu.resize(T, 1);
    c.alpha.resize(T, 2);
    c.a.resize(T, 1);
    c.beta.resize(T, 0);
    for (int t = 0; t < T; ++t) {
      c.mu(t, 0) = t;
      c.alpha(t, 0) = 2.0 * t;
      c.alpha(t, 1) = -1.0;
      c.a(t, 0) = std::exp(t);
    }
    Theta1Layout L;
    L.subjects = 2;
    L.effect_dim = 1;
    const Eigen::VectorXd th = average_draws(c, L, 100);
    // mean of 100..199 is 149.5
    CHECK(th[0] == doctest::Approx(299.0));
    CHECK(th[1] == doctest::Approx(-1.0));
    CHECK(th[2] == doctest::Approx(149.5));
    CHECK(th[3] == doctest::Approx(149.5));
    CHECK_THROWS_AS(average_draws(c, L, 201), ConfigError);
  }

  TEST_CASE("subject-level covariates are detected") {
    Dataset d;
    d.covariate_names = {"x"};
    Subject s;
    s.trials = {Trial{0, 0.5, {}, Eigen::VectorXd::Constant(1, 1.0)}, Trial{1, 0.6, {}, Eigen::VectorXd::Constant(1, 1.0)}};
    d.subjects.push_back(s);
    CHECK(covariates_subject_level(d));
    d.subjects[0].trials[1].covariates[0] = 2.0;
    CHECK_FALSE(covariates_subject_level(d));
    d.covariate_names.clear();
    CHECK_FALSE(covariates_subject_level(d));
  }

  TEST_CASE("MAP and PMwG starts agree and are deterministic") {
    const Model model = lba_model();
    const Dataset data = lba_data(5, 150, lba_truth(), 0.3, 13);
    const EamLikelihood lik(model, data);
    const PriorSpec prior = PriorSpec::defaults(5, 0);
    VbConfig vb = VbConfig::for_structure(VbStructure::Blocked);
    MapConfig mc;
    mc.seed = 3;
    const auto m1 = map_init(lik, prior, vb, mc);
    const auto m2 = map_init(lik, prior, vb, mc);
    CHECK(m1.theta1 == m2.theta1);
    for (const auto& b : m1.lambda.blocks) {
      CHECK((b.B.array() == 0.01).all());
      CHECK((b.d.array() == 0.01).all());
    }

    PmwgInitConfig pc;
    pc.pmwg.particles_alpha = 50;
    pc.pmwg.seed = 3;
    const auto p1 = pmwg_init(lik, prior, vb, pc);
    const auto p2 = pmwg_init(lik, prior, vb, pc);
    CHECK(p1.theta1 == p2.theta1);

    const Theta1Layout L(lik, prior);
    const int n = L.mu_offset() + L.effect_dim;  // subject and group-mean blocks
    const double r = correlation(m1.theta1.head(n), p1.theta1.head(n));
    INFO("correlation " << r);
    CHECK(r > 0.95);
  }
}
