#include <doctest.h>

#include <Eigen/LU>
#include <cmath>
#include <random>

#include "eam/common.hpp"
#include "eam/ddm.hpp"
#include "eam/design.hpp"
#include "eam/lba.hpp"
#include "eam/transforms.hpp"

using namespace eam;

namespace {

Eigen::VectorXd ddm_natural(double mu_v, double s_v, double a, double mu_z, double s_z,
                            double mu_tau, double s_tau) {
  Eigen::VectorXd p(7);
  p << mu_v, s_v, a, mu_z, s_z, mu_tau, s_tau;
  return p;
}

Eigen::VectorXd random_valid_ddm(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double s_z = 0.05 + 0.5 * u(rng);
  const double mu_z = 0.5 * s_z + 0.05 + u(rng);
  const double a = mu_z + 0.5 * s_z + 0.05 + u(rng);
  const double s_tau = 0.01 + 0.2 * u(rng);
  const double mu_tau = 0.5 * s_tau + 0.05 + 0.3 * u(rng);
  return ddm_natural(-3 + 6 * u(rng), 0.1 + 2 * u(rng), a, mu_z, s_z, mu_tau, s_tau);
}

DdmParams as_ddm(const Eigen::VectorXd& p) {
  return DdmParams{p[0], p[1], p[2], p[3], p[4], p[5], p[6]};
}

}  // namespace

TEST_SUITE("transforms") {
  TEST_CASE("boundary gap example") {
    const auto spec = ddm_transform();
    const auto x = spec.to_unconstrained(ddm_natural(0.5, 1.0, 2.0, 1.0, 0.5, 0.3, 0.1));
    CHECK(x[2] == doctest::Approx(std::log(0.75)).epsilon(1e-14));
    CHECK(x[2] == doctest::Approx(-0.287682).epsilon(1e-6));
    CHECK(x[3] == doctest::Approx(std::log(0.75)).epsilon(1e-14));
    CHECK(x[5] == doctest::Approx(std::log(0.25)).epsilon(1e-14));
  }

  TEST_CASE("round trip on random valid parameters") {
    std::mt19937_64 rng(11);
    const auto ddm = ddm_transform();
    const auto lba = lba_transform(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto p = random_valid_ddm(rng);
      worst = std::max(worst, (ddm.from_unconstrained(ddm.to_unconstrained(p)) - p).cwiseAbs().maxCoeff());
      Eigen::VectorXd q(6);
      const double A = 0.1 + u(rng);
      q << A + 0.05 + u(rng), A, -2 + 4 * u(rng), -2 + 4 * u(rng), -2 + 4 * u(rng), 0.05 + 0.3 * u(rng);
      worst = std::max(worst, (lba.from_unconstrained(lba.to_unconstrained(q)) - q).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("unconstrained draws always give valid natural parameters") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 2.0);
    const auto spec = ddm_transform();
    for (int i = 0; i < 1000; ++i) {
      Eigen::VectorXd x(7);
      for (int k = 0; k < 7; ++k) x[k] = n(rng);
      CHECK_NOTHROW(check_params(as_ddm(spec.from_unconstrained(x))));
    }
  }

  TEST_CASE("jacobian, pullback and log-determinant against finite differences") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<TransformSpec> specs{ddm_transform(), lba_transform(4)};
    // a spec with a data-dependent slot referencing another slot
    specs.emplace_back(std::vector<SlotTransform>{{"w", SlotKind::Log, {}},
                                                  {"lo", SlotKind::DataDependentTau, {{0, 0.5}}}});
    const double min_rt = 0.4;
    const double h = 1e-6;
    double worst = 0.0;
    for (const auto& spec : specs) {
      for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd x(spec.size());
        for (int k = 0; k < spec.size(); ++k) x[k] = n(rng);
        const auto J = spec.jacobian(x, min_rt);
        for (int k = 0; k < spec.size(); ++k) {
          Eigen::VectorXd xp = x, xm = x;
          xp[k] += h;
          xm[k] -= h;
          const Eigen::VectorXd fd =
              (spec.from_unconstrained(xp, min_rt) - spec.from_unconstrained(xm, min_rt)) / (2 * h);
          for (int i = 0; i < spec.size(); ++i) {
            const double denom = std::max({std::abs(fd[i]), std::abs(J(i, k)), 1e-3});
            worst = std::max(worst, std::abs(fd[i] - J(i, k)) / denom);
          }
        }
        Eigen::VectorXd g(spec.size());
        for (int k = 0; k < spec.size(); ++k) g[k] = n(rng);
        Eigen::VectorXd gx;
        spec.pullback(x, g, gx, min_rt);
        CHECK((gx - J.transpose() * g).norm() <= 1e-12 * (1 + g.norm()));
        CHECK(spec.log_abs_det_jacobian(x, min_rt) ==
              doctest::Approx(std::log(std::abs(J.determinant()))).epsilon(1e-10));
      }
    }
    CHECK(worst <= 1e-7);
  }

  TEST_CASE("natural-side invariant violations raise domain errors") {
    const auto spec = ddm_transform();
    CHECK_THROWS_AS(spec.to_unconstrained(ddm_natural(0, 1, 1.0, 0.9, 0.4, 0.3, 0.1)), DomainError);
    CHECK_THROWS_AS(spec.to_unconstrained(ddm_natural(0, 1, 2.0, 0.1, 0.4, 0.3, 0.1)), DomainError);
    CHECK_THROWS_AS(spec.to_unconstrained(ddm_natural(0, -1, 2.0, 1.0, 0.4, 0.3, 0.1)), DomainError);
    CHECK_THROWS_AS(spec.to_unconstrained(ddm_natural(0, 1, 2.0, 1.0, 0.4, 0.04, 0.1)), DomainError);
    CHECK_THROWS_AS(TransformSpec({{"x", SlotKind::LogGap, {{1, 1.0}}},
                                   {"y", SlotKind::LogGap, {{0, 1.0}}}}),
                    ConfigError);
  }

  TEST_CASE("data-dependent non-decision transform") {
    const double min_rt = 0.35;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(7);
    alpha[5] = std::log(min_rt / 2);
    CHECK(tau_transform_data(alpha, min_rt, 5).effects[5] == doctest::Approx(0.0).epsilon(1e-15));
    alpha[5] = std::log(min_rt * 1.01);
    CHECK_THROWS_AS(tau_transform_data(alpha, min_rt, 5), DomainError);

    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double h = 1e-6;
    for (int i = 0; i < 200; ++i) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(7);
      a[5] = std::log(min_rt * (0.01 + 0.98 * u(rng)));
      a[0] = u(rng);
      const auto fwd = tau_transform_data(a, min_rt, 5);
      const auto back = tau_transform_inverse(fwd.effects, min_rt, 5);
      CHECK((back.alpha - a).cwiseAbs().maxCoeff() <= 1e-12);
      // forward derivative and both log-Jacobians
      Eigen::VectorXd ap = a, am = a;
      ap[5] += h;
      am[5] -= h;
      const double dfwd = (tau_transform_data(ap, min_rt, 5).effects[5] -
                           tau_transform_data(am, min_rt, 5).effects[5]) / (2 * h);
      CHECK(std::log(std::abs(dfwd)) == doctest::Approx(fwd.log_jacobian).epsilon(1e-7));
      CHECK(back.log_jacobian == doctest::Approx(-fwd.log_jacobian).epsilon(1e-10));
      CHECK(back.d_alpha == doctest::Approx(1.0 / dfwd).epsilon(1e-7));
      Eigen::VectorXd tp = fwd.effects, tm = fwd.effects;
      tp[5] += h;
      tm[5] -= h;
      const double dlj = (tau_transform_inverse(tp, min_rt, 5).log_jacobian -
                          tau_transform_inverse(tm, min_rt, 5).log_jacobian) / (2 * h);
      CHECK(back.d_log_jacobian == doctest::Approx(dlj).epsilon(1e-7));
    }
  }

  TEST_CASE("linking: zero coefficients reproduce the plain transform") {
    const auto spec = ddm_transform();
    auto design = identity_design(spec, true);
    design.validate(spec.size());
    Trial trial{0, 0.6, {}, Eigen::Vector3d(0.3, -1.2, 2.0)};
    Eigen::VectorXd alpha(7);
    alpha << 0.4, -0.3, 0.1, -0.5, -1.0, -1.5, -2.0;
    const Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(7, 3);
    CHECK((link_trial(alpha, beta, trial, design, spec, 0.6) - spec.from_unconstrained(alpha)).norm() == 0.0);
  }

  TEST_CASE("linking: known coefficient on a log slot") {
    const TransformSpec spec({{"c", SlotKind::Log, {}}});
    LinkingDesign design;
    design.slot_names = {"log_c"};
    design.beta_row_names = {"log_c"};
    design.recipes = {LinkRecipe{{LinkTerm{0, 1.0, {}, {}, -1}}, 0.0, 0}};
    design.bind({});
    design.validate(1);
    Trial trial{0, 0.5, {}, Eigen::VectorXd::Constant(1, 2.0)};
    const Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(1, 1, 0.5);
    const auto out = link_trial(Eigen::VectorXd::Zero(1), beta, trial, design, spec, 0.5);
    CHECK(out[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  }

  TEST_CASE("linking: rotation and condition-indexed designs") {
    // drift = intercept + angle * slope; threshold slot chosen by condition
    const auto spec = lba_transform(2);
    LinkingDesign design;
    design.slot_names = {"gap_speed", "gap_acc", "logA", "v0", "k", "v_err", "logtau"};
    design.recipes.resize(5);
    design.recipes[0].terms = {LinkTerm{0, 1.0, {}, {{"cond", 0.0}}, -1},
                               LinkTerm{1, 1.0, {}, {{"cond", 1.0}}, -1}};
    design.recipes[1].terms = {LinkTerm{2, 1.0, {}, {}, -1}};
    design.recipes[2].terms = {LinkTerm{3, 1.0, {}, {}, -1}, LinkTerm{4, 1.0, "angle", {}, -1}};
    design.recipes[3].terms = {LinkTerm{5, 1.0, {}, {}, -1}};
    design.recipes[4].terms = {LinkTerm{6, 1.0, {}, {}, -1}};
    design.bind({"angle", "cond"});
    design.validate(spec.size());
    Eigen::VectorXd alpha(7);
    alpha << 0.1, 0.7, -0.2, 1.5, 0.8, -0.4, -1.6;
    const Eigen::MatrixXd beta(0, 0);

    Trial t0{0, 0.6, {0.0, 1.0}, Eigen::VectorXd()};
    auto p = link_trial(alpha, beta, t0, design, spec, 0.6);
    CHECK(p[2] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(p[0] - p[1] == doctest::Approx(std::exp(0.7)).epsilon(1e-14));

    Trial t1{0, 0.6, {2.0, 0.0}, Eigen::VectorXd()};
    p = link_trial(alpha, beta, t1, design, spec, 0.6);
    CHECK(p[2] == doctest::Approx(1.5 + 2.0 * 0.8).epsilon(1e-15));
    CHECK(p[0] - p[1] == doctest::Approx(std::exp(0.1)).epsilon(1e-14));
  }

  TEST_CASE("linking gradient pullback against finite differences") {
    const auto spec = lba_transform(2);
    auto design = identity_design(spec, true);
    design.recipes[2].terms.push_back(LinkTerm{3, -0.5, "angle", {}, -1});
    design.bind({"angle"});
    design.validate(spec.size());
    Trial trial{1, 0.7, {1.3}, Eigen::Vector2d(0.4, -0.9)};
    Eigen::VectorXd alpha(5);
    alpha << 0.2, -0.4, 1.0, 0.3, -1.5;
    Eigen::MatrixXd beta(5, 2);
    beta << 0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9, 0.05;
    Eigen::VectorXd w(5);
    w << 0.3, -1.1, 0.6, 2.0, -0.7;  // objective: w . link
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(5);
    Eigen::MatrixXd gb = Eigen::MatrixXd::Zero(5, 2);
    design.accumulate(w, trial, ga, gb);
    const double h = 1e-6;
    for (int k = 0; k < 5; ++k) {
      Eigen::VectorXd ap = alpha, am = alpha;
      ap[k] += h;
      am[k] -= h;
      const double fd = (w.dot(design.link(ap, beta, trial)) - w.dot(design.link(am, beta, trial))) / (2 * h);
      CHECK(ga[k] == doctest::Approx(fd).epsilon(1e-8));
    }
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 2; ++c) {
        Eigen::MatrixXd bp = beta, bm = beta;
        bp(r, c) += h;
        bm(r, c) -= h;
        const double fd = (w.dot(design.link(alpha, bp, trial)) - w.dot(design.link(alpha, bm, trial))) / (2 * h);
        CHECK(gb(r, c) == doctest::Approx(fd).epsilon(1e-8));
      }
  }

  TEST_CASE("design validation") {
    const auto spec = lba_transform(2);
    auto design = identity_design(spec, true);
    design.slot_names.push_back("orphan");
    CHECK_THROWS_AS(design.validate(spec.size()), ConfigError);
    design = identity_design(spec, true);
    design.beta_row_names.push_back("orphan");
    CHECK_THROWS_AS(design.validate(spec.size()), ConfigError);
    design = identity_design(spec, false);
    design.recipes[0].terms[0].attribute = "missing";
    CHECK_THROWS_AS(design.bind({"angle"}), ConfigError);
    try {
      design.bind({"angle"});
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("missing") != std::string::npos);
    }
    CHECK_THROWS_AS(identity_design(spec, false).validate(spec.size() + 1), ConfigError);
  }
}
