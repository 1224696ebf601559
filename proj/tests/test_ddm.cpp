#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "eam/ddm.hpp"

using namespace eam;

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

DdmParams random_ddm(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  DdmParams p;
  p.mu_v = -3.0 + 6.0 * U(rng);
  p.s_v = 0.1 + 1.4 * U(rng);
  p.a = 0.6 + 1.9 * U(rng);
  p.mu_z = p.a * (0.35 + 0.3 * U(rng));
  p.s_z = 2.0 * std::min(p.mu_z, p.a - p.mu_z) * (0.1 + 0.7 * U(rng));
  p.s_tau = 0.02 + 0.18 * U(rng);
  p.mu_tau = 0.15 + 0.25 * U(rng) + 0.5 * p.s_tau;
  return p;
}

double rel_err(double analytic, double fd, double scale) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), scale});
}

SeriesPlan long_plan(Representation r) {
  SeriesPlan p;
  p.representation = r;
  p.kappa = 60;
  return p;
}

double param(const DdmParams& p, int i) {
  const double v[] = {p.mu_v, p.s_v, p.a, p.mu_z, p.s_z, p.mu_tau, p.s_tau};
  return v[i];
}
DdmParams with(DdmParams p, int i, double x) {
  double* f[] = {&p.mu_v, &p.s_v, &p.a, &p.mu_z, &p.s_z, &p.mu_tau, &p.s_tau};
  *f[i] = x;
  return p;
}

double mass(const DdmParams& p, Boundary b, const QuadratureRule& q) {
  auto f = [&](double t) { return ddm_density(b, t, p, q); };
  const double lo = p.mu_tau - 0.5 * p.s_tau;
  return GK::integrate(f, lo, lo + 60.0, 20, 1e-10);
}

}  // namespace

TEST_SUITE("ddm") {
  TEST_CASE("vanishing drift variability reproduces the simple diffusion density") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
      DdmParams p = random_ddm(rng);
      p.s_v = 1e-6;
      const double tau = 0.2, rt = 0.25 + 1.5 * std::uniform_real_distribution<double>()(rng);
      const double z = p.mu_z;
      const auto plan = choose_representation((rt - tau) / (p.a * p.a), 1e-12);
      const double g = ddm_integrand(plan, z, tau, rt, p);
      const double f = wfpt_density(Boundary::Lower, {p.mu_v, p.a, z / p.a, rt - tau}, 1e-12);
      CHECK(std::abs(g - f) <= 1e-8);
    }
  }

  TEST_CASE("integrand matches numerical integration over drift") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 30; ++i) {
      const DdmParams p = random_ddm(rng);
      const double tau = 0.1, rt = 0.15 + 2.0 * std::uniform_real_distribution<double>()(rng);
      const double z = p.mu_z;
      auto over_v = [&](double v) {
        const double dens = std::exp(-0.5 * std::pow((v - p.mu_v) / p.s_v, 2)) /
                            (p.s_v * std::sqrt(2 * std::numbers::pi));
        return wfpt_density(Boundary::Lower, {v, p.a, z / p.a, rt - tau}, 1e-12) * dens;
      };
      const double ref = GK::integrate(over_v, p.mu_v - 10 * p.s_v, p.mu_v + 10 * p.s_v, 15, 1e-13);
      const auto plan = choose_representation((rt - tau) / (p.a * p.a), 1e-12);
      CHECK(ddm_integrand(plan, z, tau, rt, p) == doctest::Approx(ref).epsilon(1e-8));
    }
  }

  TEST_CASE("integrand vanishes outside the support") {
    DdmParams p{1, 1, 1.5, 0.75, 0.2, 0.3, 0.1};
    const auto plan = choose_representation(0.1, 1e-10);
    CHECK(ddm_integrand(plan, 0.7, 0.5, 0.5, p) == 0.0);
    CHECK(ddm_integrand(plan, 0.7, 0.6, 0.5, p) == 0.0);
    CHECK(ddm_density(Boundary::Lower, 0.25, p, QuadratureRule()) == 0.0);
  }

  TEST_CASE("integrand partials match finite differences in both representations") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double h = 1e-6;
    int checked = 0;
    for (Representation rep : {Representation::SmallTime, Representation::LargeTime}) {
      const SeriesPlan plan = long_plan(rep);
      for (int i = 0; i < 100; ++i) {
        const DdmParams p = random_ddm(rng);
        const double z = p.mu_z + (U(rng) - 0.5) * p.s_z;
        // Scaled times over the range where each series is the one the rule selects.
        const double u = rep == Representation::SmallTime ? 0.01 + 0.99 * U(rng) : 0.1 + 4.9 * U(rng);
        const double mu = p.mu_v, var = p.s_v * p.s_v, t = u * p.a * p.a;
        const auto g = detail::ddm_integrand_grad_raw(plan, z, t, mu, var, p.a);
        auto f = [&](double m, double vv, double a, double zz, double tt) {
          return detail::ddm_integrand_raw(plan, zz, tt, m, vv, a);
        };
        // Partials far below the integrand's own scale are dominated by difference roundoff.
        const double scale = 1e-4 * std::abs(g.value);
        const double fd[] = {
            (f(mu + h, var, p.a, z, t) - f(mu - h, var, p.a, z, t)) / (2 * h),
            (f(mu, var + h, p.a, z, t) - f(mu, var - h, p.a, z, t)) / (2 * h),
            (f(mu, var, p.a + h, z, t) - f(mu, var, p.a - h, z, t)) / (2 * h),
            (f(mu, var, p.a, z + h, t) - f(mu, var, p.a, z - h, t)) / (2 * h),
            -(f(mu, var, p.a, z, t + h) - f(mu, var, p.a, z, t - h)) / (2 * h)};
        const double an[] = {g.d_mu_v, g.d_var_v, g.d_a, g.d_z, g.d_tau};
        for (int k = 0; k < 5; ++k) {
          CHECK_MESSAGE(rel_err(an[k], fd[k], scale) <= 1e-5, "partial " << k);
          ++checked;
        }
        CHECK(g.value == doctest::Approx(f(mu, var, p.a, z, t)).epsilon(1e-14));
      }
    }
    CHECK(checked == 1000);
  }

  TEST_CASE("drift partial at zero drift mean has the closed form") {
    DdmParams p{0.0, 0.8, 1.6, 0.8, 0.2, 0.3, 0.1};
    const auto plan = choose_representation(0.4, 1e-12);
    const double z = 0.8, tau = 0.3, rt = 0.9, t = rt - tau;
    const auto g = ddm_integrand_grad(plan, z, tau, rt, p);
    CHECK(g.d_mu_v == doctest::Approx(-(z / (t * p.s_v * p.s_v + 1)) * g.value).epsilon(1e-12));
  }

  TEST_CASE("small- and large-time partials agree at moderate time") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
      const DdmParams p = random_ddm(rng);
      const double t = 0.5 * p.a * p.a, z = p.mu_z;
      const auto s = detail::ddm_integrand_grad_raw(long_plan(Representation::SmallTime), z, t,
                                                    p.mu_v, p.s_v * p.s_v, p.a);
      const auto l = detail::ddm_integrand_grad_raw(long_plan(Representation::LargeTime), z, t,
                                                    p.mu_v, p.s_v * p.s_v, p.a);
      CHECK(std::abs(s.value - l.value) <= 1e-7);
      CHECK(std::abs(s.d_mu_v - l.d_mu_v) <= 1e-7);
      CHECK(std::abs(s.d_var_v - l.d_var_v) <= 1e-7);
      CHECK(std::abs(s.d_a - l.d_a) <= 1e-7);
      CHECK(std::abs(s.d_z - l.d_z) <= 1e-7);
      CHECK(std::abs(s.d_tau - l.d_tau) <= 1e-7);
    }
  }

  TEST_CASE("degenerate variability limits reduce to the simple diffusion density") {
    const QuadratureRule q;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 30; ++i) {
      DdmParams p = random_ddm(rng);
      p.s_v = 1e-6;
      p.s_z = 1e-6;
      p.s_tau = 1e-6;
      const double rt = p.mu_tau + 0.05 + 1.5 * std::uniform_real_distribution<double>()(rng);
      for (Boundary b : {Boundary::Lower, Boundary::Upper}) {
        const double ref =
            wfpt_density(b, {p.mu_v, p.a, p.mu_z / p.a, rt - p.mu_tau}, 1e-12);
        CHECK(std::abs(ddm_density(b, rt, p, q, 1e-12) - ref) <= 1e-6);
      }
    }
  }

  TEST_CASE("reflection identity is exact") {
    const QuadratureRule q;
    std::mt19937_64 rng(6);
    for (int i = 0; i < 20; ++i) {
      const DdmParams p = random_ddm(rng);
      DdmParams r = p;
      r.mu_v = -p.mu_v;
      r.mu_z = p.a - p.mu_z;
      const double rt = p.mu_tau + 0.3;
      CHECK(ddm_density(Boundary::Upper, rt, p, q) == ddm_density(Boundary::Lower, rt, r, q));
    }
  }

  TEST_CASE("symmetric configuration splits mass evenly and masses sum to one") {
    const QuadratureRule q;
    DdmParams sym{0.0, 0.7, 1.4, 0.7, 0.3, 0.35, 0.1};
    const double lower = mass(sym, Boundary::Lower, q), upper = mass(sym, Boundary::Upper, q);
    CHECK(std::abs(lower - 0.5) <= 1e-3);
    CHECK(std::abs(upper - 0.5) <= 1e-3);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 5; ++i) {
      const DdmParams p = random_ddm(rng);
      const double total = mass(p, Boundary::Lower, q) + mass(p, Boundary::Upper, q);
      CHECK(std::abs(total - 1.0) <= 1e-3);
    }
  }

  TEST_CASE("log-density gradient matches finite differences") {
    const QuadratureRule q;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const DdmParams p = random_ddm(rng);
      const Boundary b = i % 2 ? Boundary::Upper : Boundary::Lower;
      // Half the points put the response inside the non-decision support.
      const double rt = (i % 4 < 2) ? p.mu_tau + 0.5 * p.s_tau + 0.05 + 1.2 * U(rng)
                                    : p.mu_tau + (U(rng) - 0.3) * 0.5 * p.s_tau;
      if (ddm_density(b, rt, p, q) < 1e-8) continue;
      const auto g = ddm_loglik_grad(b, rt, p, q);
      for (int k = 0; k < 7; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(param(p, k)));
        const double fp = std::log(ddm_density(b, rt, with(p, k, param(p, k) + h), q));
        const double fm = std::log(ddm_density(b, rt, with(p, k, param(p, k) - h), q));
        const double fd = (fp - fm) / (2 * h);
        CHECK_MESSAGE(rel_err(g[k], fd, 1e-6) <= 1e-4, "param " << k << " rt " << rt);
      }
    }
  }

  TEST_CASE("drift gradient is antisymmetric across boundaries at the symmetric point") {
    const QuadratureRule q;
    DdmParams sym{0.0, 0.7, 1.4, 0.7, 0.3, 0.35, 0.1};
    for (double rt : {0.5, 0.8, 1.5}) {
      const auto lo = ddm_loglik_grad(Boundary::Lower, rt, sym, q);
      const auto up = ddm_loglik_grad(Boundary::Upper, rt, sym, q);
      CHECK(lo[0] == doctest::Approx(-up[0]).epsilon(1e-10));
    }
  }

  TEST_CASE("zero density raises an error carrying the trial index") {
    DdmParams p{1, 1, 1.5, 0.75, 0.2, 0.3, 0.1};
    try {
      ddm_loglik_grad(Boundary::Lower, 0.1, p, QuadratureRule(), 1e-10, 17);
      FAIL("expected an error");
    } catch (const ZeroDensityError& e) {
      CHECK(e.trial() == 17);
    }
  }

  TEST_CASE("quadrature converges across the grid") {
    const QuadratureRule q16(16, 16), q32(32, 32), q64(64, 64);
    std::mt19937_64 rng(9);
    double worst_beyond = 0, worst_inside = 0, worst_grad = 0;
    for (int i = 0; i < 40; ++i) {
      const DdmParams p = random_ddm(rng);
      for (double offset : {-0.3, 0.0, 0.1, 0.4, 1.0}) {
        const double rt = p.mu_tau + 0.5 * p.s_tau + offset * (offset < 0 ? p.s_tau : 1.0);
        for (Boundary b : {Boundary::Lower, Boundary::Upper}) {
          const double d64 = ddm_density(b, rt, p, q64);
          if (offset > 0)
            worst_beyond = std::max(worst_beyond, std::abs(ddm_density(b, rt, p, q16) - d64));
          else
            worst_inside = std::max(worst_inside, std::abs(ddm_density(b, rt, p, q32) - d64));
          if (offset < 0.1) continue;
          const auto g16 = ddm_density_grad(b, rt, p, q16);
          const auto g32 = ddm_density_grad(b, rt, p, q32);
          if (g32.density < 1e-3) continue;
          for (int k = 0; k < 7; ++k)
            worst_grad = std::max(worst_grad, std::abs(g16.grad_log[k] - g32.grad_log[k]));
        }
      }
    }
    CHECK(worst_beyond <= 1e-7);
    // Responses inside the non-decision support are checked at the default node count.
    CHECK(worst_inside <= 1e-7);
    CHECK(worst_grad <= 1e-6);
  }

  TEST_CASE("invariant violations raise domain errors") {
    const QuadratureRule q;
    CHECK_THROWS_AS(ddm_density(Boundary::Lower, 1.0, {1, 1, 1.0, 0.9, 0.3, 0.3, 0.1}, q), DomainError);
    CHECK_THROWS_AS(ddm_density(Boundary::Lower, 1.0, {1, 1, 1.0, 0.1, 0.3, 0.3, 0.1}, q), DomainError);
    CHECK_THROWS_AS(ddm_density(Boundary::Lower, 1.0, {1, 1, 1.0, 0.5, 0.3, 0.04, 0.1}, q), DomainError);
    CHECK_THROWS_AS(ddm_density(Boundary::Lower, 1.0, {1, 0, 1.0, 0.5, 0.3, 0.3, 0.1}, q), DomainError);
  }
}
