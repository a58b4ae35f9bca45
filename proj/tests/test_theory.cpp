#include <stdexcept>
#include <cmath>
#include <random>

#include "amp/theory.hpp"
#include "doctest.h"

using namespace amp;

namespace {

GaussianSurface isotropic(RealVec mu, double var, double A, double C) {
  const std::size_t n = mu.size();
  return GaussianSurface(std::move(mu), RealMat::diagonal(RealVec(n, var)), A, C);
}

// gamma_AMP* via the closed form, written out independently.
double amp_star(double A, double C, double sigma_sq, double eps) {
  return C - A * std::exp(-eps * eps / (2.0 * sigma_sq));
}

}  // namespace

TEST_CASE("surface value at the centre, in the tail and at unit distance") {
  const GaussianSurface s({1.0, -2.0}, RealMat(2, 2, RealVec{2, 0.5, 0.5, 1}), 1.5, 0.25);
  CHECK(gamma_eval(s, s.mu()) == doctest::Approx(0.25 - 1.5).epsilon(1e-15));
  CHECK(gamma_eval(s, RealVec{1e3, 1e3}) == doctest::Approx(0.25).epsilon(1e-15));
  const GaussianSurface u = isotropic({0, 0}, 1.0, 1.0, 0.0);
  CHECK(gamma_eval(u, RealVec{0.6, 0.8}) == doctest::Approx(-0.6065306597126334).epsilon(1e-14));
}

TEST_CASE("surface gradient matches finite differences") {
  Rng rng(3, "grad");
  for (int t = 0; t < 20; ++t) {
    const GaussianSurface s = random_surface(rng, 1 + t % 5, 50.0);
    RealVec th = s.mu();
    for (double& v : th) v += 0.3 * rng.normal();
    const RealVec g = gamma_gradient(s, th);
    for (std::size_t i = 0; i < th.size(); ++i) {
      RealVec p = th, m = th;
      p[i] += 1e-6;
      m[i] -= 1e-6;
      CHECK(g[i] == doctest::Approx((gamma_eval(s, p) - gamma_eval(s, m)) / 2e-6).epsilon(1e-6).scale(1e-8));
    }
  }
}

TEST_CASE("surface construction validates its inputs") {
  CHECK_THROWS_AS(GaussianSurface({0, 0}, RealMat::identity(2), 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianSurface({0, 0}, RealMat::identity(3), 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianSurface({0, 0}, RealMat(2, 2, RealVec{1, 2, 2, 1}), 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("closed-form ball minimum") {
  const GaussianSurface s = isotropic({0, 0}, 1.0, 1.0, 1.0);
  CHECK(gamma_amp_star_closed(s, 0.0) == 0.0);
  CHECK(gamma_amp_star_closed(s, 1.0) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
  CHECK(gamma_amp_star_closed(s, 1.0) == doctest::Approx(0.393469340287).epsilon(1e-11));
  CHECK(gamma_amp_numeric(s, s.mu(), 1.0) == doctest::Approx(gamma_amp_star_closed(s, 1.0)).epsilon(1e-6));
  // only the smallest eigenvalue matters
  const GaussianSurface d({0, 0}, RealMat::diagonal(RealVec{1, 4}), 1.0, 1.0);
  CHECK(gamma_amp_star_closed(d, 1.0) == gamma_amp_star_closed(s, 1.0));
  CHECK(gamma_amp_numeric(d, d.mu(), 1.0) == doctest::Approx(gamma_amp_star_closed(s, 1.0)).epsilon(1e-6));
}

TEST_CASE("numeric ball max at the centre matches the closed form") {
  Rng rng(21, "t1");
  for (int t = 0; t < 25; ++t) {
    const GaussianSurface s = random_surface(rng, 1 + t % 5, 100.0);
    const double eps = 0.01 + 1.99 * rng.uniform();
    const double closed = gamma_amp_star_closed(s, eps);
    CHECK(std::abs(gamma_amp_numeric(s, s.mu(), eps, t) - closed) / s.A() <= 1e-6);
  }
}

TEST_CASE("numeric ball max with zero radius is the plain value") {
  Rng rng(2, "e0");
  const GaussianSurface s = random_surface(rng, 3, 10.0);
  const RealVec th{0.1, 0.2, 0.3};
  CHECK(gamma_amp_numeric(s, th, 0.0) == gamma_eval(s, th));
}

TEST_CASE("numeric ball max in one dimension matches a dense grid") {
  Rng rng(8, "grid");
  for (int t = 0; t < 6; ++t) {
    const GaussianSurface s = random_surface(rng, 1, 1.0);
    const double th = s.mu()[0] + 0.8 * rng.normal();
    const double eps = 0.05 + 0.5 * rng.uniform();
    double best = -INFINITY;
    const int n = 1000000;
    for (int i = 0; i <= n; ++i) {
      const double x = th - eps + 2.0 * eps * i / n;
      best = std::max(best, gamma_eval(s, RealVec{x}));
    }
    CHECK(gamma_amp_numeric(s, RealVec{th}, eps) == doctest::Approx(best).epsilon(1e-6).scale(1e-6));
  }
}

TEST_CASE("ball max dominates the point value") {
  Rng rng(5, "dom");
  for (int t = 0; t < 20; ++t) {
    const GaussianSurface s = random_surface(rng, 1 + t % 4, 30.0);
    RealVec th = s.mu();
    for (double& v : th) v += rng.normal();
    CHECK(gamma_amp_numeric(s, th, 0.3) >= gamma_eval(s, th));
    CHECK(gamma_amp_star_closed(s, 0.3) > gamma_eval(s, s.mu()));
  }
}

TEST_CASE("closed form is nondecreasing in the radius") {
  const GaussianSurface s = isotropic({0}, 0.3, 2.0, -1.0);
  double prev = gamma_amp_star_closed(s, 0.0);
  for (int i = 1; i <= 100; ++i) {
    const double v = gamma_amp_star_closed(s, 0.03 * i);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("sandwich condition examples") {
  // Well 1: deeper but sharp; well 2: shallower and flat.
  const double A1 = 1.0, A2 = 0.8, C1 = 0.0, C2 = 0.0, s1 = 0.1, s2 = 2.0, eps = 0.5;
  const double g1 = C1 - A1, g2 = C2 - A2;
  const double a1 = amp_star(A1, C1, s1, eps), a2 = amp_star(A2, C2, s2, eps);
  REQUIRE(g1 < g2);
  REQUIRE(a1 > a2);
  CHECK(cor1_swap_condition(A1, A2, C1, C2, s1, s2, eps));
  CHECK_FALSE(cor1_swap_condition(1.0, 1.0, 0.5, 0.5, s1, s2, eps));
  CHECK_FALSE(cor1_swap_condition(A1, A2, C1, C2, s1, s2, 0.0));
}

TEST_CASE("sandwich condition agrees with direct comparisons") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> A(0.1, 2.0), C(-1.0, 1.0), S(0.05, 3.0), E(0.0, 2.0);
  int agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const double A1 = A(gen), A2 = A(gen), C1 = C(gen), C2 = C(gen), s1 = S(gen), s2 = S(gen), eps = E(gen);
    const bool direct = (C1 - A1 < C2 - A2) && (amp_star(A1, C1, s1, eps) > amp_star(A2, C2, s2, eps));
    agree += direct == cor1_swap_condition(A1, A2, C1, C2, s1, s2, eps);
  }
  CHECK(agree == 1000);
}

TEST_CASE("operational region examples") {
  // eps^2 / (2 sigma1^2) = 1 with eps = sqrt(2), sigma1^2 = 1
  const double eps = std::sqrt(2.0);
  CHECK(region_r_threshold({0.9, 2.0, eps, 1.0}) == doctest::Approx(1.0 / (1.0 + std::log(0.9))).epsilon(1e-14));
  CHECK(region_r_threshold({0.9, 2.0, eps, 1.0}) == doctest::Approx(1.1178).epsilon(1e-4));
  CHECK(operational_region({0.9, 2.0, eps, 1.0}));
  CHECK_FALSE(operational_region({0.9, 1.0, eps, 1.0}));
  for (double r : {0.1, 1.0, 5.0, 100.0, 1e6}) CHECK_FALSE(operational_region({0.3, r, eps, 1.0}));
  CHECK(region_beta_floor(eps, 1.0) == doctest::Approx(std::exp(-1.0)));
  CHECK_THROWS_AS(operational_region({1.0, 2.0, eps, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(operational_region({0.5, 0.0, eps, 1.0}), std::invalid_argument);
}

TEST_CASE("equal-depth wells: the flatter one wins") {
  for (double r : {1.01, 1.5, 3.0}) CHECK(operational_region({0.999, r, 1.0, 0.5}));
}

TEST_CASE("the region grows with the radius") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> B(0.01, 0.99), R(0.05, 6.0), E(0.01, 3.0);
  for (int t = 0; t < 2000; ++t) {
    const double beta = B(gen), r = R(gen), e1 = E(gen), e2 = e1 + E(gen);
    if (operational_region({beta, r, e1, 0.7})) CHECK(operational_region({beta, r, e2, 0.7}));
  }
}

TEST_CASE("region predicate matches the double-well comparison") {
  for (double ratio : {0.25, 1.0, 4.0}) {
    const double sigma1_sq = 0.5;
    const double eps = std::sqrt(2.0 * sigma1_sq * ratio);
    const RegionReport rep = verify_region_on_double_well(eps, sigma1_sq, RegionGrid{});
    CHECK(rep.points.size() == 1600);
    CHECK(rep.mismatches == 0);
    CHECK(rep.excluded < 20);
  }
}

TEST_CASE("region with zero radius is empty") {
  const RegionReport rep = verify_region_on_double_well(0.0, 0.5, RegionGrid{});
  for (const auto& p : rep.points) {
    CHECK_FALSE(p.in_region);
    CHECK_FALSE(p.amp_prefers_well2);
  }
}

TEST_CASE("double well geometry") {
  const DoubleWell dw = make_double_well({0.6, 2.0, 0.5, 0.2});
  CHECK(dw.value(dw.first().mu()) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(dw.value(dw.second().mu()) == doctest::Approx(-0.6).epsilon(1e-12));
  // each well is untouched by the other within 2 eps of its centre
  RealVec probe = dw.first().mu();
  probe[0] += 1.0;
  CHECK(gamma_eval(dw.second(), probe) == doctest::Approx(0.0).scale(1e-12));
  CHECK_THROWS_AS(DoubleWell(isotropic({0, 0}, 1, 1, 0), isotropic({1, 0}, 1, 1, 0), 0.5), std::invalid_argument);
}

TEST_CASE("random surfaces respect their bounds") {
  Rng rng(1, "rs");
  for (int t = 0; t < 50; ++t) {
    const GaussianSurface s = random_surface(rng, 1 + t % 5, 100.0);
    CHECK(s.eigen().values.back() / s.eigen().values.front() <= 100.0 * (1 + 1e-9));
    CHECK(s.A() >= 0.5);
    CHECK(s.A() <= 2.0);
  }
}
