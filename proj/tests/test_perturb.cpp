#include <stdexcept>
#include <cmath>
#include <random>

#include "amp/perturb.hpp"
#include "amp/theory.hpp"
#include "amp/trainer.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amp;

TEST_CASE("projection examples") {
  CHECK(project_to_ball(RealVec{3, 4}, {10}) == RealVec{3, 4});
  const RealVec p = project_to_ball(RealVec{3, 4}, {1});
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(project_to_ball(RealVec{0, 0}, {0.5}) == RealVec{0, 0});
  CHECK(project_to_ball(RealVec{1, -2}, {0}) == RealVec{0, 0});
  // on the sphere exactly: strict inequality leaves it alone
  CHECK(project_to_ball(RealVec{3, 4}, {5}) == RealVec{3, 4});
}

TEST_CASE("projection is idempotent and never grows the norm") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0, 3);
  for (int t = 0; t < 200; ++t) {
    RealVec d(1 + t % 9);
    for (double& v : d) v = n(gen);
    const BallSpec ball{std::abs(n(gen))};
    const RealVec p = project_to_ball(d, ball);
    CHECK(l2_norm(p) <= l2_norm(d));
    CHECK(l2_norm(p) <= ball.epsilon * (1 + 1e-15));
    const RealVec pp = project_to_ball(p, ball);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(pp[i] == doctest::Approx(p[i]).epsilon(1e-15));
  }
}

TEST_CASE("ascent on a linear loss saturates along the gradient") {
  const RealVec a{1, -2, 2};
  const oracle::Linear lin(a);
  const RealVec d = amp_inner_ascent(lin, RealVec{5, 5, 5}, {1e3, 1}, {0.3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(0.3 * a[i] / 3.0).epsilon(1e-14));
}

TEST_CASE("one ascent step on a quadratic") {
  // J = theta^2 / 2 at theta = 1: delta = 0.1 * J'(1) = 0.1, inside the unit ball
  const oracle::Quadratic q({1.0});
  const RealVec d = amp_inner_ascent(q, RealVec{1.0}, {0.1, 1}, {1.0});
  CHECK(d[0] == doctest::Approx(0.1).epsilon(1e-15));
  // two steps: gradient re-evaluated at theta + delta
  const RealVec d2 = amp_inner_ascent(q, RealVec{1.0}, {0.1, 2}, {1.0});
  CHECK(d2[0] == doctest::Approx(0.1 + 0.1 * 1.1).epsilon(1e-15));
}

TEST_CASE("ascent on a Gaussian surface finds the flattest axis") {
  // At theta = mu the gradient vanishes and a zero start cannot move, so the
  // surface is probed a hair away from mu along a generic direction.
  Rng rng(12, "surface");
  for (int t = 0; t < 5; ++t) {
    // random rotation of the spectrum (0.2, 0.6, 1.5)
    const RealMat q = random_surface(rng, 3, 20.0).eigen().vectors;
    const RealVec lam{0.2, 0.6, 1.5};
    RealMat kappa(3, 3);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t k = 0; k < 3; ++k) kappa(a, b) += q(a, k) * lam[k] * q(b, k);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < a; ++b) kappa(b, a) = kappa(a, b);
    const GaussianSurface s(rng_standard_normal(rng, 3), kappa, 1.0, 0.0);
    const GaussianObjective obj(s);
    RealVec theta = s.mu();
    theta[0] += 1e-6;
    theta[1] -= 0.7e-6;
    theta[2] += 0.4e-6;
    const double eps = 0.5 * std::sqrt(s.sigma_sq());
    const RealVec d = amp_inner_ascent(obj, theta, {s.sigma_sq() * 0.05, 2000}, {eps});
    CHECK(l2_norm(d) == doctest::Approx(eps).epsilon(1e-12));
    double cosv = 0.0;
    for (std::size_t r = 0; r < 3; ++r) cosv += d[r] * s.eigen().vectors(r, 0);
    CHECK(std::abs(cosv) / eps >= 0.999);
  }
}

TEST_CASE("zero radius yields the zero perturbation") {
  const oracle::Linear lin({1, 2});
  CHECK(amp_inner_ascent(lin, RealVec{0, 0}, {1, 5}, {0.0}) == RealVec{0, 0});
}

TEST_CASE("ascent is monotone on a Gaussian surface for small steps") {
  Rng rng(4, "mono");
  const GaussianSurface s = random_surface(rng, 4, 10.0);
  const GaussianObjective obj(s);
  RealVec theta = s.mu();
  for (double& v : theta) v += 0.05;
  const double eps = 0.8;
  double prev = obj.value(theta);
  for (std::size_t k = 1; k <= 60; ++k) {
    const RealVec d = amp_inner_ascent(obj, theta, {0.02, k}, {eps});
    const double v = obj.value(add(theta, d));
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
}

TEST_CASE("MLP ascent is deterministic and matches the objective form") {
  std::mt19937_64 gen(2);
  const auto inst = oracle::random_mlp(gen, 50);
  const RealVec a = amp_inner_ascent(inst.spec, inst.theta, inst.batch, {0.5, 3}, {0.2});
  const RealVec b = amp_inner_ascent(BatchObjective(inst.spec, inst.batch), inst.theta, {0.5, 3}, {0.2});
  CHECK(a == b);
  CHECK(a == amp_inner_ascent(inst.spec, inst.theta, inst.batch, {0.5, 3}, {0.2}));
  CHECK(l2_norm(a) <= 0.2 * (1 + 1e-15));
}

TEST_CASE("multistart keeps the best end point") {
  // Toy kink at 0: from 0 the slope points right (value 0.3 at +eps), from
  // -eps the left branch is steeper (value 0.6).
  const ToyObjective toy(PiecewiseToyLoss{1.0});
  const std::vector<ParamVector> starts{{0.0}, {-0.3}, {0.3}};
  const RealVec d = amp_inner_ascent_multistart(toy, RealVec{0.0}, {0.05, 1}, {0.3}, starts);
  CHECK(d[0] == doctest::Approx(-0.3));
  CHECK_THROWS_AS(amp_inner_ascent_multistart(toy, RealVec{0.0}, {0.05, 1}, {0.3}, {}), std::invalid_argument);
}

TEST_CASE("random perturbations stay inside the ball") {
  Rng rng(1, "rmp");
  for (int t = 0; t < 1000; ++t) CHECK(l2_norm(rmp_sample(5, {0.7}, rng)) <= 0.7 * (1 + 1e-15));
  CHECK(rmp_sample(3, {0.0}, rng) == RealVec{0, 0, 0});
}

TEST_CASE("random perturbations are uniform in the disk") {
  Rng rng(1, "rmp");
  int inner = 0;
  const int n = 100000;
  for (int t = 0; t < n; ++t) inner += l2_norm(rmp_sample(2, {1.0}, rng)) <= 0.5;
  CHECK(std::abs(inner / static_cast<double>(n) - 0.25) < 0.01);
}

TEST_CASE("FGSM on a hand-differentiated linear model") {
  // logits = W x, label 0: d loss / dx = p1 (W1 - W0) = p1 (2, -3)
  const MlpSpec spec{{2, 2}};
  const ParamVector theta{1, 2, 3, -1, 0, 0};
  const RealVec x{0.5, 0.5};
  const RealVec adv = fgsm_attack(spec, theta, x, 0, 0.1);
  CHECK(adv[0] == doctest::Approx(0.6));
  CHECK(adv[1] == doctest::Approx(0.4));
  CHECK(fgsm_attack(spec, theta, x, 0, 0.0) == x);
}

TEST_CASE("FGSM with a vanishing input gradient leaves the input alone") {
  const MlpSpec spec{{2, 2}};
  const ParamVector theta{1, 2, 1, 2, 0, 0};  // identical rows
  CHECK(fgsm_attack(spec, theta, RealVec{0.3, -0.2}, 1, 0.5) == RealVec{0.3, -0.2});
}

TEST_CASE("attacks respect the L-infinity radius") {
  std::mt19937_64 gen(9);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_mlp(gen, 50);
    const auto x = inst.batch.inputs.row(0);
    const double radius = 0.05 + 0.01 * t;
    const RealVec f = fgsm_attack(inst.spec, inst.theta, x, inst.batch.labels[0], radius);
    const RealVec p = pgd_attack(inst.spec, inst.theta, x, inst.batch.labels[0],
                                 {AttackKind::PGD, radius, radius / 3, 10});
    for (std::size_t k = 0; k < x.size(); ++k) {
      CHECK(std::abs(f[k] - x[k]) <= radius * (1 + 1e-15));
      CHECK(std::abs(p[k] - x[k]) <= radius * (1 + 1e-15));
    }
  }
}

TEST_CASE("one saturated PGD step equals FGSM") {
  std::mt19937_64 gen(10);
  for (int t = 0; t < 30; ++t) {
    const auto inst = oracle::random_mlp(gen, 50);
    const auto x = inst.batch.inputs.row(0);
    const RealVec f = fgsm_attack(inst.spec, inst.theta, x, inst.batch.labels[0], 0.1);
    const RealVec p = pgd_attack(inst.spec, inst.theta, x, inst.batch.labels[0], {AttackKind::PGD, 0.1, 0.5, 1});
    CHECK(f == p);
  }
}

TEST_CASE("PGD raises the loss on a trained model") {
  const SplitDataset data = split(gen_spiral(200, 3, 0.05, 3), 0.5, 3);
  const MlpSpec spec{{2, 16, 3}};
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.outer_lr = 0.05;
  const RunRecord rec = train(spec, data, cfg);
  const AttackSpec atk{AttackKind::PGD, 0.05, 0.0125, 10};
  std::size_t up = 0, total = 0;
  for (const Dataset* d : {&data.train, &data.test})
    for (std::size_t i = 0; i < d->size(); ++i) {
      const auto x = d->inputs.row(i);
      const std::size_t y = d->labels[i];
      const RealVec adv = pgd_attack(spec, rec.theta, x, y, atk);
      const double before = xent_loss(forward(spec, rec.theta, RealMat(1, 2, RealVec(x.begin(), x.end()))), {y}).mean_loss;
      const double after = xent_loss(forward(spec, rec.theta, RealMat(1, 2, adv)), {y}).mean_loss;
      up += after >= before;
      ++total;
    }
  REQUIRE(total >= 600);
  CHECK(up >= 0.95 * total);
}

TEST_CASE("attack batch and spec validation") {
  CHECK_THROWS_AS((AttackSpec{AttackKind::PGD, 0.1, 0.1, 0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((AttackSpec{AttackKind::FGSM, -1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((InnerAscentSpec{0.0, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((InnerAscentSpec{1.0, 0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BallSpec{-0.1}.validate()), std::invalid_argument);
  CHECK(parse_attack_kind("pgd") == AttackKind::PGD);
  CHECK_THROWS_AS(parse_attack_kind("cw"), std::invalid_argument);
}
