#include "amp/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace amp {

void BallSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("ball epsilon must be finite and >= 0");
}

void InnerAscentSpec::validate() const {
  if (!(zeta > 0.0) || !std::isfinite(zeta)) throw std::invalid_argument("inner zeta must be > 0");
  if (n_steps < 1) throw std::invalid_argument("inner n_steps must be >= 1");
}

void AttackSpec::validate() const {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw std::invalid_argument("attack radius must be >= 0");
  if (kind == AttackKind::PGD) {
    if (steps < 1) throw std::invalid_argument("PGD steps must be >= 1");
    if (!(step > 0.0)) throw std::invalid_argument("PGD step must be > 0");
  }
}

const char* to_string(AttackKind kind) { return kind == AttackKind::FGSM ? "fgsm" : "pgd"; }

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "fgsm" || name == "FGSM") return AttackKind::FGSM;
  if (name == "pgd" || name == "PGD") return AttackKind::PGD;
  throw std::invalid_argument("unknown attack kind '" + std::string(name) + "'");
}

ParamVector project_to_ball(std::span<const double> delta, const BallSpec& ball) {
  const double norm = l2_norm(delta);
  ParamVector out(delta.begin(), delta.end());
  if (norm > ball.epsilon) {
    if (ball.epsilon == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
    } else {
      const double s = ball.epsilon / norm;
      for (double& v : out) v *= s;
    }
  }
  return out;
}

namespace {

void ascend(const Objective& objective, std::span<const double> theta, const InnerAscentSpec& inner,
            const BallSpec& ball, ParamVector& delta) {
  ParamVector probe(theta.size());
  for (std::size_t n = 0; n < inner.n_steps; ++n) {
    for (std::size_t i = 0; i < theta.size(); ++i) probe[i] = theta[i] + delta[i];
    const RealVec g = objective.gradient(probe);
    axpy(inner.zeta, g, delta);
    delta = project_to_ball(delta, ball);
  }
}

}  // namespace

ParamVector amp_inner_ascent(const Objective& objective, std::span<const double> theta,
                             const InnerAscentSpec& inner, const BallSpec& ball) {
  inner.validate();
  ball.validate();
  ParamVector delta(theta.size(), 0.0);
  if (ball.epsilon == 0.0) return delta;
  ascend(objective, theta, inner, ball, delta);
  return delta;
}

ParamVector amp_inner_ascent(const MlpSpec& spec, std::span<const double> theta, const Batch& batch,
                             const InnerAscentSpec& inner, const BallSpec& ball) {
  return amp_inner_ascent(BatchObjective(spec, batch), theta, inner, ball);
}

ParamVector amp_inner_ascent_multistart(const Objective& objective, std::span<const double> theta,
                                        const InnerAscentSpec& inner, const BallSpec& ball,
                                        std::span<const ParamVector> starts) {
  inner.validate();
  ball.validate();
  if (starts.empty()) throw std::invalid_argument("multistart ascent needs at least one start");
  ParamVector best;
  double best_value = -INFINITY;
  for (const ParamVector& start : starts) {
    if (start.size() != theta.size()) throw std::invalid_argument("layout mismatch");
    ParamVector delta = project_to_ball(start, ball);
    ascend(objective, theta, inner, ball, delta);
    const double v = objective.value(add(theta, delta));
    if (v > best_value) {
      best_value = v;
      best = std::move(delta);
    }
  }
  return best;
}

ParamVector rmp_sample(std::size_t dim, const BallSpec& ball, Rng& rng) {
  ball.validate();
  if (dim < 1) throw std::invalid_argument("rmp_sample: dim must be >= 1");
  ParamVector d = rng_standard_normal(rng, dim);
  const double u = rng.uniform_pos();
  if (ball.epsilon == 0.0) return ParamVector(dim, 0.0);
  const double norm = l2_norm(d);
  const double radius = ball.epsilon * std::pow(u, 1.0 / static_cast<double>(dim));
  const double s = norm > 0.0 ? radius / norm : 0.0;
  for (double& v : d) v *= s;
  return d;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

RealVec fgsm_attack(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                    std::size_t label, double radius) {
  RealVec out(x.begin(), x.end());
  if (radius == 0.0) return out;
  const RealVec g = input_grad(spec, theta, x, label);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += radius * sign(g[k]);
  return out;
}

RealVec pgd_attack(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                   std::size_t label, const AttackSpec& attack) {
  attack.validate();
  RealVec cur(x.begin(), x.end());
  if (attack.radius == 0.0) return cur;
  for (std::size_t s = 0; s < attack.steps; ++s) {
    const RealVec g = input_grad(spec, theta, cur, label);
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const double v = cur[k] + attack.step * sign(g[k]);
      cur[k] = std::clamp(v, x[k] - attack.radius, x[k] + attack.radius);
    }
  }
  return cur;
}

RealVec run_attack(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                   std::size_t label, const AttackSpec& attack) {
  return attack.kind == AttackKind::FGSM ? fgsm_attack(spec, theta, x, label, attack.radius)
                                         : pgd_attack(spec, theta, x, label, attack);
}

Batch attack_batch(const MlpSpec& spec, std::span<const double> theta, const Batch& batch,
                   const AttackSpec& attack) {
  Batch out = batch;
  if (attack.radius == 0.0) return out;
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    const RealVec adv = run_attack(spec, theta, batch.inputs.row(i), batch.labels[i], attack);
    std::copy(adv.begin(), adv.end(), out.inputs.row(i).begin());
  }
  return out;
}

}  // namespace amp
