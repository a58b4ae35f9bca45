#pragma once

#include <cstddef>
#include <span>

#include "amp/linalg.hpp"
#include "amp/nncore.hpp"

namespace amp {

// L2 ball of radius epsilon around the origin.
struct BallSpec {
  double epsilon = 0.0;
  void validate() const;
};

struct InnerAscentSpec {
  double zeta = 1.0;        // inner learning rate
  std::size_t n_steps = 1;  // N
  void validate() const;
};

enum class AttackKind { FGSM, PGD };

// L-infinity attack on inputs. `step` and `steps` only matter for PGD.
struct AttackSpec {
  AttackKind kind = AttackKind::FGSM;
  double radius = 0.0;
  double step = 1.0;
  std::size_t steps = 10;
  void validate() const;
};

const char* to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

// Rescales onto the sphere only when ||delta|| > epsilon.
ParamVector project_to_ball(std::span<const double> delta, const BallSpec& ball);

// N steps of delta <- project(delta + zeta * grad J(theta + delta)) from delta = 0.
ParamVector amp_inner_ascent(const Objective& objective, std::span<const double> theta,
                             const InnerAscentSpec& inner, const BallSpec& ball);
ParamVector amp_inner_ascent(const MlpSpec& spec, std::span<const double> theta, const Batch& batch,
                             const InnerAscentSpec& inner, const BallSpec& ball);

// Same ascent run from every start in `starts` (each projected first); returns
// the final perturbation with the highest objective value, first start wins ties.
ParamVector amp_inner_ascent_multistart(const Objective& objective, std::span<const double> theta,
                                        const InnerAscentSpec& inner, const BallSpec& ball,
                                        std::span<const ParamVector> starts);

// Uniform draw from the epsilon-ball: Gaussian direction, radius eps * u^(1/dim).
ParamVector rmp_sample(std::size_t dim, const BallSpec& ball, Rng& rng);

// x + radius * sign(grad_x l(x, y; theta)), sign(0) = 0.
RealVec fgsm_attack(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                    std::size_t label, double radius);

// Iterated sign steps from the clean x, clipped to the L-inf ball after each step.
RealVec pgd_attack(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                   std::size_t label, const AttackSpec& attack);

RealVec run_attack(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                   std::size_t label, const AttackSpec& attack);

// Every row of the batch replaced by its attacked version.
Batch attack_batch(const MlpSpec& spec, std::span<const double> theta, const Batch& batch,
                   const AttackSpec& attack);

}  // namespace amp
