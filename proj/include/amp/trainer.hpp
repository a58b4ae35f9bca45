#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amp/datasets.hpp"
#include "amp/nncore.hpp"
#include "amp/perturb.hpp"

namespace amp {

enum class TrainMode { ERM, AMP, RMP, ADV, GNP };

const char* to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

// Multiply the learning rate by `factor` from `epoch` (0-based) onwards.
struct LrStep {
  std::size_t epoch = 0;
  double factor = 0.1;
};

struct TrainConfig {
  TrainMode mode = TrainMode::ERM;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double outer_lr = 0.1;
  std::vector<LrStep> lr_decay;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  InnerAscentSpec inner;  // AMP
  BallSpec ball;          // AMP, RMP
  AttackSpec attack;      // ADV
  double gnp_zeta = 1e-4;
  double gnp_epsilon = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  double lr_at(std::size_t epoch) const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_err = 0.0;
  double test_loss = 0.0;
  double test_err = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  MlpSpec spec;
  TrainConfig config;
  std::vector<EpochRecord> history;
  ParamVector theta;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(std::size_t epoch)
      : std::runtime_error("diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct Evaluation {
  double mean_loss = 0.0;
  double error_rate = 0.0;
};

// Clean (unperturbed) mean cross-entropy and top-1 error.
Evaluation evaluate(const MlpSpec& spec, std::span<const double> theta, const Dataset& ds);

// Mini-batch SGD with momentum and coupled weight decay. Perturbations
// (AMP, RMP, ADV) only shape the gradient; the returned theta is unperturbed.
RunRecord train(const MlpSpec& spec, const SplitDataset& data, const TrainConfig& cfg);

// Central-difference Hessian-vector product:
// [grad(theta + h v/|v|) - grad(theta - h v/|v|)] * |v| / (2h).
RealVec hessian_vector_product(const Objective& objective, std::span<const double> theta,
                               std::span<const double> v, double h = 1e-4);

// Omega = zeta |g|^2 when |zeta g| <= eps, and eps |g| otherwise.
double gnp_omega(double grad_norm, double gnp_zeta, double gnp_epsilon);

// Gradient of J + Omega.
ParamVector gnp_grad(const Objective& objective, std::span<const double> theta, double gnp_zeta,
                     double gnp_epsilon);
ParamVector gnp_grad(const MlpSpec& spec, std::span<const double> theta, const Batch& batch,
                     double gnp_zeta, double gnp_epsilon);

// The scalar piecewise-linear toy, trained one example per step.
struct ToyTrainConfig {
  TrainMode mode = TrainMode::AMP;  // ERM or AMP
  std::size_t steps = 2000;
  double lr = 0.01;
  std::vector<LrStep> lr_decay;  // keyed by step
  InnerAscentSpec inner{0.05, 1};
  BallSpec ball{0.3};
  double theta0 = 1.0;
  // Also start the inner ascent from both ends of the interval [-eps, eps]
  // and keep the best result. Without it, the ascent from 0 follows the local
  // slope and never sees the far side of the kink.
  bool boundary_starts = true;
};

struct ToyRunResult {
  double theta = 0.0;
  double final_lr = 0.0;
  RealVec trajectory;  // theta after every step
};

ToyRunResult train_toy(const PiecewiseToyLoss& toy, const ToyTrainConfig& cfg);

}  // namespace amp
