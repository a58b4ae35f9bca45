#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "amp/linalg.hpp"

namespace amp {

// Flat parameter vector. Per layer: weights row-major (fan_out x fan_in),
// then biases (fan_out). Perturbations share the layout.
using ParamVector = RealVec;
using Labels = std::vector<std::size_t>;

// Dense ReLU network producing raw logits: [d_in, h1, ..., d_out].
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;

  void validate() const;
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_params() const;
  std::size_t fan_in(std::size_t layer) const { return layer_sizes[layer]; }
  std::size_t fan_out(std::size_t layer) const { return layer_sizes[layer + 1]; }
  // Offset of layer `layer`'s weight block; its bias block follows the weights.
  std::size_t layer_offset(std::size_t layer) const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Batch {
  RealMat inputs;  // m x d_in
  Labels labels;   // m entries
};

struct XentResult {
  double mean_loss = 0.0;
  RealVec per_example;
};

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

// Glorot-uniform weights on [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases.
ParamVector init_params(const MlpSpec& spec, Rng rng);

// Throws std::invalid_argument("layout mismatch") on shape errors.
RealMat forward(const MlpSpec& spec, std::span<const double> theta, const RealMat& inputs);

XentResult xent_loss(const RealMat& logits, const Labels& labels);

// Mean cross-entropy over the batch and its exact gradient w.r.t. theta.
LossAndGrad loss_and_grad(const MlpSpec& spec, std::span<const double> theta, const Batch& batch);
ParamVector grad(const MlpSpec& spec, std::span<const double> theta, const Batch& batch);
double batch_loss(const MlpSpec& spec, std::span<const double> theta, const Batch& batch);

// Gradient of the single-example loss w.r.t. the input x at fixed theta.
RealVec input_grad(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                   std::size_t label);

// Argmax per row, lowest index wins ties.
Labels predict(const MlpSpec& spec, std::span<const double> theta, const RealMat& inputs);
std::size_t argmax(std::span<const double> v);

// Row-wise softmax, max-subtracted.
RealMat softmax(const RealMat& logits);

// Anything the perturbation machinery can ascend or descend on.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(std::span<const double> theta) const = 0;
  virtual RealVec gradient(std::span<const double> theta) const = 0;
  virtual LossAndGrad value_and_gradient(std::span<const double> theta) const {
    return {value(theta), gradient(theta)};
  }
};

// Mean cross-entropy of an MLP on a fixed batch. Holds references.
class BatchObjective final : public Objective {
 public:
  BatchObjective(const MlpSpec& spec, const Batch& batch) : spec_(spec), batch_(batch) {}
  double value(std::span<const double> theta) const override;
  RealVec gradient(std::span<const double> theta) const override;
  LossAndGrad value_and_gradient(std::span<const double> theta) const override;

 private:
  const MlpSpec& spec_;
  const Batch& batch_;
};

// l(x; theta) = g(theta * x) with g(z) = z for z >= 0 and -2z for z < 0.
struct PiecewiseToyLoss {
  double x = 1.0;
};

struct ToyLossGrad {
  double loss;
  double subgradient;
};

// Subgradient at the kink is the right derivative (+x).
ToyLossGrad toy_loss_and_grad(const PiecewiseToyLoss& toy, double theta);

class ToyObjective final : public Objective {
 public:
  explicit ToyObjective(PiecewiseToyLoss toy) : toy_(toy) {}
  double value(std::span<const double> theta) const override;
  RealVec gradient(std::span<const double> theta) const override;

 private:
  PiecewiseToyLoss toy_;
};

}  // namespace amp
