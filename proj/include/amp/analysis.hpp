#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "amp/datasets.hpp"
#include "amp/nncore.hpp"
#include "amp/perturb.hpp"
#include "amp/trainer.hpp"

namespace amp {

// ---------------------------------------------------------------------------
// Loss landscape scans
// ---------------------------------------------------------------------------

// Gaussian direction whose every "filter" (one output neuron's weight row plus
// its bias) is rescaled to the L2 norm of the matching filter of theta. Zero
// filters of theta give zero filters of the direction.
ParamVector filter_normalized_direction(const MlpSpec& spec, std::span<const double> theta, Rng rng);

struct LandscapeScan1D {
  ParamVector direction;
  RealVec alphas;
  RealVec losses_train;
  RealVec losses_test;
};

struct LandscapeScan2D {
  ParamVector dx;
  ParamVector dy;
  RealVec grid_x;
  RealVec grid_y;
  RealMat losses;  // |grid_x| x |grid_y|
};

// `count` evenly spaced points on [lo, hi].
RealVec linspace(double lo, double hi, std::size_t count);

// loss(theta + alpha_i * direction) for each alpha.
RealVec scan_1d(const Objective& loss, std::span<const double> theta, std::span<const double> direction,
                std::span<const double> alphas);
RealMat scan_2d(const Objective& loss, std::span<const double> theta, std::span<const double> dx,
                std::span<const double> dy, std::span<const double> grid_x, std::span<const double> grid_y);

LandscapeScan1D landscape_1d(const MlpSpec& spec, std::span<const double> theta, const SplitDataset& data,
                             ParamVector direction, RealVec alphas);
LandscapeScan2D landscape_2d(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                             ParamVector dx, ParamVector dy, RealVec grid_x, RealVec grid_y);

// ---------------------------------------------------------------------------
// Flatness
// ---------------------------------------------------------------------------

// Measurement ascent: 50 steps of length eps / 50.
InnerAscentSpec default_sharpness_ascent(double eps);

// Worst loss rise inside the eps-ball, max J(theta + delta) - J(theta).
// Projected ascent along the normalized gradient with step length
// inner.zeta, started from the gradient direction and from a random
// direction (both at radius eps); the better end point wins.
double sharpness(const Objective& loss, std::span<const double> theta, double eps,
                 const InnerAscentSpec& inner, std::uint64_t seed = 0);
double sharpness(const MlpSpec& spec, std::span<const double> theta, const Dataset& data, double eps,
                 const InnerAscentSpec& inner, std::uint64_t seed = 0);

// Power iteration on finite-difference Hessian-vector products; returns the
// Rayleigh quotient of the last iterate.
double hessian_top_eig(const Objective& loss, std::span<const double> theta, std::size_t iters,
                       std::uint64_t seed = 0);
double hessian_top_eig(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                       std::size_t iters, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double acc = 0.0;
  double conf = 0.0;
};

struct CalibrationReport {
  std::size_t num_bins = 0;
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
};

// Bins ((m-1)/M, m/M]; ECE = sum_m |B_m|/n |acc(B_m) - conf(B_m)|.
CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct,
                      std::size_t num_bins);

// Confidence is the winning softmax probability.
CalibrationReport calibrate_model(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                                  std::size_t num_bins);

// ---------------------------------------------------------------------------
// Perturbation-radius sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double train_risk = 0.0;
  double test_risk = 0.0;
};

// 0 followed by 13 log-spaced values on [0.005, 1].
RealVec default_sweep_grid();

// One AMP run per (seed, epsilon) with base_cfg otherwise unchanged. Rows are
// ordered seed-major, then by grid position. At most `jobs` runs in flight.
std::vector<SweepRow> epsilon_sweep(const MlpSpec& spec, const SplitDataset& data, const TrainConfig& base_cfg,
                                    std::span<const double> eps_grid, std::span<const std::uint64_t> seeds,
                                    std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Robustness
// ---------------------------------------------------------------------------

// Top-1 error on attacked copies of every input, theta fixed.
double robustness_eval(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                       const AttackSpec& attack);

// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace amp
