#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "amp/linalg.hpp"
#include "amp/nncore.hpp"

namespace amp {

struct Dataset {
  RealMat inputs;  // n x d
  Labels labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
  void validate() const;
  Batch as_batch() const { return {inputs, labels}; }
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct SplitDataset {
  Dataset train;
  Dataset test;
};

// Arm c, sample i, t = i / (n - 1): radius 0.1 + 0.9 t, angle 4 pi t + 2 pi c / K,
// plus N(0, noise_sd^2) from stream "spiral".
Dataset gen_spiral(std::size_t n_per_class, std::size_t num_classes, double noise_sd,
                   std::uint64_t seed);

// One Gaussian cloud per row of `centers`, stream "blobs".
Dataset gen_blobs(std::size_t n_per_class, const RealMat& centers, double sd, std::uint64_t seed);

// Stratified: round(test_fraction * count) of each class goes to test.
// Throws std::invalid_argument("cannot stratify") for a class with < 2 samples.
SplitDataset split(const Dataset& ds, double test_fraction, std::uint64_t seed);

// Header `x0,...,x{d-1},label`. Errors carry 1-based line numbers.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

struct Standardizer {
  RealVec mean;
  RealVec sd;
  void apply(Dataset& ds) const;
};

// Per-feature statistics of `train`; zero-variance features get sd = 1.
Standardizer fit_standardizer(const Dataset& train);

}  // namespace amp
