#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "amp/analysis.hpp"
#include "amp/datasets.hpp"
#include "amp/theory.hpp"
#include "amp/trainer.hpp"

namespace amp {

// Bad config file, bad flags or an unusable output directory. Exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  std::string kind = "spiral";  // spiral | blobs | csv
  std::size_t n_per_class = 400;
  std::size_t num_classes = 3;
  double noise = 0.04;
  RealMat centers;  // blobs
  double sd = 0.5;  // blobs
  std::filesystem::path path;       // csv; split with test_fraction unless test_path is set
  std::filesystem::path test_path;  // csv, optional
  double test_fraction = 0.5;
  bool standardize = false;
  std::uint64_t seed = 0;
};

struct ScanConfig {
  double alpha_lo = -1.0;
  double alpha_hi = 1.0;
  std::size_t points = 41;
  std::size_t grid_points = 21;
  std::uint64_t direction_seed = 0;
};

struct TheoryConfig {
  double eps = 1.0;
  double sigma1_sq = 0.5;
  RegionGrid grid;
  std::size_t theorem1_count = 100;
  std::uint64_t seed = 0;
};

struct SweepConfig {
  RealVec epsilons;               // empty: default_sweep_grid()
  std::vector<std::uint64_t> seeds;  // empty: {train.seed}
};

struct CalibrateConfig {
  std::size_t bins = 15;
  std::string split = "test";
  std::filesystem::path predictions;  // optional CSV `confidence,correct`, bypasses the model
};

struct AttackEvalConfig {
  std::vector<AttackKind> kinds{AttackKind::FGSM, AttackKind::PGD};
  RealVec radii{0.0, 0.05, 0.1, 0.2};
  std::optional<double> step;  // PGD; default radius / 4
  std::size_t steps = 10;
  std::string split = "test";
};

struct CliConfig {
  DatasetConfig dataset;
  std::vector<std::size_t> hidden{64, 64};
  TrainConfig train;
  ScanConfig scan;
  TheoryConfig theory;
  SweepConfig sweep;
  CalibrateConfig calibrate;
  AttackEvalConfig attack;
  std::filesystem::path output;
  std::filesystem::path model;  // saved model.json for scan / calibrate / attack
};

// Throws ConfigError on malformed JSON, wrong types, out-of-range values or
// unknown keys. Relative paths are resolved against `base_dir`.
CliConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
CliConfig load_config(const std::filesystem::path& path);

SplitDataset build_dataset(const DatasetConfig& cfg);
MlpSpec build_spec(const CliConfig& cfg, const SplitDataset& data);

struct SavedModel {
  MlpSpec spec;
  ParamVector theta;
};
void save_model(const SavedModel& model, const std::filesystem::path& path);
SavedModel load_model(const std::filesystem::path& path);

// Shortest round-trip decimal form, independent of locale.
std::string format_double(double v);

// Entry point of the ampctl tool. Returns the process exit code:
// 0 success, 1 config or input error, 2 training diverged.
int cli_main(int argc, char** argv);

}  // namespace amp
