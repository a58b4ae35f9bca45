#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "amp/datasets.hpp"
#include "amp/trainer.hpp"
#include "doctest.h"

using namespace amp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "amp_test_datasets";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string error_of(const fs::path& p) {
  try {
    load_csv(p);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("noise-free spiral points lie on the parametric arms") {
  const Dataset ds = gen_spiral(3, 2, 0.0, 1);
  REQUIRE(ds.size() == 6);
  std::size_t row = 0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i, ++row) {
      const double t = i / 2.0;
      const double rho = 0.1 + 0.9 * t;
      const double phi = 4.0 * std::numbers::pi * t + 2.0 * std::numbers::pi * c / 2.0;
      CHECK(ds.labels[row] == c);
      CHECK(ds.inputs(row, 0) == doctest::Approx(rho * std::cos(phi)).epsilon(1e-14).scale(1e-14));
      CHECK(ds.inputs(row, 1) == doctest::Approx(rho * std::sin(phi)).epsilon(1e-14).scale(1e-14));
    }
}

TEST_CASE("spiral class counts and inner radius") {
  const Dataset ds = gen_spiral(50, 4, 0.0, 3);
  CHECK(ds.num_classes == 4);
  std::vector<int> count(4, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ++count[ds.labels[i]];
    if (i % 50 == 0) CHECK(std::hypot(ds.inputs(i, 0), ds.inputs(i, 1)) == doctest::Approx(0.1));
  }
  for (int c : count) CHECK(c == 50);
}

TEST_CASE("spiral is a pure function of its seed") {
  const Dataset a = gen_spiral(20, 3, 0.05, 9);
  CHECK(a.inputs == gen_spiral(20, 3, 0.05, 9).inputs);
  CHECK(a.inputs != gen_spiral(20, 3, 0.05, 10).inputs);
}

TEST_CASE("noise-free spiral class is recoverable from the angle formula") {
  const std::size_t n = 40, k = 3;
  const Dataset ds = gen_spiral(n, k, 0.0, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    // invert the radius for t, then pick the arm whose angle matches
    const double t = (std::hypot(ds.inputs(i, 0), ds.inputs(i, 1)) - 0.1) / 0.9;
    std::size_t best = 0;
    double best_err = INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      const double phi = 4.0 * std::numbers::pi * t + 2.0 * std::numbers::pi * c / k;
      const double err = std::hypot(ds.inputs(i, 0) - (0.1 + 0.9 * t) * std::cos(phi),
                                    ds.inputs(i, 1) - (0.1 + 0.9 * t) * std::sin(phi));
      if (err < best_err) best_err = err, best = c;
    }
    CHECK(best == ds.labels[i]);
  }
}

TEST_CASE("spiral with small noise has zero leave-one-out 1-NN error") {
  const Dataset ds = gen_spiral(100, 3, 0.002, 4);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double best = INFINITY;
    std::size_t lab = 0;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (j == i) continue;
      const double d = std::hypot(ds.inputs(i, 0) - ds.inputs(j, 0), ds.inputs(i, 1) - ds.inputs(j, 1));
      if (d < best) best = d, lab = ds.labels[j];
    }
    wrong += lab != ds.labels[i];
  }
  CHECK(wrong == 0);
}

TEST_CASE("blobs with zero spread sit on their centers") {
  const RealMat centers(2, 3, RealVec{1, 2, 3, -4, 5, -6});
  const Dataset ds = gen_blobs(7, centers, 0.0, 1);
  REQUIRE(ds.size() == 14);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(ds.inputs(i, k) == centers(ds.labels[i], k));
  std::vector<int> count(2, 0);
  for (std::size_t y : ds.labels) ++count[y];
  CHECK(count[0] == 7);
  CHECK(count[1] == 7);
}

TEST_CASE("far-apart blobs are linearly separable") {
  const RealMat centers(2, 2, RealVec{-10, 0, 10, 0});
  const SplitDataset data = split(gen_blobs(100, centers, 1.0, 2), 0.5, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.outer_lr = 0.01;
  const RunRecord rec = train(MlpSpec{{2, 2}}, data, cfg);
  CHECK(rec.history.back().test_err == 0.0);
}

TEST_CASE("stratified split sizes") {
  const RealMat centers(2, 1, RealVec{0, 1});
  const Dataset ds = gen_blobs(10, centers, 0.1, 0);
  const SplitDataset s = split(ds, 0.5, 1);
  CHECK(s.test.size() == 10);
  CHECK(s.train.size() == 10);
  CHECK(std::count(s.test.labels.begin(), s.test.labels.end(), 0u) == 5);
  CHECK(std::count(s.test.labels.begin(), s.test.labels.end(), 1u) == 5);
}

TEST_CASE("split is deterministic and partitions the rows") {
  const Dataset ds = gen_spiral(30, 3, 0.1, 5);
  const SplitDataset a = split(ds, 0.3, 8);
  const SplitDataset b = split(ds, 0.3, 8);
  CHECK(a.train.inputs == b.train.inputs);
  CHECK(a.test.labels == b.test.labels);
  CHECK(a.train.inputs != split(ds, 0.3, 9).train.inputs);

  std::multiset<std::vector<double>> orig, parts;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto r = ds.inputs.row(i);
    std::vector<double> v(r.begin(), r.end());
    v.push_back(static_cast<double>(ds.labels[i]));
    orig.insert(v);
  }
  for (const Dataset* d : {&a.train, &a.test})
    for (std::size_t i = 0; i < d->size(); ++i) {
      auto r = d->inputs.row(i);
      std::vector<double> v(r.begin(), r.end());
      v.push_back(static_cast<double>(d->labels[i]));
      parts.insert(v);
    }
  CHECK(orig == parts);
  CHECK(a.train.size() + a.test.size() == ds.size());
}

TEST_CASE("split refuses singleton classes and bad fractions") {
  Dataset ds;
  ds.inputs = RealMat(3, 1, RealVec{0, 1, 2});
  ds.labels = {0, 0, 1};
  ds.num_classes = 2;
  CHECK_THROWS_WITH(split(ds, 0.5, 0), "cannot stratify");
  ds.labels = {0, 0, 0};
  CHECK_THROWS_AS(split(ds, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 1.0, 0), std::invalid_argument);
}

TEST_CASE("csv round trip is exact") {
  const Dataset ds = gen_spiral(25, 3, 0.123, 77);
  const fs::path p = temp_file("roundtrip.csv");
  save_csv(ds, p);
  const Dataset back = load_csv(p);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.labels == ds.labels);
  CHECK(back.num_classes == 3);
}

TEST_CASE("csv validation errors") {
  const fs::path p = temp_file("bad.csv");
  write_text(p, "label\n0\n");
  CHECK(error_of(p).find("expected at least one feature") != std::string::npos);

  write_text(p, "x0,x1,label\n1,2,0\n3,NaN,1\n");
  const std::string nan_err = error_of(p);
  CHECK(nan_err.find(":3:") != std::string::npos);
  CHECK(nan_err.find("NaN") != std::string::npos);

  write_text(p, "a,b,label\n1,2,0\n");
  CHECK(error_of(p).find("unknown header") != std::string::npos);

  write_text(p, "x0,label\n1,2\n1,2,3\n");
  CHECK(error_of(p).find(":3:") != std::string::npos);

  write_text(p, "x0,label\n1,-1\n");
  CHECK(error_of(p).find(":2:") != std::string::npos);

  CHECK(error_of(temp_file("does_not_exist.csv")).find("does_not_exist.csv") != std::string::npos);
}

TEST_CASE("csv accepts CRLF line endings") {
  const fs::path p = temp_file("crlf.csv");
  write_text(p, "x0,x1,label\r\n0.5,-1,1\r\n2,3,0\r\n");
  const Dataset ds = load_csv(p);
  CHECK(ds.size() == 2);
  CHECK(ds.inputs(0, 1) == -1.0);
  CHECK(ds.labels[0] == 1);
}

TEST_CASE("standardizer uses train statistics") {
  Dataset train;
  train.inputs = RealMat(4, 2, RealVec{1, 5, 3, 5, 5, 5, 7, 5});
  train.labels = {0, 1, 0, 1};
  train.num_classes = 2;
  const Standardizer st = fit_standardizer(train);
  CHECK(st.mean[0] == 4.0);
  CHECK(st.sd[1] == 1.0);  // constant feature
  Dataset t = train;
  st.apply(t);
  double m = 0.0, v = 0.0;
  for (std::size_t i = 0; i < 4; ++i) m += t.inputs(i, 0);
  for (std::size_t i = 0; i < 4; ++i) v += t.inputs(i, 0) * t.inputs(i, 0);
  CHECK(m == doctest::Approx(0.0));
  CHECK(v / 4.0 == doctest::Approx(1.0));
  CHECK(t.inputs(0, 1) == 0.0);
}
