#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace amp {

using RealVec = std::vector<double>;

// Row-major dense matrix.
class RealMat {
 public:
  RealMat() = default;
  RealMat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  RealMat(std::size_t rows, std::size_t cols, RealVec data);

  static RealMat identity(std::size_t n);
  static RealMat diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const RealVec& data() const { return data_; }
  RealVec& data() { return data_; }

  RealMat transposed() const;
  RealMat operator*(const RealMat& rhs) const;
  RealVec operator*(std::span<const double> v) const;

  friend bool operator==(const RealMat&, const RealMat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  RealVec data_;
};

// Throws std::invalid_argument("non-finite input") on NaN/Inf entries.
double l2_norm(std::span<const double> v);
double linf_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
RealVec add(std::span<const double> a, std::span<const double> b);
RealVec sub(std::span<const double> a, std::span<const double> b);
RealVec scaled(double a, std::span<const double> v);
// a + s * b
RealVec add_scaled(std::span<const double> a, double s, std::span<const double> b);

struct EigenDecomposition {
  RealVec values;   // ascending
  RealMat vectors;  // column i pairs with values[i]
};

// Cyclic Jacobi. Dimension must be <= 16 and the input symmetric positive
// definite, otherwise std::invalid_argument("not SPD").
EigenDecomposition spd_eigendecomp(const RealMat& m);

// 64-bit FNV-1a, used to turn stream names into stream ids.
std::uint64_t stream_id(std::string_view name);

// Counter-based generator: draw k of (seed, stream) is a pure function of
// (seed, stream, k), so copies are independent values.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  Rng(std::uint64_t seed, std::string_view stream) : Rng(seed, stream_id(stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  // Box-Muller, one normal per two uniforms.
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  // Child generator keyed by the parent's identity and a label.
  Rng derive(std::string_view label) const;
  Rng derive(std::uint64_t label) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

RealVec rng_standard_normal(Rng& rng, std::size_t n);

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace amp
