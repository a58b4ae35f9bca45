#include "amp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace amp {

RealMat::RealMat(std::size_t rows, std::size_t cols, RealVec data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("RealMat: data size does not match shape");
  }
}

RealMat RealMat::identity(std::size_t n) {
  RealMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

RealMat RealMat::diagonal(std::span<const double> d) {
  RealMat m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

RealMat RealMat::transposed() const {
  RealMat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

RealMat RealMat::operator*(const RealMat& rhs) const {
  if (cols_ != rhs.rows_) throw std::invalid_argument("RealMat: shape mismatch");
  RealMat out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
    }
  return out;
}

RealVec RealMat::operator*(std::span<const double> v) const {
  if (cols_ != v.size()) throw std::invalid_argument("RealMat: shape mismatch");
  RealVec out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = dot(row(i), v);
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double l2_norm(std::span<const double> v) {
  // Scaled accumulation keeps huge or tiny entries from overflowing.
  double scale = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite input");
    scale = std::max(scale, std::abs(x));
  }
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (double x : v) {
    const double t = x / scale;
    sum += t * t;
  }
  return scale * std::sqrt(sum);
}

double linf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

RealVec add(std::span<const double> a, std::span<const double> b) {
  return add_scaled(a, 1.0, b);
}

RealVec sub(std::span<const double> a, std::span<const double> b) {
  return add_scaled(a, -1.0, b);
}

RealVec scaled(double a, std::span<const double> v) {
  RealVec out(v.begin(), v.end());
  for (double& x : out) x *= a;
  return out;
}

RealVec add_scaled(std::span<const double> a, double s, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  RealVec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return out;
}

EigenDecomposition spd_eigendecomp(const RealMat& m) {
  const std::size_t n = m.rows();
  if (n == 0 || n != m.cols() || n > 16) throw std::invalid_argument("not SPD");
  if (!all_finite(m.data())) throw std::invalid_argument("not SPD");
  double max_abs = 0.0;
  for (double x : m.data()) max_abs = std::max(max_abs, std::abs(x));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * std::max(1.0, max_abs))
        throw std::invalid_argument("not SPD");

  RealMat a = m;
  RealMat v = RealMat::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * std::max(1.0, max_abs * max_abs)) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigenDecomposition out{RealVec(n), RealMat(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    if (!(out.values[k] > 0.0)) throw std::invalid_argument("not SPD");
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t Rng::next_u64() {
  const std::uint64_t key = mix64(seed_ + kGolden) ^ mix64(stream_ ^ 0xd1b54a32d192ed03ULL);
  return mix64(mix64(key + (++counter_) * kGolden));
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

Rng Rng::derive(std::string_view label) const { return derive(stream_id(label)); }

Rng Rng::derive(std::uint64_t label) const {
  return Rng(seed_, mix64(stream_ ^ mix64(label + kGolden)));
}

RealVec rng_standard_normal(Rng& rng, std::size_t n) {
  RealVec out(n);
  for (double& x : out) x = rng.normal();
  return out;
}

}  // namespace amp
