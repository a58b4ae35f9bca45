#include "amp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "amp/perturb.hpp"

namespace amp {

GaussianSurface::GaussianSurface(RealVec mu, RealMat kappa, double A, double C)
    : mu_(std::move(mu)), kappa_(std::move(kappa)), A_(A), C_(C) {
  if (kappa_.rows() != mu_.size()) throw std::invalid_argument("GaussianSurface: dimension mismatch");
  if (!(A_ > 0.0)) throw std::invalid_argument("GaussianSurface: A must be > 0");
  eig_ = spd_eigendecomp(kappa_);
}

double GaussianSurface::mahalanobis_sq(std::span<const double> theta) const {
  if (theta.size() != dim()) throw std::invalid_argument("layout mismatch");
  const RealVec d = sub(theta, mu_);
  double q = 0.0;
  for (std::size_t k = 0; k < dim(); ++k) {
    double proj = 0.0;
    for (std::size_t r = 0; r < dim(); ++r) proj += eig_.vectors(r, k) * d[r];
    q += proj * proj / eig_.values[k];
  }
  return q;
}

double gamma_eval(const GaussianSurface& s, std::span<const double> theta) {
  return s.C() - s.A() * std::exp(-0.5 * s.mahalanobis_sq(theta));
}

RealVec gamma_gradient(const GaussianSurface& s, std::span<const double> theta) {
  const std::size_t n = s.dim();
  const RealVec d = sub(theta, s.mu());
  const auto& eig = s.eigen();
  // kappa^{-1} d = Q diag(1/lambda) Q^T d
  RealVec kinv_d(n, 0.0);
  double q = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double proj = 0.0;
    for (std::size_t r = 0; r < n; ++r) proj += eig.vectors(r, k) * d[r];
    q += proj * proj / eig.values[k];
    const double c = proj / eig.values[k];
    for (std::size_t r = 0; r < n; ++r) kinv_d[r] += c * eig.vectors(r, k);
  }
  const double w = s.A() * std::exp(-0.5 * q);
  for (double& v : kinv_d) v *= w;
  return kinv_d;
}

double gamma_amp_star_closed(const GaussianSurface& s, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  return s.C() - s.A() * std::exp(-eps * eps / (2.0 * s.sigma_sq()));
}

double gamma_amp_numeric(const GaussianSurface& s, std::span<const double> theta, double eps,
                         std::uint64_t seed) {
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  if (s.dim() > 16) throw std::invalid_argument("gamma_amp_numeric: dimension must be <= 16");
  if (eps == 0.0) return gamma_eval(s, theta);
  const std::size_t n = s.dim();
  const BallSpec ball{eps};

  std::vector<RealVec> starts;
  Rng rng(seed, "ball-restarts");
  for (int k = 0; k < 16; ++k) {
    RealVec d = rng_standard_normal(rng, n);
    const double norm = l2_norm(d);
    starts.push_back(scaled(norm > 0.0 ? eps / norm : 0.0, d));
  }
  for (std::size_t k = 0; k < std::min<std::size_t>(n, 8); ++k) {
    RealVec q(n);
    for (std::size_t r = 0; r < n; ++r) q[r] = eps * s.eigen().vectors(r, k);
    starts.push_back(q);
    starts.push_back(scaled(-1.0, q));
  }

  const double step = eps / 100.0;
  double best = gamma_eval(s, theta);
  RealVec probe(n);
  for (RealVec& delta : starts) {
    for (int it = 0; it < 500; ++it) {
      for (std::size_t i = 0; i < n; ++i) probe[i] = theta[i] + delta[i];
      const RealVec g = gamma_gradient(s, probe);
      const double gn = l2_norm(g);
      if (gn == 0.0) break;
      axpy(step / gn, g, delta);
      delta = project_to_ball(delta, ball);
    }
    for (std::size_t i = 0; i < n; ++i) probe[i] = theta[i] + delta[i];
    best = std::max(best, gamma_eval(s, probe));
  }
  return best;
}

bool cor1_swap_condition(double A1, double A2, double C1, double C2, double sigma1_sq,
                         double sigma2_sq, double eps) {
  const double rhs = A1 * std::exp(-eps * eps / (2.0 * sigma1_sq)) -
                     A2 * std::exp(-eps * eps / (2.0 * sigma2_sq));
  const double mid = C1 - C2;
  return A1 - A2 > mid && mid > rhs;
}

void RegionParams::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0, 1)");
  if (!(r > 0.0)) throw std::invalid_argument("r must be > 0");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  if (!(sigma1_sq > 0.0)) throw std::invalid_argument("sigma1_sq must be > 0");
}

double region_beta_floor(double eps, double sigma1_sq) {
  return std::exp(-eps * eps / (2.0 * sigma1_sq));
}

double region_r_threshold(const RegionParams& p) {
  return 1.0 / (1.0 + (2.0 * p.sigma1_sq / (p.eps * p.eps)) * std::log(p.beta));
}

bool operational_region(const RegionParams& p) {
  p.validate();
  if (!(p.beta > region_beta_floor(p.eps, p.sigma1_sq))) return false;
  return p.r > region_r_threshold(p);
}

DoubleWell::DoubleWell(GaussianSurface s1, GaussianSurface s2, double eps)
    : s1_(std::move(s1)), s2_(std::move(s2)) {
  if (s1_.dim() != s2_.dim()) throw std::invalid_argument("DoubleWell: dimension mismatch");
  const double widest = std::sqrt(std::max(s1_.eigen().values.back(), s2_.eigen().values.back()));
  if (l2_norm(sub(s1_.mu(), s2_.mu())) < 10.0 * (eps + widest))
    throw std::invalid_argument("DoubleWell: wells are not separated enough");
}

double DoubleWell::value(std::span<const double> theta) const {
  return std::min(gamma_eval(s1_, theta), gamma_eval(s2_, theta));
}

RealVec DoubleWell::gradient(std::span<const double> theta) const {
  return gamma_eval(s1_, theta) <= gamma_eval(s2_, theta) ? gamma_gradient(s1_, theta)
                                                          : gamma_gradient(s2_, theta);
}

DoubleWell make_double_well(const RegionParams& p) {
  p.validate();
  const double s2 = p.r * p.sigma1_sq;
  const double sep = 10.0 * (p.eps + std::sqrt(std::max(p.sigma1_sq, s2))) * 1.01;
  GaussianSurface w1({0.0, 0.0}, RealMat::diagonal(RealVec{p.sigma1_sq, p.sigma1_sq}), 1.0, 0.0);
  GaussianSurface w2({sep, 0.0}, RealMat::diagonal(RealVec{s2, s2}), p.beta, 0.0);
  return DoubleWell(std::move(w1), std::move(w2), p.eps);
}

RegionReport verify_region_on_double_well(double eps, double sigma1_sq, const RegionGrid& grid,
                                          double boundary_band) {
  if (grid.beta_steps < 1 || grid.r_steps < 1) throw std::invalid_argument("empty region grid");
  auto lin = [](double lo, double hi, std::size_t n, std::size_t i) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  RegionReport report;
  report.points.reserve(grid.beta_steps * grid.r_steps);
  const double floor = region_beta_floor(eps, sigma1_sq);
  for (std::size_t i = 0; i < grid.beta_steps; ++i) {
    for (std::size_t j = 0; j < grid.r_steps; ++j) {
      RegionPoint pt;
      pt.beta = lin(grid.beta_lo, grid.beta_hi, grid.beta_steps, i);
      pt.r = lin(grid.r_lo, grid.r_hi, grid.r_steps, j);
      const RegionParams p{pt.beta, pt.r, eps, sigma1_sq};
      pt.in_region = operational_region(p);

      const DoubleWell dw = make_double_well(p);
      const double g1 = gamma_amp_star_closed(dw.first(), eps);
      const double g2 = gamma_amp_star_closed(dw.second(), eps);
      pt.amp_prefers_well2 = g2 < g1;

      pt.boundary = std::abs(g1 - g2) <= boundary_band || std::abs(pt.beta - floor) <= boundary_band;
      if (eps > 0.0 && pt.beta > floor)
        pt.boundary = pt.boundary || std::abs(pt.r - region_r_threshold(p)) <= boundary_band;

      if (pt.boundary) {
        ++report.excluded;
      } else if (pt.in_region != pt.amp_prefers_well2) {
        pt.mismatch = true;
        ++report.mismatches;
      }
      report.points.push_back(pt);
    }
  }
  return report;
}

GaussianSurface random_surface(Rng& rng, std::size_t dim, double max_condition) {
  if (dim < 1 || dim > 16) throw std::invalid_argument("random_surface: dim must be in [1, 16]");
  // Gram-Schmidt on a Gaussian matrix gives a random orthonormal basis.
  RealMat q(dim, dim);
  for (std::size_t c = 0; c < dim; ++c) {
    RealVec v = rng_standard_normal(rng, dim);
    for (std::size_t p = 0; p < c; ++p) {
      double d = 0.0;
      for (std::size_t r = 0; r < dim; ++r) d += q(r, p) * v[r];
      for (std::size_t r = 0; r < dim; ++r) v[r] -= d * q(r, p);
    }
    const double norm = l2_norm(v);
    for (std::size_t r = 0; r < dim; ++r) q(r, c) = v[r] / norm;
  }
  const double sigma_min = std::exp(std::log(0.05) + rng.uniform() * std::log(20.0));
  RealVec lambda(dim);
  for (std::size_t k = 0; k < dim; ++k)
    lambda[k] = k == 0 ? sigma_min : sigma_min * std::exp(rng.uniform() * std::log(max_condition));
  RealMat kappa(dim, dim);
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += q(a, k) * lambda[k] * q(b, k);
      kappa(a, b) = s;
      kappa(b, a) = s;
    }
  RealVec mu = rng_standard_normal(rng, dim);
  const double A = 0.5 + 1.5 * rng.uniform();
  const double C = 2.0 * rng.uniform() - 1.0;
  return GaussianSurface(std::move(mu), std::move(kappa), A, C);
}

std::vector<Theorem1Row> theorem1_check(std::size_t count, std::uint64_t seed) {
  Rng rng(seed, "theorem1");
  std::vector<Theorem1Row> rows;
  rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Theorem1Row row;
    row.index = i;
    row.dim = 1 + rng.below(5);
    const GaussianSurface s = random_surface(rng, row.dim, 100.0);
    row.eps = 0.01 + (2.0 - 0.01) * rng.uniform();
    row.sigma_sq = s.sigma_sq();
    row.closed = gamma_amp_star_closed(s, row.eps);
    row.numeric = gamma_amp_numeric(s, s.mu(), row.eps, seed + i);
    row.rel_error = std::abs(row.closed - row.numeric) / std::abs(s.A());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace amp
