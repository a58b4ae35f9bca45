#pragma once

// Inverted-Gaussian model of a local minimum and the closed forms for its
// worst-case (ball-perturbed) minimum value, with numerical cross-checks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "amp/linalg.hpp"
#include "amp/nncore.hpp"

namespace amp {

// gamma(theta) = C - A exp(-(theta - mu)^T kappa^{-1} (theta - mu) / 2)
class GaussianSurface {
 public:
  // Throws std::invalid_argument if kappa is not SPD, dimensions disagree or A <= 0.
  GaussianSurface(RealVec mu, RealMat kappa, double A, double C);

  std::size_t dim() const { return mu_.size(); }
  const RealVec& mu() const { return mu_; }
  const RealMat& kappa() const { return kappa_; }
  double A() const { return A_; }
  double C() const { return C_; }
  const EigenDecomposition& eigen() const { return eig_; }
  // Smallest eigenvalue of kappa.
  double sigma_sq() const { return eig_.values.front(); }

  // (theta - mu)^T kappa^{-1} (theta - mu)
  double mahalanobis_sq(std::span<const double> theta) const;

 private:
  RealVec mu_;
  RealMat kappa_;
  double A_;
  double C_;
  EigenDecomposition eig_;
};

double gamma_eval(const GaussianSurface& s, std::span<const double> theta);
RealVec gamma_gradient(const GaussianSurface& s, std::span<const double> theta);

// min over theta of the ball-max loss: C - A exp(-eps^2 / (2 sigma^2)).
double gamma_amp_star_closed(const GaussianSurface& s, double eps);

// Projected gradient ascent of gamma(theta + delta) over |delta| <= eps:
// 16 random starts plus +-q_i eigenvector starts (up to 16), 500 steps of
// length eps/100 each. Returns the best value found.
double gamma_amp_numeric(const GaussianSurface& s, std::span<const double> theta, double eps,
                         std::uint64_t seed = 0);

class GaussianObjective final : public Objective {
 public:
  explicit GaussianObjective(const GaussianSurface& s) : s_(s) {}
  double value(std::span<const double> theta) const override { return gamma_eval(s_, theta); }
  RealVec gradient(std::span<const double> theta) const override { return gamma_gradient(s_, theta); }

 private:
  const GaussianSurface& s_;
};

// Holds iff gamma1* < gamma2* and gamma1_AMP* > gamma2_AMP*, i.e.
// A1 - A2 > C1 - C2 > A1 exp(-eps^2/2s1) - A2 exp(-eps^2/2s2).
bool cor1_swap_condition(double A1, double A2, double C1, double C2, double sigma1_sq,
                         double sigma2_sq, double eps);

// Equal offsets, A2 = beta A1, sigma2^2 = r sigma1^2.
struct RegionParams {
  double beta = 0.5;
  double r = 1.0;
  double eps = 1.0;
  double sigma1_sq = 0.5;
  void validate() const;
};

// beta > exp(-eps^2/2s1) and r > 1 / (1 + (2 s1 / eps^2) log beta)
bool operational_region(const RegionParams& p);

// Smallest beta for which some r is admissible, and the r threshold for beta.
double region_beta_floor(double eps, double sigma1_sq);
double region_r_threshold(const RegionParams& p);

// Two wells sharing C, far enough apart that each is the other's flat tail
// within 2 eps of its centre. value() = min(gamma1, gamma2).
class DoubleWell final : public Objective {
 public:
  DoubleWell(GaussianSurface s1, GaussianSurface s2, double eps);

  const GaussianSurface& first() const { return s1_; }
  const GaussianSurface& second() const { return s2_; }

  double value(std::span<const double> theta) const override;
  RealVec gradient(std::span<const double> theta) const override;

 private:
  GaussianSurface s1_;
  GaussianSurface s2_;
};

// Isotropic 2-D wells realising `p` with A1 = 1, C = 0 and separation factor 10.
DoubleWell make_double_well(const RegionParams& p);

struct RegionPoint {
  double beta = 0.0;
  double r = 0.0;
  bool in_region = false;
  bool amp_prefers_well2 = false;
  bool boundary = false;  // within the tolerance band, not scored
  bool mismatch = false;
};

struct RegionReport {
  std::vector<RegionPoint> points;
  std::size_t mismatches = 0;
  std::size_t excluded = 0;
};

struct RegionGrid {
  double beta_lo = 0.05;
  double beta_hi = 0.99;
  std::size_t beta_steps = 40;
  double r_lo = 0.1;
  double r_hi = 5.0;
  std::size_t r_steps = 40;
};

// For each (beta, r) grid point, builds the double well and compares the
// closed-form preference gamma2_AMP* < gamma1_AMP* with operational_region.
RegionReport verify_region_on_double_well(double eps, double sigma1_sq, const RegionGrid& grid,
                                          double boundary_band = 1e-9);

// Random SPD surface: random rotation, eigenvalues log-uniform with the
// given maximum condition number.
GaussianSurface random_surface(Rng& rng, std::size_t dim, double max_condition);

struct Theorem1Row {
  std::size_t index = 0;
  std::size_t dim = 0;
  double eps = 0.0;
  double sigma_sq = 0.0;
  double closed = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;  // |closed - numeric| / |A|
};

// Closed form vs numeric ball max at mu on `count` random surfaces
// (dim 1..5, condition <= 100, eps in [0.01, 2]).
std::vector<Theorem1Row> theorem1_check(std::size_t count, std::uint64_t seed);

}  // namespace amp
