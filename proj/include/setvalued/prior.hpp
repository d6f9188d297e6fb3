#pragma once

#include <string>
#include <vector>

#include "setvalued/distributions.hpp"
#include "setvalued/numeric.hpp"
#include "setvalued/rng.hpp"

namespace setvalued {

/// Density on (0, 1] of u = p2 (1 - p1) / (p1 (1 - p2)) when (p1, p2) is
/// uniform on the triangle {0 < p2 <= p1 < 1}:
///
///   g(u) = (4 (1 - u) + 2 (u + 1) ln u) / (u - 1)^3,   g(1) = 1/3.
///
/// Throws InputError outside (0, 1].
double prior_density_u(double u);

/// Same density through its Taylor expansion in (u - 1); accurate for
/// |u - 1| up to about 1e-2. Exposed for continuity checks.
double prior_density_u_series(double u);

/// Distribution function of g: G(u) = 2 + 2 (u - 1 - u ln u) / (u - 1)^2.
double prior_cdf_u(double u);

/// Prior on a dispersion parameter, supported on [lower, upper].
class DispersionPrior {
 public:
  enum class Kind { Triangle, Beta };

  /// The triangle pushforward g on (0, 1].
  static DispersionPrior triangle();
  /// Beta(a, b) restricted to [0, upper] and renormalized.
  static DispersionPrior beta(double a, double b, double upper = 1.0);
  /// Family default: triangle for Fisher, flat Beta(1,1) on [0, u_max] for
  /// the binomial family.
  static DispersionPrior default_for(const DispersionFamily& family);

  Kind kind() const noexcept { return kind_; }
  double lower() const noexcept { return 0.0; }
  double upper() const noexcept { return upper_; }
  double beta_a() const noexcept { return a_; }
  double beta_b() const noexcept { return b_; }

  double density(double u) const;
  double log_density(double u) const;
  double cdf(double u) const;
  double quantile(double p) const;
  double sample(CounterRng& rng) const;
  /// count draws, one per stratum [j / count, (j + 1) / count) of the prior
  /// CDF. Each draw is marginally prior-distributed.
  std::vector<double> stratified_draws(int count, CounterRng& rng) const;

  std::string describe() const;

 private:
  DispersionPrior(Kind kind, double a, double b, double upper);

  Kind kind_;
  double a_;
  double b_;
  double upper_;
  double log_norm_ = 0.0;  // beta: ln(B(a,b) * I_upper(a,b))
  double upper_cdf_ = 1.0;
};

/// Quadrature nodes u_m with weights w_m such that
///   sum_m w_m f(u_m) ≈ ∫ f(u) prior(u) du.
/// Built from Gauss-Legendre in t with u = lower + (upper - lower) t^4,
/// which smooths the logarithmic singularity of g at 0.
QuadratureRule prior_quadrature(const DispersionPrior& prior, int points);

}  // namespace setvalued
