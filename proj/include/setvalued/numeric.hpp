#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "setvalued/rng.hpp"

namespace setvalued {

/// ln sum_i exp(x_i); -inf for an empty span or all -inf.
double log_sum_exp(std::span<const double> values);

/// Running log-sum-exp accumulator.
class LogSumAccumulator {
 public:
  void add(double log_value) noexcept;
  double value() const noexcept;

 private:
  double max_ = -1.0 / 0.0;
  double sum_ = 0.0;
};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
QuadratureRule gauss_legendre(int points);

/// Piecewise-constant density on a uniform cell grid over [lower, upper],
/// built from log-density values at the cell midpoints, sampled by exact
/// inversion of its CDF.
class GridDistribution {
 public:
  GridDistribution() = default;
  GridDistribution(double lower, double upper, std::span<const double> log_density);

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  std::size_t cells() const noexcept { return cdf_.size(); }
  /// Log of the (unnormalized) integral of the density.
  double log_mass() const noexcept { return log_mass_; }

  double sample(CounterRng& rng) const;
  double quantile(double p) const;
  double cdf(double u) const;

 private:
  double lower_ = 0.0;
  double upper_ = 1.0;
  double width_ = 1.0;
  double log_mass_ = 0.0;
  std::vector<double> cdf_;  // cumulative normalized mass at right edge of each cell
};

/// Midpoints of `cells` uniform cells over [lower, upper].
std::vector<double> grid_midpoints(double lower, double upper, int cells);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double p);
double mean(std::span<const double> values);

/// Upper tail P(chi2_df >= statistic).
double chi_square_sf(double statistic, double df);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Pearson goodness-of-fit of observed counts to expected probabilities.
/// Bins with expected count below `min_expected` are pooled into their
/// neighbour before testing.
ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> probabilities,
                                double min_expected = 5.0);

}  // namespace setvalued
