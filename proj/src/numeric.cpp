#include "setvalued/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "setvalued/errors.hpp"

namespace setvalued {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

void LogSumAccumulator::add(double log_value) noexcept {
  if (log_value == -std::numeric_limits<double>::infinity()) return;
  if (log_value <= max_) {
    sum_ += std::exp(log_value - max_);
  } else {
    sum_ = sum_ * std::exp(max_ - log_value) + 1.0;
    max_ = log_value;
  }
}

double LogSumAccumulator::value() const noexcept {
  return sum_ == 0.0 ? -std::numeric_limits<double>::infinity() : max_ + std::log(sum_);
}

QuadratureRule gauss_legendre(int points) {
  if (points < 1) throw InputError("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(points));
  rule.weights.resize(static_cast<std::size_t>(points));
  const int half = (points + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    double derivative = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= points; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (points == 1) p0 = 1.0;
      derivative = points * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / derivative;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(points - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(points - 1 - i)] = w;
  }
  return rule;
}

GridDistribution::GridDistribution(double lower, double upper, std::span<const double> log_density)
    : lower_(lower), upper_(upper) {
  if (log_density.empty() || !(upper > lower)) throw InputError("GridDistribution: empty grid");
  width_ = (upper - lower) / static_cast<double>(log_density.size());
  const double top = *std::max_element(log_density.begin(), log_density.end());
  if (!std::isfinite(top)) throw NumericalError("conditional density vanishes on the whole grid");
  cdf_.resize(log_density.size());
  double running = 0.0;
  for (std::size_t i = 0; i < log_density.size(); ++i) {
    running += std::exp(log_density[i] - top);
    cdf_[i] = running;
  }
  log_mass_ = top + std::log(running * width_);
  for (auto& c : cdf_) c /= running;
  cdf_.back() = 1.0;
}

double GridDistribution::quantile(double p) const {
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), p);
  const auto cell = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  const double left = cell == 0 ? 0.0 : cdf_[cell - 1];
  const double mass = cdf_[cell] - left;
  const double frac = mass > 0.0 ? std::clamp((p - left) / mass, 0.0, 1.0) : 0.5;
  return lower_ + (static_cast<double>(cell) + frac) * width_;
}

double GridDistribution::sample(CounterRng& rng) const { return quantile(rng.uniform_open()); }

double GridDistribution::cdf(double u) const {
  if (u <= lower_) return 0.0;
  if (u >= upper_) return 1.0;
  const double pos = (u - lower_) / width_;
  const auto cell = std::min(static_cast<std::size_t>(pos), cdf_.size() - 1);
  const double left = cell == 0 ? 0.0 : cdf_[cell - 1];
  return left + (cdf_[cell] - left) * (pos - static_cast<double>(cell));
}

std::vector<double> grid_midpoints(double lower, double upper, int cells) {
  std::vector<double> out(static_cast<std::size_t>(cells));
  const double width = (upper - lower) / cells;
  for (int i = 0; i < cells; ++i) out[static_cast<std::size_t>(i)] = lower + (i + 0.5) * width;
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double chi_square_sf(double statistic, double df) {
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, statistic / 2.0);
}

ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> probabilities,
                                double min_expected) {
  if (observed.size() != probabilities.size()) throw InputError("chi_square_test: size mismatch");
  const double total = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));
  // Pool low-expectation bins left to right.
  std::vector<double> exp_bins;
  std::vector<double> obs_bins;
  double e_acc = 0.0;
  double o_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    e_acc += probabilities[i] * total;
    o_acc += static_cast<double>(observed[i]);
    if (e_acc >= min_expected) {
      exp_bins.push_back(e_acc);
      obs_bins.push_back(o_acc);
      e_acc = o_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp_bins.empty()) {
      exp_bins.push_back(e_acc);
      obs_bins.push_back(o_acc);
    } else {
      exp_bins.back() += e_acc;
      obs_bins.back() += o_acc;
    }
  }
  ChiSquareResult result;
  for (std::size_t i = 0; i < exp_bins.size(); ++i) {
    const double d = obs_bins[i] - exp_bins[i];
    result.statistic += d * d / exp_bins[i];
  }
  result.dof = static_cast<double>(exp_bins.size()) - 1.0;
  result.p_value = result.dof > 0 ? chi_square_sf(result.statistic, result.dof) : 1.0;
  return result;
}

}  // namespace setvalued
