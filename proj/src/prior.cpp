#include "setvalued/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>

#include "setvalued/errors.hpp"

namespace setvalued {
namespace {

constexpr double kSeriesRadius = 1e-4;

// (atanh(t) - t) / t^3 = sum_j t^(2j) / (2j + 3), summed to convergence.
double atanh_remainder_series(double t) {
  const double t2 = t * t;
  double term = 1.0;
  double sum = 0.0;
  for (int j = 0; j < 200; ++j) {
    const double add = term / (2.0 * j + 3.0);
    sum += add;
    if (add < 1e-17 * sum) break;
    term *= t2;
  }
  return sum;
}

}  // namespace

double prior_density_u_series(double u) {
  // g(1 + d) = sum_j (-1)^j 2 (j + 1) / ((j + 2)(j + 3)) d^j
  const double d = u - 1.0;
  double sum = 0.0;
  double power = 1.0;
  for (int j = 0; j < 12; ++j) {
    const double coeff = 2.0 * (j + 1) / ((j + 2.0) * (j + 3.0));
    sum += (j % 2 == 0 ? coeff : -coeff) * power;
    power *= d;
  }
  return sum;
}

double prior_density_u(double u) {
  if (!(u > 0.0 && u <= 1.0)) throw InputError("prior_density_u: u must lie in (0, 1]");
  if (std::abs(u - 1.0) < kSeriesRadius) return prior_density_u_series(u);
  // With t = (u - 1)/(u + 1): ln u = 2 atanh(t) and u - 1 = t (u + 1), so the
  // closed form equals 4 (atanh(t) - t) / (t^3 (u + 1)^2) without the
  // catastrophic cancellation of the printed numerator near u = 1.
  const double t = (u - 1.0) / (u + 1.0);
  // Far from 1, atanh(t) is taken as ln(u) / 2: t rounds to -1 for tiny u.
  const double remainder = std::abs(t) < 0.5 ? atanh_remainder_series(t) : (0.5 * std::log(u) - t) / (t * t * t);
  return 4.0 * remainder / ((u + 1.0) * (u + 1.0));
}

double prior_cdf_u(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double d = u - 1.0;
  if (std::abs(d) < 1e-3) {
    // (u ln u - d) / d^2 = sum_{m >= 2} (-1)^m d^(m - 2) / (m (m - 1))
    double sum = 0.0;
    double power = 1.0;
    for (int m = 2; m < 10; ++m) {
      sum += (m % 2 == 0 ? 1.0 : -1.0) * power / (m * (m - 1.0));
      power *= d;
    }
    return 2.0 - 2.0 * sum;
  }
  return 2.0 + 2.0 * (d - u * std::log(u)) / (d * d);
}

DispersionPrior::DispersionPrior(Kind kind, double a, double b, double upper)
    : kind_(kind), a_(a), b_(b), upper_(upper) {
  if (kind_ == Kind::Beta) {
    if (!(a > 0.0 && b > 0.0)) throw InputError("beta prior: shape parameters must be positive");
    if (!(upper > 0.0 && upper <= 1.0)) throw InputError("beta prior: upper bound must lie in (0, 1]");
    upper_cdf_ = upper >= 1.0 ? 1.0 : boost::math::ibeta(a, b, upper);
    log_norm_ = std::log(boost::math::beta(a, b)) + std::log(upper_cdf_);
  }
}

DispersionPrior DispersionPrior::triangle() { return DispersionPrior(Kind::Triangle, 0.0, 0.0, 1.0); }

DispersionPrior DispersionPrior::beta(double a, double b, double upper) {
  return DispersionPrior(Kind::Beta, a, b, upper);
}

DispersionPrior DispersionPrior::default_for(const DispersionFamily& family) {
  return family.kind() == FamilyKind::FisherNCH ? triangle() : beta(1.0, 1.0, family.upper());
}

double DispersionPrior::log_density(double u) const {
  if (kind_ == Kind::Triangle) {
    if (!(u > 0.0 && u <= 1.0)) return -std::numeric_limits<double>::infinity();
    return std::log(prior_density_u(u));
  }
  if (u < 0.0 || u > upper_) return -std::numeric_limits<double>::infinity();
  double value = -log_norm_;
  if (a_ != 1.0) value += (a_ - 1.0) * std::log(u);
  if (b_ != 1.0) value += (b_ - 1.0) * std::log1p(-u);
  return value;
}

double DispersionPrior::density(double u) const { return std::exp(log_density(u)); }

double DispersionPrior::sample(CounterRng& rng) const {
  if (kind_ == Kind::Triangle) {
    // Uniform on {p2 <= p1}: order two independent uniforms.
    const double x = rng.uniform_open();
    const double y = rng.uniform_open();
    return dispersion_from_pair({std::max(x, y), std::min(x, y)});
  }
  const double p = rng.uniform_open() * upper_cdf_;
  if (a_ == 1.0 && b_ == 1.0) return p;
  return boost::math::ibeta_inv(a_, b_, p);
}

double DispersionPrior::cdf(double u) const {
  if (kind_ == Kind::Triangle) return prior_cdf_u(u);
  if (u <= 0.0) return 0.0;
  if (u >= upper_) return 1.0;
  return boost::math::ibeta(a_, b_, u) / upper_cdf_;
}

double DispersionPrior::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("prior quantile: probability must lie in [0, 1]");
  if (kind_ == Kind::Beta) {
    if (a_ == 1.0 && b_ == 1.0) return p * upper_cdf_;
    return std::min(upper_, boost::math::ibeta_inv(a_, b_, p * upper_cdf_));
  }
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  // Bisection on ln u, then Newton polish; G is smooth and increasing.
  double lo = -745.0;
  double hi = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (prior_cdf_u(std::exp(mid)) < p ? lo : hi) = mid;
  }
  double u = std::exp(0.5 * (lo + hi));
  for (int i = 0; i < 3; ++i) {
    const double step = (prior_cdf_u(u) - p) / prior_density_u(u);
    const double next = u - step;
    if (!(next > 0.0 && next <= 1.0)) break;
    u = next;
  }
  return u;
}

std::vector<double> DispersionPrior::stratified_draws(int count, CounterRng& rng) const {
  if (count < 1) throw InputError("the number of prior draws must be positive");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    const double p = (j + rng.uniform_open()) / count;
    out[static_cast<std::size_t>(j)] = quantile(std::min(p, 1.0));
  }
  return out;
}

std::string DispersionPrior::describe() const {
  if (kind_ == Kind::Triangle) return "triangle-pushforward";
  std::ostringstream os;
  os << "beta(" << a_ << "," << b_ << ") on [0," << upper_ << "]";
  return os.str();
}

QuadratureRule prior_quadrature(const DispersionPrior& prior, int points) {
  const auto base = gauss_legendre(points);
  QuadratureRule rule;
  rule.nodes.reserve(base.nodes.size());
  rule.weights.reserve(base.nodes.size());
  const double width = prior.upper() - prior.lower();
  for (std::size_t i = 0; i < base.nodes.size(); ++i) {
    const double t = 0.5 * (base.nodes[i] + 1.0);  // (0, 1)
    const double t2 = t * t;
    const double u = prior.lower() + width * t2 * t2;
    const double jacobian = 0.5 * 4.0 * width * t2 * t;  // dt/dx * du/dt
    rule.nodes.push_back(u);
    rule.weights.push_back(base.weights[i] * jacobian * prior.density(u));
  }
  return rule;
}

}  // namespace setvalued
