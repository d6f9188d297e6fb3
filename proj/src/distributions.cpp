#include "setvalued/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "setvalued/errors.hpp"
#include "setvalued/numeric.hpp"

namespace setvalued {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Relative tolerance under which two pmf values count as equal when judging
// monotonicity; floating evaluation of mathematically equal values differs
// by a few ulps.
constexpr double kTieTolerance = 1e-12;

}  // namespace

std::string to_string(FamilyKind kind) {
  return kind == FamilyKind::FisherNCH ? "fisher" : "binomial";
}

FamilyKind parse_family(const std::string& name) {
  if (name == "fisher" || name == "fisher-nch") return FamilyKind::FisherNCH;
  if (name == "binomial") return FamilyKind::Binomial;
  throw InputError("unknown dispersion family '" + name + "' (expected fisher or binomial)");
}

DispersionFamily::DispersionFamily(FamilyKind kind, int n, int N, double upper)
    : kind_(kind), n_(n), N_(N), upper_(upper) {
  if (n < 1 || N < 1) throw InputError("dispersion family needs n >= 1 and N >= 1");
  if (n + N > kMaxUniverse) throw InputError("dispersion family: n + N exceeds 64");
  log_counts_.resize(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) log_counts_[static_cast<std::size_t>(k)] = log_binomial(n, k) + log_binomial(N, k);
}

DispersionFamily DispersionFamily::fisher(int n, int N) { return DispersionFamily(FamilyKind::FisherNCH, n, N, 1.0); }

DispersionFamily DispersionFamily::binomial(int n, int N, std::optional<double> u_max) {
  const double upper = u_max.value_or(static_cast<double>(N) / (N + n));
  if (!(upper > 0.0 && upper <= 1.0)) throw InputError("binomial family: u_max must lie in (0, 1]");
  if (n > N) throw InputError("binomial family needs n <= N: at most N items can leave the centre");
  return DispersionFamily(FamilyKind::Binomial, n, N, upper);
}

DispersionFamily DispersionFamily::make(FamilyKind kind, int n, int N) {
  return kind == FamilyKind::FisherNCH ? fisher(n, N) : binomial(n, N);
}

void DispersionFamily::log_pmf(double u, std::span<double> out) const {
  if (!(u >= 0.0)) throw InputError("dispersion parameter must be non-negative");
  const std::size_t size = static_cast<std::size_t>(n_) + 1;
  if (out.size() != size) throw InternalError("log_pmf: output span has the wrong size");
  if (kind_ == FamilyKind::FisherNCH) {
    if (u == 0.0) {
      std::fill(out.begin(), out.end(), kNegInf);
      out[0] = 0.0;
      return;
    }
    const double lu = std::log(u);
    for (int k = 0; k <= n_; ++k)
      out[static_cast<std::size_t>(k)] = log_binomial(N_, k) + log_binomial(n_, n_ - k) + k * lu;
    const double norm = log_sum_exp(out);
    for (auto& v : out) v -= norm;
    return;
  }
  if (u > 1.0) throw InputError("binomial dispersion must lie in [0, 1]");
  if (u == 0.0 || u == 1.0) {
    std::fill(out.begin(), out.end(), kNegInf);
    out[u == 0.0 ? 0 : size - 1] = 0.0;
    return;
  }
  const double lu = std::log(u);
  const double l1u = std::log1p(-u);
  for (int k = 0; k <= n_; ++k) out[static_cast<std::size_t>(k)] = log_binomial(n_, k) + k * lu + (n_ - k) * l1u;
}

std::vector<double> DispersionFamily::log_pmf(double u) const {
  std::vector<double> out(static_cast<std::size_t>(n_) + 1);
  log_pmf(u, out);
  return out;
}

std::vector<double> DispersionFamily::pmf(double u) const {
  auto out = log_pmf(u);
  for (auto& v : out) v = std::exp(v);
  return out;
}

std::vector<double> fisher_nch_pmf(double u, int n, int N) { return DispersionFamily::fisher(n, N).pmf(u); }

std::vector<double> binomial_pmf(double u, int n) {
  // N only enters the domain bound, which is irrelevant here.
  return DispersionFamily::binomial(n, std::max(n, 1), 1.0).pmf(u);
}

double hamming_log_pmf(const HammingModel& model, Subset x) {
  const auto& f = model.family;
  if (x.size() != f.n() || model.center.size() != f.n())
    throw InputError("hamming_log_pmf: subset cardinality does not match the family");
  const int k = overlap_outside(x, model.center);
  const auto log_e = f.log_pmf(model.dispersion);
  return log_e[static_cast<std::size_t>(k)] - f.log_counts()[static_cast<std::size_t>(k)];
}

std::string to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::Decreasing: return "decreasing";
    case Monotonicity::NonIncreasing: return "non-increasing";
    case Monotonicity::Neither: return "neither";
  }
  return "neither";
}

Monotonicity check_hamming_monotone(const DispersionFamily& family, double u) {
  const auto log_e = family.log_pmf(u);
  const int reach = std::min(family.n(), family.N());
  bool strict = true;
  for (int k = 0; k < reach; ++k) {
    const double a = log_e[static_cast<std::size_t>(k)] - family.log_counts()[static_cast<std::size_t>(k)];
    const double b = log_e[static_cast<std::size_t>(k + 1)] - family.log_counts()[static_cast<std::size_t>(k + 1)];
    if (a == kNegInf) {
      if (b != kNegInf) return Monotonicity::Neither;
      strict = false;
      continue;
    }
    const double tol = kTieTolerance * std::max(1.0, std::abs(a));
    if (b > a + tol) return Monotonicity::Neither;
    if (b >= a - tol) strict = false;
  }
  return strict ? Monotonicity::Decreasing : Monotonicity::NonIncreasing;
}

Monotonicity check_hamming_monotone(const HammingModel& model) {
  return check_hamming_monotone(model.family, model.dispersion);
}

double dispersion_from_pair(BernoulliPair pair) {
  return pair.p2 * (1.0 - pair.p1) / (pair.p1 * (1.0 - pair.p2));
}

BernoulliPair pair_for_dispersion(double u, double p1) {
  if (!(u > 0.0 && u <= 1.0) || !(p1 > 0.0 && p1 < 1.0))
    throw InputError("pair_for_dispersion: need u in (0,1] and p1 in (0,1)");
  // odds(p2) = u * odds(p1)
  const double odds = u * p1 / (1.0 - p1);
  return {p1, odds / (1.0 + odds)};
}

Subset sample_fisher_subset(int universe, Subset center, BernoulliPair pair, CounterRng& rng,
                            std::uint64_t max_iterations) {
  const int n = center.size();
  if (pair.p1 < 0 || pair.p1 > 1 || pair.p2 < 0 || pair.p2 > 1)
    throw InputError("sample_fisher_subset: probabilities must lie in [0, 1]");
  if (n > 0 && pair.p1 == 0.0 && pair.p2 == 0.0)
    throw NumericalError("sample_fisher_subset: p1 = p2 = 0 can never produce a subset of size n");
  for (std::uint64_t it = 0; it < max_iterations; ++it) {
    std::uint64_t mask = 0;
    for (int item = 0; item < universe; ++item) {
      const double p = center.contains(item) ? pair.p1 : pair.p2;
      if (rng.bernoulli(p)) mask |= std::uint64_t{1} << item;
    }
    if (std::popcount(mask) == n) return Subset(mask);
  }
  throw NumericalError("sample_fisher_subset: rejection sampler exceeded " + std::to_string(max_iterations) +
                       " iterations");
}

Subset sample_without_replacement(Subset pool, int count, CounterRng& rng) {
  auto items = pool.indices();
  if (count > static_cast<int>(items.size())) throw InternalError("sample_without_replacement: pool exhausted");
  std::uint64_t mask = 0;
  // Partial Fisher-Yates.
  for (int i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(items.size() - static_cast<std::size_t>(i));
    std::swap(items[static_cast<std::size_t>(i)], items[j]);
    mask |= std::uint64_t{1} << items[static_cast<std::size_t>(i)];
  }
  return Subset(mask);
}

Subset sample_binomial_subset(int universe, Subset center, double u, CounterRng& rng) {
  if (!(u >= 0.0 && u <= 1.0)) throw InputError("sample_binomial_subset: u must lie in [0, 1]");
  const std::uint64_t universe_mask = universe == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << universe) - 1;
  Subset inside = center;
  Subset outside = center.complement_in(universe_mask);
  Subset result;
  for (int round = 0; round < center.size(); ++round) {
    Subset& pool = rng.bernoulli(u) ? outside : inside;
    if (pool.empty()) throw InternalError("sample_binomial_subset: drew from an exhausted pool");
    const auto pick = sample_without_replacement(pool, 1, rng);
    pool = pool.without(pick);
    result = result | pick;
  }
  return result;
}

Subset sample_hamming_subset(const HammingModel& model, CounterRng& rng) {
  const auto& f = model.family;
  const auto e = f.pmf(model.dispersion);
  double x = rng.uniform();
  int k = 0;
  for (; k < f.n(); ++k) {
    x -= e[static_cast<std::size_t>(k)];
    if (x < 0) break;
  }
  k = std::min(k, f.N());
  const std::uint64_t universe_mask =
      f.universe() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << f.universe()) - 1;
  const Subset leave = sample_without_replacement(model.center, k, rng);
  const Subset enter = sample_without_replacement(model.center.complement_in(universe_mask), k, rng);
  return model.center.without(leave) | enter;
}

double dispersion_mean(const DispersionFamily& family, double u) {
  if (!family.in_domain(u)) throw InputError("dispersion_mean: u outside the family domain");
  const auto e = family.pmf(u);
  double mean = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) mean += static_cast<double>(k) * e[k];
  return mean;
}

BinomialModeReport binomial_mode_property(const DispersionFamily& family, double u) {
  if (family.kind() != FamilyKind::Binomial) throw InputError("binomial_mode_property: binomial family required");
  const int n = family.n();
  const int N = family.N();
  BinomialModeReport report;
  report.unique_mode_premise = u < static_cast<double>(N) / (N + n);
  report.decreasing_premise = u <= 0.5 && 2 * n <= N;
  const auto log_e = family.log_pmf(u);
  const double at_center = log_e[0];
  report.unique_mode = true;
  for (int k = 1; k <= std::min(n, N); ++k) {
    const double other = log_e[static_cast<std::size_t>(k)] - family.log_counts()[static_cast<std::size_t>(k)];
    if (!(other < at_center - kTieTolerance * std::max(1.0, std::abs(at_center)))) report.unique_mode = false;
  }
  report.verdict = check_hamming_monotone(family, u);
  return report;
}

}  // namespace setvalued
