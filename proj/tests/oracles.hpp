#pragma once

// Independent reference computations for the unit and acceptance tests.
// Everything here goes through enumeration and adaptive quadrature rather
// than the library's estimators.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "setvalued/data.hpp"
#include "setvalued/distributions.hpp"
#include "setvalued/one_stage.hpp"
#include "setvalued/prior.hpp"
#include "setvalued/subsets.hpp"
#include "setvalued/two_stage.hpp"

namespace oracle {

using namespace setvalued;

inline Subset items(std::initializer_list<int> one_based) {
  std::vector<int> v;
  for (int i : one_based) v.push_back(i - 1);
  return Subset::from_indices(v);
}

/// The twelve responses of the toy example (M = 10, n = 3).
inline Dataset table1() {
  Dataset d;
  d.ground = GroundSet(10);
  d.n = 3;
  const std::vector<Subset> rows{items({1, 2, 3}), items({1, 2, 3}), items({1, 2, 3}), items({1, 2, 7}),
                                 items({1, 2, 3}), items({1, 2, 3}), items({1, 2, 4}), items({1, 2, 3}),
                                 items({2, 3, 8}), items({1, 2, 3}), items({1, 2, 3}), items({5, 6, 8})};
  for (std::size_t i = 0; i < rows.size(); ++i) d.observations.push_back({"X" + std::to_string(i + 1), rows[i]});
  return d;
}

/// p responses drawn exactly from P_{A,u} (Fisher family).
inline Dataset synthetic_pooled(std::uint64_t seed, double u, int M, int n, int p, Subset center) {
  Dataset d;
  d.ground = GroundSet(M);
  d.n = n;
  const auto family = DispersionFamily::fisher(n, M - n);
  const HammingModel model{center, u, family};
  CounterRng rng(seed, 7);
  for (int i = 0; i < p; ++i) d.observations.push_back({"o" + std::to_string(i + 1), sample_hamming_subset(model, rng)});
  return d;
}

/// ln of ∫ exp(f(u)) prior(u) du by tanh-sinh, with f shifted by its
/// maximum on a coarse grid so the integrand stays representable.
template <class F>
double log_integral(F log_f, const DispersionPrior& prior) {
  const double hi = prior.upper();
  double shift = -1e300;
  for (int g = 1; g <= 2000; ++g) shift = std::max(shift, log_f(hi * g / 2000.0));
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double value = std::exp(log_f(v) - shift) * prior.density(v);
    return std::isfinite(value) ? value : 0.0;
  };
  return std::log(ts.integrate(f, 0.0, hi)) + shift;
}

/// ln P(X | A) = ln ∫ prod_i P_{A,u}(X_i) prior(u) du for every centre.
inline std::map<std::uint64_t, double> exact_log_marginals(const Dataset& data, const ModelSpec& spec) {
  std::map<std::uint64_t, double> out;
  const int n = data.n;
  for (Subset c : enumerate_subsets(data.universe(), n)) {
    std::vector<int> h(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& o : data.observations) ++h[static_cast<std::size_t>(o.subset.without(c).size())];
    auto lf = [&](double v) {
      const auto le = spec.family.log_pmf(v);
      double s = 0.0;
      for (int k = 0; k <= n; ++k)
        if (h[static_cast<std::size_t>(k)])
          s += h[static_cast<std::size_t>(k)] *
               (le[static_cast<std::size_t>(k)] - spec.family.log_counts()[static_cast<std::size_t>(k)]);
      return s;
    };
    out[c.mask()] = log_integral(lf, spec.prior);
  }
  return out;
}

/// Posterior over A under the uniform prior on centres.
inline std::map<std::uint64_t, double> normalize_log(const std::map<std::uint64_t, double>& logs) {
  double mx = -1e300;
  for (const auto& [k, v] : logs) mx = std::max(mx, v);
  std::map<std::uint64_t, double> out;
  double z = 0.0;
  for (const auto& [k, v] : logs) z += out[k] = std::exp(v - mx);
  for (auto& [k, v] : out) v /= z;
  return out;
}

inline std::map<std::uint64_t, double> exact_posterior(const Dataset& data, const ModelSpec& spec) {
  return normalize_log(exact_log_marginals(data, spec));
}

/// ln (1 / #P_n) sum_A P(X | A).
inline double exact_log_evidence(const Dataset& data, const ModelSpec& spec) {
  const auto logs = exact_log_marginals(data, spec);
  double mx = -1e300;
  for (const auto& [k, v] : logs) mx = std::max(mx, v);
  double s = 0.0;
  for (const auto& [k, v] : logs) s += std::exp(v - mx);
  return mx + std::log(s / static_cast<double>(logs.size()));
}

inline double total_variation(const std::map<std::uint64_t, double>& exact,
                              const std::vector<CenterProbability>& approx) {
  std::map<std::uint64_t, double> p;
  for (const auto& c : approx) p[c.center.mask()] = c.probability;
  double tv = 0.0;
  for (const auto& [k, v] : exact) tv += std::abs(v - p[k]);
  for (const auto& [k, v] : p)
    if (!exact.count(k)) tv += v;
  return tv / 2.0;
}

inline double total_variation(const std::vector<CenterProbability>& a, const std::vector<CenterProbability>& b) {
  std::map<std::uint64_t, double> p;
  for (const auto& c : a) p[c.center.mask()] = c.probability;
  return total_variation(p, b);
}

inline double probability_of(const std::vector<CenterProbability>& support, Subset s) {
  for (const auto& c : support)
    if (c.center == s) return c.probability;
  return 0.0;
}

/// ∫ prod_j P_{B,v}(X_j) lab_prior(v) dv for one laboratory centre B.
inline double lab_log_integral(const std::vector<Subset>& xs, Subset b, const ModelSpec& lab) {
  const int n = lab.family.n();
  std::vector<int> h(static_cast<std::size_t>(n) + 1, 0);
  for (Subset x : xs) ++h[static_cast<std::size_t>(x.without(b).size())];
  auto lf = [&](double v) {
    const auto le = lab.family.log_pmf(v);
    double s = 0.0;
    for (int k = 0; k <= n; ++k)
      if (h[static_cast<std::size_t>(k)])
        s += h[static_cast<std::size_t>(k)] *
             (le[static_cast<std::size_t>(k)] - lab.family.log_counts()[static_cast<std::size_t>(k)]);
    return s;
  };
  return log_integral(lf, lab.prior);
}

/// Lab integrals for every candidate centre, indexed by rank.
inline std::vector<double> lab_log_integrals(const Lab& lab, int universe, const ModelSpec& spec) {
  std::vector<Subset> xs;
  for (const auto& o : lab.observations) xs.push_back(o.subset);
  std::vector<double> out;
  for (Subset b : enumerate_subsets(universe, spec.family.n())) out.push_back(lab_log_integral(xs, b, spec));
  return out;
}

/// ln P(X_i | A, u) = ln sum_B P_{A,u}(B) ∫ prod_j P_{B,v}(X_ij) g(v) dv, given lab_log_integrals.
inline double lab_log_marginal(const std::vector<double>& lab_logs, int universe, Subset a, double u,
                               const ModelSpec& consensus) {
  const HammingModel m{a, u, consensus.family};
  double mx = -1e300;
  std::vector<double> terms;
  std::size_t r = 0;
  for (Subset b : enumerate_subsets(universe, consensus.family.n())) {
    terms.push_back(hamming_log_pmf(m, b) + lab_logs[r++]);
    mx = std::max(mx, terms.back());
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

/// ln P(X̲̲ | A) for every centre by enumeration and nested quadrature.
inline std::map<std::uint64_t, double> exact_hierarchical_log_marginals(const GroupedDataset& data,
                                                                        const HierarchicalSpec& spec) {
  const int M = data.universe();
  std::vector<std::vector<double>> labs;
  for (const auto& lab : data.labs) labs.push_back(lab_log_integrals(lab, M, spec.lab));
  std::map<std::uint64_t, double> out;
  for (Subset a : enumerate_subsets(M, data.n)) {
    auto lf = [&](double u) {
      double s = 0.0;
      for (const auto& l : labs) s += lab_log_marginal(l, M, a, u, spec.consensus);
      return s;
    };
    out[a.mask()] = log_integral(lf, spec.consensus.prior);
  }
  return out;
}

}  // namespace oracle
