#pragma once

// Internal helpers shared by the pooled and hierarchical brute-force schemes.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "setvalued/data.hpp"
#include "setvalued/numeric.hpp"
#include "setvalued/rng.hpp"

namespace setvalued::detail {

/// RNG stream ids; every stochastic stage owns one.
enum Stream : std::uint64_t {
  kPriorStream = 0,
  kSamplingStream = 1,
  kLabStreamBase = 100,
  kChainStreamBase = 1000,
};

/// Runs fn(begin, end) over [0, total) split into `threads` contiguous
/// blocks. Results must be written to disjoint slots by the callee.
void parallel_for(std::uint64_t total, int threads, const std::function<void(std::uint64_t, std::uint64_t)>& fn);

/// Common prior draws of u shared by every centre. Stratified draws take one
/// point per equal-probability stratum of the prior CDF.
std::vector<double> draw_prior(const DispersionPrior& prior, int count, bool stratified, CounterRng& rng);

/// ln e_u(k) - ln #{X at distance k}: the per-observation log-probability
/// for every k, evaluated at each u in `us` (row-major, n + 1 per row).
std::vector<double> log_point_table(const DispersionFamily& family, std::span<const double> us);

/// Midpoint grid over the prior support with ln prior and ln e_u cached.
struct DispersionGrid {
  double lower = 0.0;
  double upper = 1.0;
  std::vector<double> u;
  std::vector<double> log_prior;
  std::vector<double> log_pmf;  // cells x (n + 1)
  std::size_t width = 0;

  static DispersionGrid build(const ModelSpec& spec, int cells);
  std::span<const double> log_pmf_row(std::size_t cell) const {
    return {log_pmf.data() + cell * width, width};
  }
  /// Conditional of u given a deviation histogram (ln prior + sum_k h_k ln e_u(k)).
  GridDistribution conditional(std::span<const int> histogram) const;
};

/// Brute-force centre posterior: normalization, evidence and truncation.
struct CenterPosterior {
  std::vector<double> log_marginal;  // per rank: ln P^(X | A)
  double log_total = 0.0;            // ln sum_A P^(X | A)
  double log_evidence = 0.0;         // ln (1 / #P_n) sum_A P^(X | A)
  std::vector<std::uint64_t> retained;  // ranks, most probable first (ties: smaller mask)
  std::vector<double> retained_probability;
  double retained_mass = 0.0;
};

/// Keeps A with #P_n * P^(X | A) > epsilon * evidence.
CenterPosterior summarize_centers(std::vector<double> log_marginal, double epsilon);

/// Categorical draw over retained centres, renormalized.
class RetainedSampler {
 public:
  explicit RetainedSampler(const CenterPosterior& posterior);
  std::size_t draw(CounterRng& rng) const;

 private:
  std::vector<double> cumulative_;
};

}  // namespace setvalued::detail
