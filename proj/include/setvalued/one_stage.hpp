#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "setvalued/data.hpp"
#include "setvalued/distributions.hpp"
#include "setvalued/rng.hpp"

namespace setvalued {

struct CenterProbability {
  Subset center;
  double probability = 0.0;
  /// Spread across independent repetitions (MCMC chains); 0 otherwise.
  double stddev = 0.0;
};

struct JointSample {
  Subset center;
  double dispersion = 0.0;
};

struct PosteriorDiagnostics {
  std::string method;
  std::uint64_t seed = 0;
  // brute force
  std::uint64_t centers_enumerated = 0;
  double retained_mass = 0.0;
  int prior_draws = 0;
  int cdf_grid = 0;
  // mcmc
  std::uint64_t chain_length = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thin = 0;
  int chains = 0;
  double dispersion_acceptance = 0.0;
  double center_acceptance = 0.0;
  std::vector<std::string> warnings;
};

/// Approximate posterior of (A, u) for the pooled model.
struct PosteriorOneStage {
  /// Most probable first. Brute force: exact-normalized probabilities of the
  /// retained centres (sums to <= 1). MCMC: visit frequencies averaged over
  /// chains.
  std::vector<CenterProbability> center_support;
  std::vector<JointSample> samples;
  double log_evidence = std::numeric_limits<double>::quiet_NaN();
  PosteriorDiagnostics diagnostics;

  /// Posterior mode of A (ties broken towards the smaller bitmask).
  Subset mode() const;
};

/// sum_i ln P_{A,u}(X_i).
double log_likelihood(const Dataset& data, const HammingModel& model);

struct BruteForceConfig {
  double epsilon = 0.01;
  int prior_draws = 1000;
  /// One prior draw per CDF stratum instead of independent draws.
  bool stratified = true;
  int cdf_grid = 10'000;
  int posterior_samples = 1000;
  std::uint64_t seed = 1;
  std::uint64_t max_centers = kDefaultEnumerationBudget;
  int threads = 1;
};

/// Enumerates every centre, estimates P(X | A) from common prior draws of
/// u, truncates, then draws (A, u) pairs with u obtained by grid inversion
/// of its conditional CDF.
PosteriorOneStage brute_force_posterior(const Dataset& data, const ModelSpec& spec, const BruteForceConfig& config);

/// ln of (1 / #P_n) sum_A P^(X | A); 0 for empty data.
double estimate_evidence(const Dataset& data, const ModelSpec& spec, const BruteForceConfig& config);

struct McmcConfig {
  double sigma2 = 0.5;
  std::uint64_t iterations = 1'000'000;
  std::uint64_t burn_in = 100'000;
  std::uint64_t thin = 46;
  int chains = 30;
  std::uint64_t seed = 1;
  /// Replacement candidates weighted by (#{i : o in X_i} + 1); flat otherwise.
  bool weighted_proposal = true;
  int threads = 1;
};

/// One Metropolis-within-Gibbs chain over (A, u): a logit-scale Gaussian
/// random walk on u and a single-swap move on A.
class CenterDispersionChain {
 public:
  CenterDispersionChain(const Dataset& data, const ModelSpec& spec, double sigma2, bool weighted_proposal,
                        Subset initial_center, double initial_dispersion);

  bool step_dispersion(CounterRng& rng);
  bool step_center(CounterRng& rng);

  Subset center() const noexcept { return center_; }
  double dispersion() const noexcept { return dispersion_; }
  /// ln P(X | A, u) at the current state.
  double log_likelihood() const noexcept { return log_lik_; }

 private:
  double histogram_log_likelihood(std::span<const int> histogram, std::span<const double> log_point) const;
  void refresh_log_point();

  const ModelSpec& spec_;
  int universe_;
  int n_;
  double step_sd_;
  std::vector<double> weights_;               // proposal weight per item
  std::vector<std::vector<int>> containing_;  // observations containing each item
  std::vector<Subset> subsets_;
  std::vector<int> deviations_;               // k_i per observation
  std::vector<int> histogram_;                // #{i : k_i = k}
  std::vector<double> log_point_;             // ln e_u(k) - ln count(k)
  std::vector<double> scratch_;
  std::vector<int> scratch_histogram_;
  Subset center_;
  double dispersion_;
  double log_lik_ = 0.0;
};

PosteriorOneStage mcmc_posterior(const Dataset& data, const ModelSpec& spec, const McmcConfig& config);

enum class Signal { None, Alert, Action };
std::string to_string(Signal s);

struct SignalThresholds {
  double alert = 0.05;
  double action = 0.005;
  void validate() const;
  Signal classify(double p_value) const noexcept;
};

struct ObservationSignal {
  std::string id;
  double p_value = 1.0;
  int deviations = 0;  // #(X_i \ mode)
  Signal signal = Signal::None;
};

struct SignalReport {
  Subset mode;
  std::vector<ObservationSignal> rows;
};

/// Posterior mean over samples of sum_{k >= #(X_i \ A)} e_u(k) per observation.
SignalReport posterior_p_values(const Dataset& data, const ModelSpec& spec, const PosteriorOneStage& posterior,
                                const SignalThresholds& thresholds = {});

}  // namespace setvalued
