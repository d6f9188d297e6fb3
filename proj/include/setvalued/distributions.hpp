#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "setvalued/rng.hpp"
#include "setvalued/subsets.hpp"

namespace setvalued {

enum class FamilyKind { FisherNCH, Binomial };

std::string to_string(FamilyKind kind);
FamilyKind parse_family(const std::string& name);

/// The parametric map u -> e_u from a dispersion parameter to a pmf over the
/// number of deviations k = 0..n.
///
/// FisherNCH: e_u(k) ∝ C(N,k) C(n,n-k) u^k on u in [0, 1].
/// Binomial:  e_u = Bin(n, u) on u in [0, u_max], u_max <= 1 (default
///            N / (N + n)).
class DispersionFamily {
 public:
  static DispersionFamily fisher(int n, int N);
  static DispersionFamily binomial(int n, int N, std::optional<double> u_max = std::nullopt);
  static DispersionFamily make(FamilyKind kind, int n, int N);

  FamilyKind kind() const noexcept { return kind_; }
  int n() const noexcept { return n_; }
  int N() const noexcept { return N_; }
  int universe() const noexcept { return n_ + N_; }
  double lower() const noexcept { return 0.0; }
  double upper() const noexcept { return upper_; }
  bool in_domain(double u) const noexcept { return u >= lower() && u <= upper(); }

  /// ln e_u(k), k = 0..n, written into `out` (size n + 1). Zero-mass entries
  /// are -inf. Throws InputError for u < 0.
  void log_pmf(double u, std::span<double> out) const;
  std::vector<double> log_pmf(double u) const;
  std::vector<double> pmf(double u) const;

  /// ln #{X : #(X \ A) = k} for k = 0..n (-inf when unreachable).
  const std::vector<double>& log_counts() const noexcept { return log_counts_; }

 private:
  DispersionFamily(FamilyKind kind, int n, int N, double upper);

  FamilyKind kind_;
  int n_;
  int N_;
  double upper_;
  std::vector<double> log_counts_;
};

/// Fisher's noncentral hypergeometric pmf over k = 0..n. u = 0 is the point
/// mass at k = 0.
std::vector<double> fisher_nch_pmf(double u, int n, int N);
/// Bin(n, u) over k = 0..n.
std::vector<double> binomial_pmf(double u, int n);

/// (A, u) together with the family that turns u into e_u.
struct HammingModel {
  Subset center;
  double dispersion = 0.0;
  DispersionFamily family;
};

/// ln Q_{A,e_u}(X) = ln e_u(k) - ln(C(n,k) C(N,k)), k = #(X \ A).
double hamming_log_pmf(const HammingModel& model, Subset x);

enum class Monotonicity { Decreasing, NonIncreasing, Neither };
std::string to_string(Monotonicity m);

/// Exact monotonicity verdict of k -> e_u(k) / (C(n,k) C(N,k)) over the
/// reachable k. Decreasing implies NonIncreasing; the stronger one is returned.
Monotonicity check_hamming_monotone(const DispersionFamily& family, double u);
Monotonicity check_hamming_monotone(const HammingModel& model);

/// Inclusion probabilities of the rejection sampler: p1 for items of A,
/// p2 for items outside A.
struct BernoulliPair {
  double p1 = 0.5;
  double p2 = 0.5;
};

/// The Fisher dispersion produced by a Bernoulli pair,
/// u = p2 (1 - p1) / (p1 (1 - p2)).
double dispersion_from_pair(BernoulliPair pair);
/// A pair producing a given u in (0, 1] with p1 fixed (p2 solved for).
BernoulliPair pair_for_dispersion(double u, double p1 = 0.5);

inline constexpr std::uint64_t kDefaultRejectionCap = 1'000'000;

/// Draws X ~ P_{A,u} for the Fisher family by independent inclusions,
/// retried until #X = n. Throws NumericalError after `max_iterations`.
Subset sample_fisher_subset(int universe, Subset center, BernoulliPair pair, CounterRng& rng,
                            std::uint64_t max_iterations = kDefaultRejectionCap);

/// Draws X ~ P_{A,u} for the binomial family: n rounds, each taking an
/// unused item from outside A with probability u, else from A.
Subset sample_binomial_subset(int universe, Subset center, double u, CounterRng& rng);

/// Exact draw from P_{A,u} for any family: k ~ e_u, then uniform choice of
/// which k items leave A and which k enter.
Subset sample_hamming_subset(const HammingModel& model, CounterRng& rng);

/// Mean number of deviations sum_k k e_u(k).
double dispersion_mean(const DispersionFamily& family, double u);

/// Exact check of the binomial-family mode/monotonicity statements.
struct BinomialModeReport {
  bool unique_mode_premise = false;    // u < N / (N + n)
  bool unique_mode = false;            // A strictly more probable than every other X
  bool decreasing_premise = false;     // u <= 1/2 and n <= N / 2
  Monotonicity verdict = Monotonicity::Neither;
  /// Both implications hold for this (n, N, u).
  bool consistent() const noexcept {
    return (!unique_mode_premise || unique_mode) &&
           (!decreasing_premise || verdict == Monotonicity::Decreasing);
  }
};

BinomialModeReport binomial_mode_property(const DispersionFamily& family, double u);

/// Uniform choice of `count` items from `pool` without replacement.
Subset sample_without_replacement(Subset pool, int count, CounterRng& rng);

}  // namespace setvalued
