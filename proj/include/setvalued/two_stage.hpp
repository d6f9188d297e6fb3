#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "setvalued/combinatorics.hpp"
#include "setvalued/data.hpp"
#include "setvalued/one_stage.hpp"

namespace setvalued {

inline constexpr int kDefaultQuadratureNodes = 256;

/// Dispersion models of the two levels: (A, u) for the consensus and
/// (A_i, u_i) for the laboratories.
struct HierarchicalSpec {
  ModelSpec consensus;
  ModelSpec lab;

  static HierarchicalSpec defaults(FamilyKind kind, int n, int N);
};

/// Memoized  ∫ prod_j e_v(k_j) prior(v) dv  keyed by the sorted multiset of
/// k_j. Thread-safe.
class IntegralCache {
 public:
  explicit IntegralCache(const ModelSpec& lab, int nodes = kDefaultQuadratureNodes);

  double integral(std::span<const int> deviations);
  std::size_t size() const;
  int nodes() const noexcept { return nodes_; }

 private:
  int nodes_;
  std::size_t width_;
  std::vector<double> log_weights_;
  std::vector<double> log_pmf_;  // nodes x (n + 1)
  std::map<std::vector<int>, double> values_;
  mutable std::mutex mutex_;
};

struct TwoStageBudget {
  std::uint64_t max_centers = kDefaultEnumerationBudget;
  int max_operators = kDefaultMaxReferenceSets;
  std::size_t max_compositions = kDefaultMaxCompositions;
  /// Bound on split-by-centre visits in the D precomputation of one lab.
  double max_work = 5e9;
};

/// D(q, s̄) for one laboratory, s̄ ranging over the cell counts #(α_I ∩ A)
/// that a centre A can produce.
class LabTable {
 public:
  /// Partition and composition index only; D is left at zero.
  static LabTable prepare(const Lab& lab, int universe, int n, const TwoStageBudget& budget);
  /// Fills D following the precomputation loop over (r̲, s, q, s̃, s̄).
  void compute(IntegralCache& cache);

  const std::string& id() const noexcept { return id_; }
  const std::vector<Subset>& observations() const noexcept { return observations_; }
  const CompositionIndex& index() const noexcept { return index_; }
  const std::vector<Composition>& centers() const noexcept { return centers_; }
  std::size_t width() const noexcept { return static_cast<std::size_t>(n_) + 1; }

  /// s̄(A): the cell counts of A.
  Composition center_counts(Subset center) const;
  /// Index of s̄(A) among centers(); throws InternalError when absent.
  std::size_t locate(Subset center) const;
  std::span<const double> row(std::size_t center) const { return {d_.data() + center * width(), width()}; }
  std::span<double> mutable_values() noexcept { return d_; }
  std::span<const double> values() const noexcept { return d_; }

  /// G(r̲) = ∫ prod_j e_v(n - r_j) g(v) dv / prod_j C_n(r_j) per composition group.
  const std::vector<double>& group_weights() const noexcept { return group_weight_; }
  std::span<double> mutable_group_weights() noexcept { return group_weight_; }

  /// Unnormalized mass of (r̲ group, q) for A_i given a centre:
  /// C_n(X̲_i, A; r̲, q) * G(r̲). Rows are groups, columns q.
  std::vector<double> phase_weights(std::size_t center) const;

  double work() const noexcept { return work_; }
  std::uint64_t data_hash() const noexcept { return data_hash_; }

 private:
  std::string id_;
  std::vector<Subset> observations_;
  int universe_ = 0;
  int n_ = 0;
  CompositionIndex index_;
  std::vector<Composition> centers_;
  std::unordered_map<Composition, std::size_t, CompositionHash> center_index_;
  std::vector<double> d_;
  std::vector<double> group_weight_;
  double work_ = 0.0;
  std::uint64_t data_hash_ = 0;
};

struct DTableHeader {
  std::uint32_t version = 0;
  int universe = 0;
  int n = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t labs = 0;
  std::uintmax_t bytes = 0;
};

class DTable {
 public:
  static DTable build(const GroupedDataset& data, const HierarchicalSpec& spec, int quadrature_nodes,
                      const TwoStageBudget& budget = {}, int threads = 1);

  const std::vector<LabTable>& labs() const noexcept { return labs_; }
  int universe() const noexcept { return universe_; }
  int n() const noexcept { return n_; }
  std::uint64_t config_hash() const noexcept { return config_hash_; }
  std::size_t cached_integrals() const noexcept { return integrals_; }

  /// Binary cache: "SVDT", format version, M, n, configuration hash and per-lab
  /// data hashes, followed by the D values.
  void save(const std::filesystem::path& path) const;
  /// Returns nullopt when the file is missing, malformed or was produced for
  /// other data or settings.
  static std::optional<DTable> load(const std::filesystem::path& path, const GroupedDataset& data,
                                    const HierarchicalSpec& spec, int quadrature_nodes,
                                    const TwoStageBudget& budget = {});

  /// Header fields of a cache file; nullopt when it is not one.
  static std::optional<DTableHeader> read_header(const std::filesystem::path& path);

  static std::uint64_t configuration_hash(const HierarchicalSpec& spec, int quadrature_nodes);

 private:
  std::vector<LabTable> labs_;
  int universe_ = 0;
  int n_ = 0;
  std::uint64_t config_hash_ = 0;
  std::size_t integrals_ = 0;
};

inline constexpr std::uint32_t kDTableFormatVersion = 1;

/// ln P(X̲_i | A, u) = ln sum_q e_u(n - q) / C_n(q) * D(q, s̄(A)).
double group_marginal_log_likelihood(const DTable& table, std::size_t lab, Subset center, double dispersion,
                                     const ModelSpec& consensus);

struct TwoStageConfig {
  double epsilon = 0.01;
  int prior_draws = 1000;
  bool stratified = true;
  int cdf_grid = 10'000;
  int posterior_samples = 1000;
  int quadrature_nodes = kDefaultQuadratureNodes;
  std::uint64_t seed = 1;
  TwoStageBudget budget;
  int threads = 1;
};

struct LabDraw {
  Subset center;         // A_i
  double dispersion = 0; // u_i
  int deviations = 0;    // k_i = #(A_i \ A)
  double gamma = 1.0;    // sum_{k >= k_i} e_u(k)
};

struct TwoStageSample {
  Subset center;
  double dispersion = 0.0;
  std::vector<LabDraw> labs;
};

struct PosteriorTwoStage {
  std::vector<std::string> lab_ids;
  std::vector<CenterProbability> center_support;
  std::vector<TwoStageSample> samples;
  double log_evidence = std::numeric_limits<double>::quiet_NaN();
  PosteriorDiagnostics diagnostics;

  Subset mode() const;
};

/// Brute-force posterior of the hierarchical model with ancestral sampling of
/// (A, u, A_i, u_i). A precomputed table may be supplied.
PosteriorTwoStage two_stage_posterior(const GroupedDataset& data, const HierarchicalSpec& spec,
                                      const TwoStageConfig& config, const DTable* table = nullptr);

/// ln of (1 / #P_n) sum_A P^(X̲̲ | A).
double hierarchical_log_evidence(const GroupedDataset& data, const HierarchicalSpec& spec,
                                 const TwoStageConfig& config, const DTable* table = nullptr);

/// Draws A_i given (A, u) for one laboratory: (r̲, q), then the refined
/// cell counts, then the members of each cell.
Subset sample_lab_center(const LabTable& lab, Subset center, double dispersion, const ModelSpec& consensus,
                         CounterRng& rng);

struct LabSummary {
  std::string id;
  std::vector<double> gamma;
  double gamma_mean = 0.0;
  double gamma_median = 0.0;
  std::vector<int> deviations;
  std::vector<int> deviation_histogram;  // index k = 0..n
  double dispersion_median = 0.0;
  /// Expected deviations between an operator and A_i at the median u_i.
  double mean_deviations_at_median = 0.0;
  /// Posterior mean of the expected deviations.
  double mean_deviations_posterior_mean = 0.0;
};

std::vector<LabSummary> gamma_statistics(const PosteriorTwoStage& posterior, const HierarchicalSpec& spec);

struct BayesFactorResult {
  double log_evidence_hierarchical = 0.0;
  double log_evidence_pooled = 0.0;
  double log_bayes_factor = 0.0;
  std::string interpretation;
};

/// Kass and Raftery bands on the Bayes factor of the laboratory-effect model.
std::string interpret_log_bayes_factor(double log_bf);

BayesFactorResult bayes_factor(const GroupedDataset& data, const HierarchicalSpec& spec, const TwoStageConfig& config,
                               const DTable* table = nullptr);

}  // namespace setvalued
