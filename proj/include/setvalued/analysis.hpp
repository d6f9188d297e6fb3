#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "setvalued/io.hpp"
#include "setvalued/one_stage.hpp"
#include "setvalued/two_stage.hpp"

namespace setvalued {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

enum class ModelKind { Pooled, Hierarchical };
enum class InferenceKind { BruteForce, Mcmc };

std::string to_string(ModelKind m);
std::string to_string(InferenceKind i);
ModelKind parse_model(const std::string& s);
InferenceKind parse_inference(const std::string& s);

struct AnalysisConfig {
  ModelKind model = ModelKind::Pooled;
  FamilyKind family = FamilyKind::FisherNCH;
  InferenceKind inference = InferenceKind::BruteForce;

  // brute force
  double epsilon = 0.01;
  int prior_draws = 1000;
  bool stratified = true;
  int cdf_grid = 10'000;
  int posterior_samples = 1000;

  // mcmc
  double sigma2 = 0.5;
  std::uint64_t iterations = 1'000'000;
  std::uint64_t burn_in = 100'000;
  std::uint64_t thin = 46;
  int chains = 30;
  bool weighted_proposal = true;

  std::uint64_t seed = 1;
  SignalThresholds thresholds;

  // hierarchical
  int quadrature_nodes = kDefaultQuadratureNodes;
  /// Labs with posterior-median Γ_i below this are flagged; no verdict when unset.
  std::optional<double> lab_gamma_threshold;
  std::string dtable_cache;

  // binomial family prior: Beta(a, b) truncated to [0, N / (N + n)]
  double beta_a = 1.0;
  double beta_b = 1.0;

  TwoStageBudget budget;
  int threads = 1;

  /// Throws InputError unless every numeric field is positive and the
  /// thresholds are ordered.
  void validate() const;
  /// Canonical JSON of the settings that affect results (threads excluded).
  std::string canonical_json() const;
  std::uint64_t hash() const;
};

ModelSpec make_model_spec(const AnalysisConfig& config, int n, int N);

struct AnalysisReport {
  std::string json;  // deterministic for fixed data, config and seed
  std::string meta;  // timestamps and host-dependent facts
  /// Sidecar name -> TSV contents.
  std::map<std::string, std::string> sidecars;
};

AnalysisReport run_analysis(const AnalysisConfig& config, const ParsedData& data);

/// Writes `path`, `path.meta.json` and `<stem>.<sidecar>.tsv` next to it.
void write_report(const AnalysisReport& report, const std::filesystem::path& path);

/// Sampled k-histogram against e_u plus the exact monotonicity verdict, as JSON.
std::string check_distribution(FamilyKind family, double u, int universe, int subset_size, std::uint64_t draws,
                               std::uint64_t seed);

}  // namespace setvalued
