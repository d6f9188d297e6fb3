#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "setvalued/data.hpp"
#include "setvalued/rng.hpp"

namespace setvalued {

enum class LabEffect { Random, Forced, None };

struct SimulationConfig {
  FamilyKind family = FamilyKind::FisherNCH;
  Subset center;
  double dispersion = 0.1;
  /// Operators per laboratory; a single entry with `pooled` set produces
  /// one group whose operators draw directly from P_{A,u}.
  std::vector<int> operators{12};
  bool pooled = false;
  /// u_i for every lab; drawn from the lab prior when empty.
  std::optional<double> lab_dispersion;
  /// Random: A_i ~ P_{A,u}. Forced: redrawn until A_i != A. None: A_i = A.
  LabEffect lab_effect = LabEffect::Random;
  std::uint64_t seed = 1;
};

struct SimulationTruth {
  Subset center;
  double dispersion = 0.0;
  std::vector<Subset> lab_centers;
  std::vector<double> lab_dispersions;
};

struct SimulatedData {
  GroupedDataset data;
  SimulationTruth truth;
};

/// Draws a data set from the hierarchical model (or the pooled one). Fisher
/// responses use the Bernoulli-pair rejection sampler, binomial responses the
/// n-round procedure.
SimulatedData simulate(const GroundSet& ground, int n, const SimulationConfig& config);

/// One response from P_{A,u} with the family's generative procedure.
Subset draw_response(const DispersionFamily& family, int universe, Subset center, double u, CounterRng& rng);

}  // namespace setvalued
