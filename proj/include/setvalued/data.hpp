#pragma once

#include <string>
#include <vector>

#include "setvalued/distributions.hpp"
#include "setvalued/prior.hpp"
#include "setvalued/subsets.hpp"

namespace setvalued {

struct Observation {
  std::string id;
  Subset subset;

  bool operator==(const Observation&) const = default;
};

/// Pooled responses X_1..X_p, all of size n over one ground set.
struct Dataset {
  GroundSet ground{2};
  int n = 1;
  std::vector<Observation> observations;

  int universe() const noexcept { return ground.size(); }
  int outside() const noexcept { return ground.size() - n; }
  std::size_t size() const noexcept { return observations.size(); }
  std::vector<Subset> subsets() const;
  /// #{i : item in X_i} for every item.
  std::vector<int> selection_counts() const;

  /// Throws InputError when an invariant is broken (wrong sizes, items
  /// outside the ground set, n >= M). Empty data is allowed.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct Lab {
  std::string id;
  std::vector<Observation> observations;

  bool operator==(const Lab&) const = default;
};

/// Responses grouped by laboratory.
struct GroupedDataset {
  GroundSet ground{2};
  int n = 1;
  std::vector<Lab> labs;

  int universe() const noexcept { return ground.size(); }
  int outside() const noexcept { return ground.size() - n; }
  std::size_t total_observations() const noexcept;
  /// All operators in lab order, ids prefixed "lab/operator".
  Dataset pooled() const;

  /// Throws InputError unless L >= 1, every lab is non-empty and every
  /// subset has size n within the ground set.
  void validate() const;

  bool operator==(const GroupedDataset&) const = default;
};

/// A dispersion family together with the prior placed on its parameter.
struct ModelSpec {
  DispersionFamily family;
  DispersionPrior prior;

  static ModelSpec defaults(FamilyKind kind, int n, int N);
};

}  // namespace setvalued
