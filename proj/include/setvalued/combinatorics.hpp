#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "setvalued/subsets.hpp"

namespace setvalued {

/// Default bound on the number of reference subsets fed to the alpha
/// machinery (its cost grows like 2^p).
inline constexpr int kDefaultMaxReferenceSets = 8;

/// Default bound on the number of compositions a single index may hold.
inline constexpr std::size_t kDefaultMaxCompositions = 20'000'000;

/// Membership pattern I of a cell: bit j set <=> the cell lies in set j.
using Pattern = std::uint32_t;

struct AlphaCell {
  Pattern pattern = 0;
  Subset members;
  int size = 0;
};

/// Partition of the ground set by membership pattern across p reference
/// subsets. Only non-empty cells are stored, in increasing pattern order.
class AlphaPartition {
 public:
  AlphaPartition() = default;
  AlphaPartition(int universe, int num_sets, std::vector<AlphaCell> cells)
      : universe_(universe), num_sets_(num_sets), cells_(std::move(cells)) {}

  int universe() const noexcept { return universe_; }
  int num_sets() const noexcept { return num_sets_; }
  const std::vector<AlphaCell>& cells() const noexcept { return cells_; }
  std::size_t num_cells() const noexcept { return cells_.size(); }

  /// Size of the cell with the given pattern (0 for empty cells).
  int count(Pattern pattern) const noexcept;
  /// Pattern -> size, non-empty cells only.
  std::map<Pattern, int> counts() const;

 private:
  int universe_ = 0;
  int num_sets_ = 0;
  std::vector<AlphaCell> cells_;
};

AlphaPartition alpha_partition(int universe, std::span<const Subset> sets,
                               int max_sets = kDefaultMaxReferenceSets);

/// Counts s_c chosen from each non-empty cell, aligned with
/// AlphaPartition::cells(). Empty cells always carry 0 and are not stored.
using Composition = std::vector<std::uint8_t>;

struct CompositionHash {
  std::size_t operator()(const Composition& c) const noexcept;
};

/// Marginal tuple r_j = sum_{I contains j} s_I.
std::vector<int> composition_marginals(const AlphaPartition& partition, const Composition& s);

/// Fixed-radix (base n + 1) encoding of a marginal tuple.
std::uint64_t marginal_key(std::span<const int> marginals, int n);
std::vector<int> decode_marginal_key(std::uint64_t key, int num_sets, int n);

/// prod_c C(#cell_c, s_c): the number of size-n subsets with those cell counts.
double composition_weight(const AlphaPartition& partition, const Composition& s);
std::uint64_t composition_count(const AlphaPartition& partition, const Composition& s);

struct CompositionGroup {
  std::uint64_t key = 0;
  std::vector<int> marginals;
  std::vector<Composition> members;
};

/// Every composition of n over the cells of a partition, grouped by marginal
/// tuple. Groups appear in first-generation order, which is deterministic.
class CompositionIndex {
 public:
  CompositionIndex() = default;
  CompositionIndex(AlphaPartition partition, int n, std::vector<CompositionGroup> groups);

  const AlphaPartition& partition() const noexcept { return partition_; }
  int n() const noexcept { return n_; }
  const std::vector<CompositionGroup>& groups() const noexcept { return groups_; }
  std::size_t total() const noexcept { return total_; }

  const CompositionGroup* find(std::span<const int> marginals) const;
  const CompositionGroup* find_key(std::uint64_t key) const;

 private:
  AlphaPartition partition_;
  int n_ = 0;
  std::vector<CompositionGroup> groups_;
  std::unordered_map<std::uint64_t, std::size_t> by_key_;
  std::size_t total_ = 0;
};

/// All s with 0 <= s_c <= #cell_c and sum s_c = n, generated recursively.
CompositionIndex generate_compositions(const AlphaPartition& partition, int n,
                                       std::size_t max_compositions = kDefaultMaxCompositions);

/// Flat list of compositions in generation order (no grouping).
std::vector<Composition> list_compositions(const AlphaPartition& partition, int n,
                                           std::size_t max_compositions = kDefaultMaxCompositions);

/// #{Y of size n : #(Y & Y_j) = r_j for all j}. The reference sets must all
/// have the same cardinality n.
std::uint64_t c_n_count(int universe, std::span<const Subset> sets, std::span<const int> r);

/// C_n(r) = C(n, r) * C(N, n - r): the single-reference special case.
std::uint64_t c_n_single(int n, int N, int r);

/// A composition split between the part outside and inside an additional
/// set: outside[c] + inside[c] = s[c].
struct SplitComposition {
  Composition outside;
  Composition inside;
};

/// Every split of s, bucketed by q = sum_c inside[c] (index 0..sum s).
std::vector<std::vector<SplitComposition>> split_composition(const Composition& s);

}  // namespace setvalued
