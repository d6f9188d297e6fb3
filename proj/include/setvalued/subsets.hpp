#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace setvalued {

/// Hard limit on the ground-set size: subsets are single 64-bit masks.
inline constexpr int kMaxUniverse = 64;

/// Default refusal threshold for exhaustive loops over all size-n subsets.
inline constexpr std::uint64_t kDefaultEnumerationBudget = 10'000'000;

/// The finite universe of M labelled items. Items are addressed by 0-based
/// index internally; labels are what users see (default "1".."M").
class GroundSet {
 public:
  explicit GroundSet(int size);
  explicit GroundSet(std::vector<std::string> labels);

  int size() const noexcept { return static_cast<int>(labels_.size()); }
  const std::string& label(int index) const { return labels_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::optional<int> index_of(const std::string& label) const;
  std::uint64_t full_mask() const noexcept;

  bool operator==(const GroundSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// A subset of a ground set, stored as a bitmask (bit i <=> item i).
class Subset {
 public:
  constexpr Subset() noexcept = default;
  constexpr explicit Subset(std::uint64_t mask) noexcept : mask_(mask) {}

  /// From 0-based item indices. Throws InputError on duplicates or indices
  /// outside [0, 64).
  static Subset from_indices(std::span<const int> indices);

  constexpr std::uint64_t mask() const noexcept { return mask_; }
  constexpr int size() const noexcept { return std::popcount(mask_); }
  constexpr bool contains(int index) const noexcept { return (mask_ >> index) & 1U; }
  constexpr bool empty() const noexcept { return mask_ == 0; }

  std::vector<int> indices() const;

  constexpr Subset complement_in(std::uint64_t universe) const noexcept {
    return Subset(universe & ~mask_);
  }

  constexpr Subset operator&(Subset o) const noexcept { return Subset(mask_ & o.mask_); }
  constexpr Subset operator|(Subset o) const noexcept { return Subset(mask_ | o.mask_); }
  constexpr Subset without(Subset o) const noexcept { return Subset(mask_ & ~o.mask_); }
  constexpr Subset with(int index) const noexcept { return Subset(mask_ | (std::uint64_t{1} << index)); }
  constexpr Subset without(int index) const noexcept {
    return Subset(mask_ & ~(std::uint64_t{1} << index));
  }

  constexpr auto operator<=>(const Subset&) const noexcept = default;

 private:
  std::uint64_t mask_ = 0;
};

/// "{1,2,3}" using the ground set's labels.
std::string format_subset(Subset s, const GroundSet& ground);

/// Number of elements of x outside a, i.e. #(x \ a). Both must have the same
/// cardinality; equals n - #(x & a).
int overlap_outside(Subset x, Subset a);

/// Exact binomial coefficient for n <= 64 (0 when k < 0 or k > n).
std::uint64_t binomial(int n, int k);
/// ln C(n, k); -inf when the coefficient is zero.
double log_binomial(int n, int k);

/// Number of size-n subsets with exactly k elements outside a fixed size-n
/// centre when N items lie outside it: C(n,k) * C(N,k).
std::uint64_t count_at_distance(int n, int N, int k);

/// Lazily enumerates all size-n subsets of {0..M-1} in increasing mask order
/// (Gosper's successor). The range is re-creatable and can start at any rank.
class SubsetRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Subset;
    using difference_type = std::ptrdiff_t;
    using reference = Subset;
    using pointer = void;

    iterator() = default;
    iterator(std::uint64_t mask, std::uint64_t remaining) : mask_(mask), remaining_(remaining) {}

    Subset operator*() const noexcept { return Subset(mask_); }
    iterator& operator++() noexcept;
    iterator operator++(int) noexcept {
      auto copy = *this;
      ++*this;
      return copy;
    }
    bool operator==(const iterator& o) const noexcept { return remaining_ == o.remaining_; }

   private:
    std::uint64_t mask_ = 0;
    std::uint64_t remaining_ = 0;
  };

  SubsetRange(int universe, int size, std::uint64_t first_rank, std::uint64_t count);

  iterator begin() const;
  iterator end() const { return iterator(0, 0); }
  std::uint64_t count() const noexcept { return count_; }

 private:
  int universe_;
  int size_;
  std::uint64_t first_rank_;
  std::uint64_t count_;
};

/// All size-n subsets of an M-set. Refuses with BudgetError when C(M, n)
/// exceeds `budget`.
SubsetRange enumerate_subsets(int universe, int size,
                              std::uint64_t budget = kDefaultEnumerationBudget);

/// The subsets with ranks [first, first + count) in enumeration order.
SubsetRange enumerate_subset_ranks(int universe, int size, std::uint64_t first, std::uint64_t count);

/// Subset at a given rank of the enumeration order (combinatorial number
/// system), and the inverse.
Subset unrank_subset(int universe, int size, std::uint64_t rank);
std::uint64_t rank_subset(Subset s);

}  // namespace setvalued
