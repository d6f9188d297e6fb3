#include "setvalued/subsets.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "setvalued/errors.hpp"

namespace setvalued {
namespace {

constexpr int kTableSize = kMaxUniverse + 1;

struct BinomialTable {
  std::array<std::array<std::uint64_t, kTableSize>, kTableSize> exact{};
  std::array<std::array<double, kTableSize>, kTableSize> logs{};

  BinomialTable() {
    for (int n = 0; n < kTableSize; ++n) {
      exact[n][0] = 1;
      for (int k = 1; k <= n; ++k) exact[n][k] = exact[n - 1][k - 1] + (k < n ? exact[n - 1][k] : 0);
      for (int k = 0; k <= n; ++k)
        logs[n][k] = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    }
  }
};

const BinomialTable& table() {
  static const BinomialTable t;
  return t;
}

}  // namespace

GroundSet::GroundSet(int size) {
  if (size < 2 || size > kMaxUniverse)
    throw InputError("ground set size must be in [2, 64], got " + std::to_string(size));
  labels_.reserve(static_cast<std::size_t>(size));
  for (int i = 1; i <= size; ++i) labels_.push_back(std::to_string(i));
}

GroundSet::GroundSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2 || labels_.size() > kMaxUniverse)
    throw InputError("ground set size must be in [2, 64], got " + std::to_string(labels_.size()));
  std::set<std::string> seen;
  for (const auto& l : labels_)
    if (!seen.insert(l).second) throw InputError("duplicate ground set label '" + l + "'");
}

std::optional<int> GroundSet::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  return std::nullopt;
}

std::uint64_t GroundSet::full_mask() const noexcept {
  return size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << size()) - 1;
}

Subset Subset::from_indices(std::span<const int> indices) {
  std::uint64_t mask = 0;
  for (int i : indices) {
    if (i < 0 || i >= kMaxUniverse) throw InputError("item index " + std::to_string(i) + " out of range");
    const std::uint64_t bit = std::uint64_t{1} << i;
    if (mask & bit) throw InputError("duplicate item index " + std::to_string(i));
    mask |= bit;
  }
  return Subset(mask);
}

std::vector<int> Subset::indices() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (std::uint64_t m = mask_; m; m &= m - 1) out.push_back(std::countr_zero(m));
  return out;
}

std::string format_subset(Subset s, const GroundSet& ground) {
  std::string out = "{";
  bool first = true;
  for (int i : s.indices()) {
    if (!first) out += ',';
    out += i < ground.size() ? ground.label(i) : std::to_string(i + 1);
    first = false;
  }
  return out + "}";
}

int overlap_outside(Subset x, Subset a) {
  if (x.size() != a.size())
    throw InputError("overlap_outside: cardinalities differ (" + std::to_string(x.size()) + " vs " +
                     std::to_string(a.size()) + ")");
  return x.without(a).size();
}

std::uint64_t binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n) return 0;
  if (n > kMaxUniverse) throw InputError("binomial: n > 64");
  return table().exact[n][k];
}

double log_binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  if (n > kMaxUniverse) return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return table().logs[n][k];
}

std::uint64_t count_at_distance(int n, int N, int k) {
  if (k < 0 || k > n || k > N) return 0;
  return binomial(n, k) * binomial(N, k);
}

SubsetRange::iterator& SubsetRange::iterator::operator++() noexcept {
  --remaining_;
  if (remaining_ == 0 || mask_ == 0) return *this;
  const std::uint64_t lowest = mask_ & (~mask_ + 1);
  const std::uint64_t ripple = mask_ + lowest;
  mask_ = (((ripple ^ mask_) >> 2) / lowest) | ripple;
  return *this;
}

SubsetRange::SubsetRange(int universe, int size, std::uint64_t first_rank, std::uint64_t count)
    : universe_(universe), size_(size), first_rank_(first_rank), count_(count) {}

SubsetRange::iterator SubsetRange::begin() const {
  if (count_ == 0) return end();
  return iterator(unrank_subset(universe_, size_, first_rank_).mask(), count_);
}

SubsetRange enumerate_subsets(int universe, int size, std::uint64_t budget) {
  if (universe < 1 || universe > kMaxUniverse) throw InputError("enumerate_subsets: M must be in [1, 64]");
  if (size < 0 || size > universe) throw InputError("enumerate_subsets: n must be in [0, M]");
  const std::uint64_t total = binomial(universe, size);
  if (total > budget)
    throw BudgetError("enumerating C(" + std::to_string(universe) + "," + std::to_string(size) +
                      ") = " + std::to_string(total) + " subsets exceeds the budget of " +
                      std::to_string(budget));
  return SubsetRange(universe, size, 0, total);
}

SubsetRange enumerate_subset_ranks(int universe, int size, std::uint64_t first, std::uint64_t count) {
  const std::uint64_t total = binomial(universe, size);
  if (first > total || count > total - first) throw InputError("enumerate_subset_ranks: rank range out of bounds");
  return SubsetRange(universe, size, first, count);
}

// Increasing-mask order is colexicographic order on the sorted index lists,
// whose rank is sum_i C(c_i, i + 1) over positions c_0 < c_1 < ...
Subset unrank_subset(int universe, int size, std::uint64_t rank) {
  if (rank >= binomial(universe, size)) throw InputError("unrank_subset: rank out of range");
  std::uint64_t mask = 0;
  int c = universe;
  for (int i = size; i >= 1; --i) {
    do {
      --c;
    } while (binomial(c, i) > rank);
    rank -= binomial(c, i);
    mask |= std::uint64_t{1} << c;
  }
  return Subset(mask);
}

std::uint64_t rank_subset(Subset s) {
  std::uint64_t rank = 0;
  int i = 1;
  for (int c : s.indices()) rank += binomial(c, i++);
  return rank;
}

}  // namespace setvalued
