#include "setvalued/combinatorics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "setvalued/errors.hpp"

namespace setvalued {

int AlphaPartition::count(Pattern pattern) const noexcept {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), pattern,
                             [](const AlphaCell& c, Pattern p) { return c.pattern < p; });
  return (it != cells_.end() && it->pattern == pattern) ? it->size : 0;
}

std::map<Pattern, int> AlphaPartition::counts() const {
  std::map<Pattern, int> out;
  for (const auto& c : cells_) out.emplace(c.pattern, c.size);
  return out;
}

AlphaPartition alpha_partition(int universe, std::span<const Subset> sets, int max_sets) {
  if (universe < 1 || universe > kMaxUniverse) throw InputError("alpha_partition: universe out of range");
  if (sets.empty()) throw InputError("alpha_partition: need at least one reference set");
  if (static_cast<int>(sets.size()) > max_sets)
    throw BudgetError("alpha_partition: " + std::to_string(sets.size()) +
                      " reference sets exceed the bound of " + std::to_string(max_sets));
  const std::uint64_t universe_mask = universe == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << universe) - 1;
  for (const auto& s : sets)
    if (s.mask() & ~universe_mask) throw InputError("alpha_partition: subset outside the ground set");

  std::map<Pattern, std::uint64_t> cells;
  for (int item = 0; item < universe; ++item) {
    Pattern pattern = 0;
    for (std::size_t j = 0; j < sets.size(); ++j)
      if (sets[j].contains(item)) pattern |= Pattern{1} << j;
    cells[pattern] |= std::uint64_t{1} << item;
  }
  std::vector<AlphaCell> out;
  out.reserve(cells.size());
  for (const auto& [pattern, mask] : cells) out.push_back({pattern, Subset(mask), Subset(mask).size()});
  return AlphaPartition(universe, static_cast<int>(sets.size()), std::move(out));
}

std::size_t CompositionHash::operator()(const Composition& c) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto v : c) {
    h ^= v;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

std::vector<int> composition_marginals(const AlphaPartition& partition, const Composition& s) {
  std::vector<int> r(static_cast<std::size_t>(partition.num_sets()), 0);
  const auto& cells = partition.cells();
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (Pattern m = cells[c].pattern; m; m &= m - 1) r[static_cast<std::size_t>(std::countr_zero(m))] += s[c];
  return r;
}

std::uint64_t marginal_key(std::span<const int> marginals, int n) {
  std::uint64_t key = 0;
  for (auto it = marginals.rbegin(); it != marginals.rend(); ++it)
    key = key * static_cast<std::uint64_t>(n + 1) + static_cast<std::uint64_t>(*it);
  return key;
}

std::vector<int> decode_marginal_key(std::uint64_t key, int num_sets, int n) {
  std::vector<int> r(static_cast<std::size_t>(num_sets));
  for (auto& v : r) {
    v = static_cast<int>(key % static_cast<std::uint64_t>(n + 1));
    key /= static_cast<std::uint64_t>(n + 1);
  }
  return r;
}

double composition_weight(const AlphaPartition& partition, const Composition& s) {
  double w = 1.0;
  const auto& cells = partition.cells();
  for (std::size_t c = 0; c < cells.size(); ++c) w *= static_cast<double>(binomial(cells[c].size, s[c]));
  return w;
}

std::uint64_t composition_count(const AlphaPartition& partition, const Composition& s) {
  std::uint64_t w = 1;
  const auto& cells = partition.cells();
  for (std::size_t c = 0; c < cells.size(); ++c) w *= binomial(cells[c].size, s[c]);
  return w;
}

CompositionIndex::CompositionIndex(AlphaPartition partition, int n, std::vector<CompositionGroup> groups)
    : partition_(std::move(partition)), n_(n), groups_(std::move(groups)) {
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    by_key_.emplace(groups_[g].key, g);
    total_ += groups_[g].members.size();
  }
}

const CompositionGroup* CompositionIndex::find(std::span<const int> marginals) const {
  return find_key(marginal_key(marginals, n_));
}

const CompositionGroup* CompositionIndex::find_key(std::uint64_t key) const {
  auto it = by_key_.find(key);
  return it == by_key_.end() ? nullptr : &groups_[it->second];
}

namespace {

template <typename Visit>
void for_each_composition(const AlphaPartition& partition, int n, std::size_t max_compositions, Visit&& visit) {
  const auto& cells = partition.cells();
  const std::size_t num = cells.size();
  // suffix[c] = total capacity of cells c..end, for pruning.
  std::vector<int> suffix(num + 1, 0);
  for (std::size_t c = num; c-- > 0;) suffix[c] = suffix[c + 1] + cells[c].size;
  if (suffix[0] < n) return;

  Composition current(num, 0);
  std::size_t produced = 0;
  auto recurse = [&](auto&& self, std::size_t c, int remaining) -> void {
    if (c + 1 == num) {
      current[c] = static_cast<std::uint8_t>(remaining);
      if (++produced > max_compositions)
        throw BudgetError("composition enumeration exceeds the budget of " + std::to_string(max_compositions));
      visit(current);
      return;
    }
    const int lo = std::max(0, remaining - suffix[c + 1]);
    const int hi = std::min(cells[c].size, remaining);
    for (int v = hi; v >= lo; --v) {
      current[c] = static_cast<std::uint8_t>(v);
      self(self, c + 1, remaining - v);
    }
  };
  if (num == 0) return;
  recurse(recurse, 0, n);
}

}  // namespace

CompositionIndex generate_compositions(const AlphaPartition& partition, int n, std::size_t max_compositions) {
  std::vector<CompositionGroup> groups;
  std::unordered_map<std::uint64_t, std::size_t> slot;
  for_each_composition(partition, n, max_compositions, [&](const Composition& s) {
    auto r = composition_marginals(partition, s);
    const auto key = marginal_key(r, n);
    auto [it, inserted] = slot.emplace(key, groups.size());
    if (inserted) groups.push_back({key, std::move(r), {}});
    groups[it->second].members.push_back(s);
  });
  return CompositionIndex(partition, n, std::move(groups));
}

std::vector<Composition> list_compositions(const AlphaPartition& partition, int n, std::size_t max_compositions) {
  std::vector<Composition> out;
  for_each_composition(partition, n, max_compositions, [&](const Composition& s) { out.push_back(s); });
  return out;
}

std::uint64_t c_n_count(int universe, std::span<const Subset> sets, std::span<const int> r) {
  if (sets.size() != r.size()) throw InputError("c_n_count: one target overlap per reference set is required");
  const int n = sets.front().size();
  for (const auto& s : sets)
    if (s.size() != n) throw InputError("c_n_count: reference sets must share one cardinality");
  for (int v : r)
    if (v < 0 || v > n) return 0;
  const auto partition = alpha_partition(universe, sets, static_cast<int>(sets.size()));
  std::uint64_t total = 0;
  for_each_composition(partition, n, kDefaultMaxCompositions, [&](const Composition& s) {
    if (composition_marginals(partition, s) == std::vector<int>(r.begin(), r.end()))
      total += composition_count(partition, s);
  });
  return total;
}

std::uint64_t c_n_single(int n, int N, int r) {
  if (r < 0 || r > n || n - r > N) return 0;
  return binomial(n, r) * binomial(N, n - r);
}

std::vector<std::vector<SplitComposition>> split_composition(const Composition& s) {
  const int total = std::accumulate(s.begin(), s.end(), 0);
  std::vector<std::vector<SplitComposition>> buckets(static_cast<std::size_t>(total + 1));
  SplitComposition current{Composition(s.size(), 0), Composition(s.size(), 0)};
  auto recurse = [&](auto&& self, std::size_t c, int q) -> void {
    if (c == s.size()) {
      buckets[static_cast<std::size_t>(q)].push_back(current);
      return;
    }
    for (int inside = 0; inside <= s[c]; ++inside) {
      current.inside[c] = static_cast<std::uint8_t>(inside);
      current.outside[c] = static_cast<std::uint8_t>(s[c] - inside);
      self(self, c + 1, q + inside);
    }
  };
  recurse(recurse, 0, 0);
  return buckets;
}

}  // namespace setvalued
