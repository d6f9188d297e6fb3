#include "setvalued/data.hpp"

#include <set>

#include "setvalued/errors.hpp"

namespace setvalued {
namespace {

void check_subset(const GroundSet& ground, int n, const Observation& obs) {
  if (obs.subset.mask() & ~ground.full_mask())
    throw InputError("observation '" + obs.id + "' refers to an item outside the ground set");
  if (obs.subset.size() != n)
    throw InputError("observation '" + obs.id + "' has " + std::to_string(obs.subset.size()) +
                     " items, expected " + std::to_string(n));
}

void check_dimensions(const GroundSet& ground, int n) {
  if (n < 1 || n >= ground.size())
    throw InputError("subset size must satisfy 1 <= n < M (n = " + std::to_string(n) +
                     ", M = " + std::to_string(ground.size()) + ")");
}

}  // namespace

std::vector<Subset> Dataset::subsets() const {
  std::vector<Subset> out;
  out.reserve(observations.size());
  for (const auto& o : observations) out.push_back(o.subset);
  return out;
}

std::vector<int> Dataset::selection_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(universe()), 0);
  for (const auto& o : observations)
    for (int i : o.subset.indices()) ++counts[static_cast<std::size_t>(i)];
  return counts;
}

void Dataset::validate() const {
  check_dimensions(ground, n);
  std::set<std::string> ids;
  for (const auto& o : observations) {
    check_subset(ground, n, o);
    if (!ids.insert(o.id).second) throw InputError("duplicate operator id '" + o.id + "'");
  }
}

std::size_t GroupedDataset::total_observations() const noexcept {
  std::size_t total = 0;
  for (const auto& lab : labs) total += lab.observations.size();
  return total;
}

Dataset GroupedDataset::pooled() const {
  Dataset out{ground, n, {}};
  out.observations.reserve(total_observations());
  for (const auto& lab : labs)
    for (const auto& o : lab.observations) out.observations.push_back({lab.id + "/" + o.id, o.subset});
  return out;
}

void GroupedDataset::validate() const {
  check_dimensions(ground, n);
  if (labs.empty()) throw InputError("grouped data needs at least one laboratory");
  std::set<std::string> lab_ids;
  for (const auto& lab : labs) {
    if (!lab_ids.insert(lab.id).second) throw InputError("duplicate laboratory id '" + lab.id + "'");
    if (lab.observations.empty()) throw InputError("laboratory '" + lab.id + "' has no observations");
    std::set<std::string> ids;
    for (const auto& o : lab.observations) {
      check_subset(ground, n, o);
      if (!ids.insert(o.id).second)
        throw InputError("duplicate operator id '" + o.id + "' in laboratory '" + lab.id + "'");
    }
  }
}

ModelSpec ModelSpec::defaults(FamilyKind kind, int n, int N) {
  auto family = DispersionFamily::make(kind, n, N);
  auto prior = DispersionPrior::default_for(family);
  return {std::move(family), std::move(prior)};
}

}  // namespace setvalued
