#include "setvalued/simulate.hpp"

#include "setvalued/errors.hpp"

namespace setvalued {
namespace {

constexpr int kMaxEffectRedraws = 100'000;

}  // namespace

Subset draw_response(const DispersionFamily& family, int universe, Subset center, double u, CounterRng& rng) {
  if (!family.in_domain(u)) throw InputError("dispersion outside the family's parameter domain");
  if (family.kind() == FamilyKind::Binomial) return sample_binomial_subset(universe, center, u, rng);
  if (u == 0.0) return center;
  return sample_fisher_subset(universe, center, pair_for_dispersion(u), rng);
}

SimulatedData simulate(const GroundSet& ground, int n, const SimulationConfig& config) {
  const int M = ground.size();
  if (n < 1 || n >= M) throw InputError("subset size must satisfy 1 <= n < M");
  if (config.center.size() != n || (config.center.mask() & ~ground.full_mask()))
    throw InputError("simulation centre must be a size-n subset of the ground set");
  if (config.operators.empty()) throw InputError("simulation needs at least one laboratory");
  if (config.pooled && config.operators.size() != 1) throw InputError("pooled simulation takes a single operator count");
  for (int p : config.operators)
    if (p < 1) throw InputError("every laboratory needs at least one operator");

  const auto spec = ModelSpec::defaults(config.family, n, M - n);
  SimulatedData out;
  out.data.ground = ground;
  out.data.n = n;
  out.truth.center = config.center;
  out.truth.dispersion = config.dispersion;
  CounterRng rng(config.seed, 0);

  for (std::size_t i = 0; i < config.operators.size(); ++i) {
    Lab lab;
    lab.id = config.pooled ? "pooled" : "L" + std::to_string(i + 1);
    Subset lab_center = config.center;
    double lab_u = config.dispersion;
    if (!config.pooled) {
      int redraws = 0;
      if (config.lab_effect != LabEffect::None) do {
        lab_center = draw_response(spec.family, M, config.center, config.dispersion, rng);
        if (++redraws > kMaxEffectRedraws) throw NumericalError("could not draw a laboratory centre distinct from A");
      } while (config.lab_effect == LabEffect::Forced && lab_center == config.center);
      lab_u = config.lab_dispersion ? *config.lab_dispersion : spec.prior.sample(rng);
    }
    out.truth.lab_centers.push_back(lab_center);
    out.truth.lab_dispersions.push_back(lab_u);
    for (int j = 0; j < config.operators[i]; ++j)
      lab.observations.push_back({"op" + std::to_string(j + 1), draw_response(spec.family, M, lab_center, lab_u, rng)});
    out.data.labs.push_back(std::move(lab));
  }
  out.data.validate();
  return out;
}

}  // namespace setvalued
