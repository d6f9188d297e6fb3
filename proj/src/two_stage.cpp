#include "setvalued/two_stage.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "inference_common.hpp"
#include "setvalued/errors.hpp"
#include "setvalued/numeric.hpp"
#include "setvalued/prior.hpp"

namespace setvalued {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr char kMagic[4] = {'S', 'V', 'D', 'T'};

class Fnv {
 public:
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  void text(const std::string& s) {
    value(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return static_cast<double>(binomial(n, k));
}

std::uint64_t lab_hash(const Lab& lab, int universe, int n) {
  Fnv h;
  h.text(lab.id);
  h.value(universe);
  h.value(n);
  for (const auto& o : lab.observations) h.value(o.subset.mask());
  return h.digest();
}

std::size_t draw_index(std::span<const double> weights, CounterRng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("categorical draw with zero or non-finite mass");
  double x = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last = i;
    x -= weights[i];
    if (x < 0.0) return i;
  }
  return last;
}

// Weight prod_c C(#α_c - s̄_c, out_c) C(s̄_c, in_c), or 0 when a refined count
// does not fit its cell.
double refined_weight(const std::vector<AlphaCell>& cells, const Composition& sbar, const SplitComposition& split) {
  double w = 1.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const int in = split.inside[c];
    const int out = split.outside[c];
    const int inside_cell = sbar[c];
    const int outside_cell = cells[c].size - inside_cell;
    if (in > inside_cell || out > outside_cell) return 0.0;
    w *= choose(outside_cell, out) * choose(inside_cell, in);
  }
  return w;
}

void check_spec(const GroupedDataset& data, const HierarchicalSpec& spec) {
  data.validate();
  const int N = data.ground.size() - data.n;
  for (const ModelSpec* m : {&spec.consensus, &spec.lab})
    if (m->family.n() != data.n || m->family.N() != N)
      throw InputError("model family dimensions do not match the data");
}

}  // namespace

HierarchicalSpec HierarchicalSpec::defaults(FamilyKind kind, int n, int N) {
  return {ModelSpec::defaults(kind, n, N), ModelSpec::defaults(kind, n, N)};
}

// ---------------------------------------------------------------------------

IntegralCache::IntegralCache(const ModelSpec& lab, int nodes)
    : nodes_(nodes), width_(static_cast<std::size_t>(lab.family.n()) + 1) {
  if (nodes < 2) throw InputError("quadrature needs at least two nodes");
  const auto rule = prior_quadrature(lab.prior, nodes);
  log_weights_.resize(rule.nodes.size());
  log_pmf_.resize(rule.nodes.size() * width_);
  for (std::size_t m = 0; m < rule.nodes.size(); ++m) {
    log_weights_[m] = rule.weights[m] > 0.0 ? std::log(rule.weights[m]) : kNegInf;
    lab.family.log_pmf(rule.nodes[m], std::span<double>(log_pmf_.data() + m * width_, width_));
  }
}

double IntegralCache::integral(std::span<const int> deviations) {
  std::vector<int> key(deviations.begin(), deviations.end());
  std::sort(key.begin(), key.end());
  std::lock_guard lock(mutex_);
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  std::vector<double> terms(log_weights_.size());
  for (std::size_t m = 0; m < terms.size(); ++m) {
    double v = log_weights_[m];
    for (int k : key) v += log_pmf_[m * width_ + static_cast<std::size_t>(k)];
    terms[m] = std::isnan(v) ? kNegInf : v;
  }
  const double value = std::exp(log_sum_exp(terms));
  values_.emplace(std::move(key), value);
  return value;
}

std::size_t IntegralCache::size() const {
  std::lock_guard lock(mutex_);
  return values_.size();
}

// ---------------------------------------------------------------------------

LabTable LabTable::prepare(const Lab& lab, int universe, int n, const TwoStageBudget& budget) {
  LabTable t;
  t.id_ = lab.id;
  t.universe_ = universe;
  t.n_ = n;
  t.data_hash_ = lab_hash(lab, universe, n);
  for (const auto& o : lab.observations) t.observations_.push_back(o.subset);
  if (static_cast<int>(t.observations_.size()) > budget.max_operators)
    throw BudgetError("laboratory '" + lab.id + "' has " + std::to_string(t.observations_.size()) +
                      " operators, above the limit of " + std::to_string(budget.max_operators) +
                      "; split or subsample the laboratory, or raise the operator budget");
  try {
    t.index_ = generate_compositions(alpha_partition(universe, t.observations_, budget.max_operators), n,
                                     budget.max_compositions);
  } catch (const BudgetError& e) {
    throw BudgetError("laboratory '" + lab.id + "': " + e.what());
  }
  for (const auto& group : t.index_.groups())
    for (const auto& s : group.members) {
      t.center_index_.emplace(s, t.centers_.size());
      t.centers_.push_back(s);
    }
  double splits = 0.0;
  for (const auto& s : t.centers_) {
    double product = 1.0;
    for (auto v : s) product *= v + 1.0;
    splits += product;
  }
  t.work_ = splits * static_cast<double>(t.centers_.size());
  if (t.work_ > budget.max_work)
    throw BudgetError("laboratory '" + lab.id + "': the D precomputation needs about " +
                      std::to_string(static_cast<long double>(t.work_)) + " steps, above the budget; raise the work budget or split the laboratory");
  t.d_.assign(t.centers_.size() * t.width(), 0.0);
  t.group_weight_.assign(t.index_.groups().size(), 0.0);
  return t;
}

void LabTable::compute(IntegralCache& cache) {
  const int N = universe_ - n_;
  const auto& cells = index_.partition().cells();
  const std::size_t w = width();
  std::fill(d_.begin(), d_.end(), 0.0);
  std::vector<int> deviations(observations_.size());
  const auto& groups = index_.groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double denominator = 1.0;
    for (std::size_t j = 0; j < deviations.size(); ++j) {
      const int r = groups[g].marginals[j];
      deviations[j] = n_ - r;
      denominator *= static_cast<double>(c_n_single(n_, N, r));
    }
    const double G = cache.integral(deviations) / denominator;
    group_weight_[g] = G;
    for (const auto& s : groups[g].members) {
      const auto buckets = split_composition(s);
      for (std::size_t q = 0; q < buckets.size(); ++q)
        for (const auto& split : buckets[q])
          for (std::size_t ci = 0; ci < centers_.size(); ++ci) {
            const double weight = refined_weight(cells, centers_[ci], split);
            if (weight > 0.0) d_[ci * w + q] += G * weight;
          }
    }
  }
}

Composition LabTable::center_counts(Subset center) const {
  const auto& cells = index_.partition().cells();
  Composition out(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) out[c] = static_cast<std::uint8_t>((cells[c].members & center).size());
  return out;
}

std::size_t LabTable::locate(Subset center) const {
  const auto it = center_index_.find(center_counts(center));
  if (it == center_index_.end())
    throw InternalError("laboratory '" + id_ + "': centre cell counts missing from the composition index");
  return it->second;
}

std::vector<double> LabTable::phase_weights(std::size_t center) const {
  const auto& cells = index_.partition().cells();
  const auto& groups = index_.groups();
  const std::size_t w = width();
  std::vector<double> out(groups.size() * w, 0.0);
  const Composition& sbar = centers_.at(center);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const auto& s : groups[g].members) {
      const auto buckets = split_composition(s);
      for (std::size_t q = 0; q < buckets.size(); ++q)
        for (const auto& split : buckets[q]) out[g * w + q] += group_weight_[g] * refined_weight(cells, sbar, split);
    }
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t DTable::configuration_hash(const HierarchicalSpec& spec, int quadrature_nodes) {
  Fnv h;
  h.text(to_string(spec.lab.family.kind()));
  h.value(spec.lab.family.upper());
  h.text(spec.lab.prior.describe());
  h.value(quadrature_nodes);
  h.value(kDTableFormatVersion);
  return h.digest();
}

DTable DTable::build(const GroupedDataset& data, const HierarchicalSpec& spec, int quadrature_nodes,
                     const TwoStageBudget& budget, int threads) {
  check_spec(data, spec);
  DTable table;
  table.universe_ = data.ground.size();
  table.n_ = data.n;
  table.config_hash_ = configuration_hash(spec, quadrature_nodes);
  for (const auto& lab : data.labs) table.labs_.push_back(LabTable::prepare(lab, table.universe_, data.n, budget));
  IntegralCache cache(spec.lab, quadrature_nodes);
  detail::parallel_for(table.labs_.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    for (auto i = begin; i < end; ++i) table.labs_[i].compute(cache);
  });
  table.integrals_ = cache.size();
  return table;
}

void DTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write cache file '" + path.string() + "'");
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write(kMagic, sizeof(kMagic));
  put(kDTableFormatVersion);
  put(static_cast<std::int32_t>(universe_));
  put(static_cast<std::int32_t>(n_));
  put(config_hash_);
  put(static_cast<std::uint64_t>(labs_.size()));
  for (const auto& lab : labs_) {
    put(lab.data_hash());
    put(static_cast<std::uint64_t>(lab.values().size()));
    out.write(reinterpret_cast<const char*>(lab.values().data()),
              static_cast<std::streamsize>(lab.values().size() * sizeof(double)));
    put(static_cast<std::uint64_t>(lab.group_weights().size()));
    out.write(reinterpret_cast<const char*>(lab.group_weights().data()),
              static_cast<std::streamsize>(lab.group_weights().size() * sizeof(double)));
  }
  if (!out) throw InputError("failed while writing cache file '" + path.string() + "'");
}

std::optional<DTable> DTable::load(const std::filesystem::path& path, const GroupedDataset& data,
                                   const HierarchicalSpec& spec, int quadrature_nodes, const TwoStageBudget& budget) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  auto get = [&](auto& v) { return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(v))); };
  char magic[4];
  std::uint32_t version = 0;
  std::int32_t universe = 0;
  std::int32_t n = 0;
  std::uint64_t config = 0;
  std::uint64_t labs = 0;
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) return std::nullopt;
  if (!get(version) || version != kDTableFormatVersion) return std::nullopt;
  if (!get(universe) || !get(n) || !get(config) || !get(labs)) return std::nullopt;
  check_spec(data, spec);
  if (universe != data.ground.size() || n != data.n || config != configuration_hash(spec, quadrature_nodes) ||
      labs != data.labs.size())
    return std::nullopt;

  DTable table;
  table.universe_ = universe;
  table.n_ = n;
  table.config_hash_ = config;
  for (const auto& lab : data.labs) {
    std::uint64_t hash = 0;
    std::uint64_t count = 0;
    if (!get(hash) || hash != lab_hash(lab, universe, n) || !get(count)) return std::nullopt;
    auto prepared = LabTable::prepare(lab, universe, n, budget);
    if (count != prepared.values().size()) return std::nullopt;
    auto values = prepared.mutable_values();
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double))))
      return std::nullopt;
    std::uint64_t groups = 0;
    if (!get(groups) || groups != prepared.group_weights().size()) return std::nullopt;
    auto weights = prepared.mutable_group_weights();
    if (!in.read(reinterpret_cast<char*>(weights.data()), static_cast<std::streamsize>(groups * sizeof(double))))
      return std::nullopt;
    table.labs_.push_back(std::move(prepared));
  }
  if (in.peek() != std::char_traits<char>::eof()) return std::nullopt;
  return table;
}

std::optional<DTableHeader> DTable::read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  auto get = [&](auto& v) { return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(v))); };
  char magic[4];
  DTableHeader h;
  std::int32_t universe = 0;
  std::int32_t n = 0;
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) return std::nullopt;
  if (!get(h.version) || !get(universe) || !get(n) || !get(h.config_hash) || !get(h.labs)) return std::nullopt;
  h.universe = universe;
  h.n = n;
  h.bytes = std::filesystem::file_size(path);
  return h;
}

double group_marginal_log_likelihood(const DTable& table, std::size_t lab, Subset center, double dispersion,
                                     const ModelSpec& consensus) {
  const auto& t = table.labs().at(lab);
  const auto row = t.row(t.locate(center));
  const auto log_e = consensus.family.log_pmf(dispersion);
  const auto& log_counts = consensus.family.log_counts();
  const int n = table.n();
  std::vector<double> terms(row.size());
  for (std::size_t q = 0; q < row.size(); ++q) {
    const auto k = static_cast<std::size_t>(n) - q;
    terms[q] = row[q] > 0.0 ? log_e[k] - log_counts[k] + std::log(row[q]) : kNegInf;
    if (std::isnan(terms[q])) terms[q] = kNegInf;
  }
  return log_sum_exp(terms);
}

// ---------------------------------------------------------------------------

namespace {

// Draws (A_i) given the phase weights W[g][q] = C_n(X̲_i, A; r̲_g, q) G(r̲_g).
Subset draw_lab_center(const LabTable& lab, std::size_t center_index, Subset center, std::span<const double> phase,
                       std::span<const double> log_point, CounterRng& rng) {
  const std::size_t w = lab.width();
  const int n = static_cast<int>(w) - 1;
  std::vector<double> mass(phase.size(), 0.0);
  double top = kNegInf;
  for (std::size_t i = 0; i < phase.size(); ++i)
    if (phase[i] > 0.0) top = std::max(top, log_point[static_cast<std::size_t>(n) - i % w] + std::log(phase[i]));
  if (!std::isfinite(top)) throw NumericalError("laboratory '" + lab.id() + "': no admissible (r, q) for this centre");
  for (std::size_t i = 0; i < phase.size(); ++i)
    if (phase[i] > 0.0) mass[i] = std::exp(log_point[static_cast<std::size_t>(n) - i % w] + std::log(phase[i]) - top);
  const std::size_t pick = draw_index(mass, rng);
  const std::size_t g = pick / w;
  const std::size_t q = pick % w;

  const auto& cells = lab.index().partition().cells();
  const Composition& sbar = lab.centers()[center_index];
  std::vector<SplitComposition> candidates;
  std::vector<double> weights;
  for (const auto& s : lab.index().groups()[g].members) {
    auto buckets = split_composition(s);
    if (q >= buckets.size()) continue;
    for (auto& split : buckets[q]) {
      const double weight = refined_weight(cells, sbar, split);
      if (weight <= 0.0) continue;
      weights.push_back(weight);
      candidates.push_back(std::move(split));
    }
  }
  const auto& chosen = candidates[draw_index(weights, rng)];
  Subset out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out = out | sample_without_replacement(cells[c].members & center, chosen.inside[c], rng);
    out = out | sample_without_replacement(cells[c].members.without(center), chosen.outside[c], rng);
  }
  return out;
}

// ln P^(X̲_i | A) rows for every lab: [lab][center][draw].
struct LabLikelihoods {
  std::vector<std::vector<double>> values;
  std::size_t draws = 0;
};

LabLikelihoods lab_likelihoods(const DTable& table, const ModelSpec& consensus, std::span<const double> us) {
  const auto point = detail::log_point_table(consensus.family, us);
  const std::size_t w = static_cast<std::size_t>(table.n()) + 1;
  const int n = table.n();
  LabLikelihoods out;
  out.draws = us.size();
  std::vector<double> terms(w);
  for (const auto& lab : table.labs()) {
    std::vector<double> rows(lab.centers().size() * us.size());
    for (std::size_t ci = 0; ci < lab.centers().size(); ++ci) {
      const auto d = lab.row(ci);
      for (std::size_t m = 0; m < us.size(); ++m) {
        for (std::size_t q = 0; q < w; ++q) {
          const double v = point[m * w + static_cast<std::size_t>(n) - q];
          terms[q] = d[q] > 0.0 && !std::isnan(v) ? v + std::log(d[q]) : kNegInf;
        }
        rows[ci * us.size() + m] = log_sum_exp(terms);
      }
    }
    out.values.push_back(std::move(rows));
  }
  return out;
}

std::vector<double> hierarchical_log_marginals(const DTable& table, const ModelSpec& consensus,
                                               std::span<const double> us, int threads) {
  const auto ll = lab_likelihoods(table, consensus, us);
  const int M = table.universe();
  const int n = table.n();
  const std::uint64_t total = binomial(M, n);
  const double log_draws = std::log(static_cast<double>(us.size()));
  std::vector<double> out(total);
  detail::parallel_for(total, threads, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<double> sum(us.size());
    std::uint64_t rank = begin;
    for (Subset center : enumerate_subset_ranks(M, n, begin, end - begin)) {
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t i = 0; i < table.labs().size(); ++i) {
        const std::size_t ci = table.labs()[i].locate(center);
        const double* row = ll.values[i].data() + ci * us.size();
        for (std::size_t m = 0; m < us.size(); ++m) sum[m] += row[m];
      }
      out[rank++] = log_sum_exp(sum) - log_draws;
    }
  });
  return out;
}

const DTable& ensure_table(const GroupedDataset& data, const HierarchicalSpec& spec, const TwoStageConfig& config,
                           const DTable* table, std::optional<DTable>& owned) {
  if (table == nullptr) {
    owned = DTable::build(data, spec, config.quadrature_nodes, config.budget, config.threads);
    return *owned;
  }
  if (table->universe() != data.ground.size() || table->n() != data.n || table->labs().size() != data.labs.size() ||
      table->config_hash() != DTable::configuration_hash(spec, config.quadrature_nodes))
    throw InputError("precomputed D table does not match the data or model settings");
  for (std::size_t i = 0; i < data.labs.size(); ++i)
    if (table->labs()[i].data_hash() != lab_hash(data.labs[i], data.ground.size(), data.n))
      throw InputError("precomputed D table was built for different data in laboratory '" + data.labs[i].id + "'");
  return *table;
}

}  // namespace

Subset sample_lab_center(const LabTable& lab, Subset center, double dispersion, const ModelSpec& consensus,
                         CounterRng& rng) {
  const std::size_t ci = lab.locate(center);
  const auto phase = lab.phase_weights(ci);
  auto log_point = consensus.family.log_pmf(dispersion);
  for (std::size_t k = 0; k < log_point.size(); ++k) log_point[k] -= consensus.family.log_counts()[k];
  return draw_lab_center(lab, ci, center, phase, log_point, rng);
}

Subset PosteriorTwoStage::mode() const {
  if (center_support.empty()) throw InputError("posterior has an empty centre support");
  return center_support.front().center;
}

double hierarchical_log_evidence(const GroupedDataset& data, const HierarchicalSpec& spec,
                                 const TwoStageConfig& config, const DTable* table) {
  check_spec(data, spec);
  (void)enumerate_subsets(data.ground.size(), data.n, config.budget.max_centers);
  std::optional<DTable> owned;
  const DTable& t = ensure_table(data, spec, config, table, owned);
  CounterRng prior_rng(config.seed, detail::kPriorStream);
  const auto us = detail::draw_prior(spec.consensus.prior, config.prior_draws, config.stratified, prior_rng);
  const auto marginals = hierarchical_log_marginals(t, spec.consensus, us, config.threads);
  return log_sum_exp(marginals) - std::log(static_cast<double>(marginals.size()));
}

PosteriorTwoStage two_stage_posterior(const GroupedDataset& data, const HierarchicalSpec& spec,
                                      const TwoStageConfig& config, const DTable* table) {
  check_spec(data, spec);
  const int M = data.ground.size();
  const int n = data.n;
  const std::uint64_t total = enumerate_subsets(M, n, config.budget.max_centers).count();
  std::optional<DTable> owned;
  const DTable& t = ensure_table(data, spec, config, table, owned);

  CounterRng prior_rng(config.seed, detail::kPriorStream);
  const auto us = detail::draw_prior(spec.consensus.prior, config.prior_draws, config.stratified, prior_rng);
  const auto centers =
      detail::summarize_centers(hierarchical_log_marginals(t, spec.consensus, us, config.threads), config.epsilon);

  PosteriorTwoStage posterior;
  for (const auto& lab : data.labs) posterior.lab_ids.push_back(lab.id);
  posterior.log_evidence = centers.log_evidence;
  auto& diag = posterior.diagnostics;
  diag.method = "two-stage-brute-force";
  diag.seed = config.seed;
  diag.centers_enumerated = total;
  diag.retained_mass = centers.retained_mass;
  diag.prior_draws = config.prior_draws;
  diag.cdf_grid = config.cdf_grid;
  for (std::size_t i = 0; i < centers.retained.size(); ++i)
    posterior.center_support.push_back({unrank_subset(M, n, centers.retained[i]), centers.retained_probability[i], 0.0});
  if (config.posterior_samples <= 0) return posterior;

  const auto top_grid = detail::DispersionGrid::build(spec.consensus, config.cdf_grid);
  const auto lab_grid = detail::DispersionGrid::build(spec.lab, config.cdf_grid);
  const std::size_t w = static_cast<std::size_t>(n) + 1;
  const auto& top_log_counts = spec.consensus.family.log_counts();

  // u | X̲̲, A on the grid, cached per retained centre.
  auto dispersion_conditional = [&](Subset center) {
    std::vector<std::size_t> index(t.labs().size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = t.labs()[i].locate(center);
    std::vector<double> log_density(top_grid.u.size());
    std::vector<double> terms(w);
    for (std::size_t m = 0; m < top_grid.u.size(); ++m) {
      const auto log_e = top_grid.log_pmf_row(m);
      double v = top_grid.log_prior[m];
      for (std::size_t i = 0; i < index.size(); ++i) {
        const auto d = t.labs()[i].row(index[i]);
        for (std::size_t q = 0; q < w; ++q) {
          const std::size_t k = w - 1 - q;
          const double x = log_e[k] - top_log_counts[k];
          terms[q] = d[q] > 0.0 && !std::isnan(x) ? x + std::log(d[q]) : kNegInf;
        }
        v += log_sum_exp(terms);
      }
      log_density[m] = std::isnan(v) ? kNegInf : v;
    }
    return GridDistribution(top_grid.lower, top_grid.upper, log_density);
  };

  const detail::RetainedSampler pick(centers);
  std::map<std::size_t, GridDistribution> top_conditionals;
  std::vector<std::map<std::size_t, std::vector<double>>> phase_cache(t.labs().size());
  std::vector<std::map<std::vector<int>, GridDistribution>> lab_conditionals(t.labs().size());
  std::vector<int> histogram(w);
  CounterRng rng(config.seed, detail::kSamplingStream);
  posterior.samples.reserve(static_cast<std::size_t>(config.posterior_samples));

  for (int s = 0; s < config.posterior_samples; ++s) {
    TwoStageSample sample;
    const std::size_t slot = pick.draw(rng);
    sample.center = posterior.center_support[slot].center;
    auto it = top_conditionals.find(slot);
    if (it == top_conditionals.end()) it = top_conditionals.emplace(slot, dispersion_conditional(sample.center)).first;
    sample.dispersion = it->second.sample(rng);

    const auto e = spec.consensus.family.pmf(sample.dispersion);
    auto log_point = spec.consensus.family.log_pmf(sample.dispersion);
    for (std::size_t k = 0; k < w; ++k) log_point[k] -= top_log_counts[k];
    for (std::size_t i = 0; i < t.labs().size(); ++i) {
      const auto& lab = t.labs()[i];
      const std::size_t ci = lab.locate(sample.center);
      auto pc = phase_cache[i].find(ci);
      if (pc == phase_cache[i].end()) pc = phase_cache[i].emplace(ci, lab.phase_weights(ci)).first;
      LabDraw draw;
      draw.center = draw_lab_center(lab, ci, sample.center, pc->second, log_point, rng);
      std::fill(histogram.begin(), histogram.end(), 0);
      for (const auto& x : lab.observations()) ++histogram[static_cast<std::size_t>(x.without(draw.center).size())];
      auto lc = lab_conditionals[i].find(histogram);
      if (lc == lab_conditionals[i].end()) lc = lab_conditionals[i].emplace(histogram, lab_grid.conditional(histogram)).first;
      draw.dispersion = lc->second.sample(rng);
      draw.deviations = draw.center.without(sample.center).size();
      double tail = 0.0;
      for (std::size_t k = static_cast<std::size_t>(draw.deviations); k < w; ++k) tail += e[k];
      draw.gamma = std::min(1.0, tail);
      sample.labs.push_back(draw);
    }
    posterior.samples.push_back(std::move(sample));
  }
  return posterior;
}

// ---------------------------------------------------------------------------

std::vector<LabSummary> gamma_statistics(const PosteriorTwoStage& posterior, const HierarchicalSpec& spec) {
  if (posterior.samples.empty()) throw InputError("gamma statistics need joint posterior samples");
  const int n = spec.consensus.family.n();
  std::vector<LabSummary> out(posterior.lab_ids.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& row = out[i];
    row.id = posterior.lab_ids[i];
    row.deviation_histogram.assign(static_cast<std::size_t>(n) + 1, 0);
    std::vector<double> us;
    double mean_dev = 0.0;
    for (const auto& s : posterior.samples) {
      const auto& d = s.labs.at(i);
      row.gamma.push_back(d.gamma);
      row.deviations.push_back(d.deviations);
      ++row.deviation_histogram[static_cast<std::size_t>(d.deviations)];
      us.push_back(d.dispersion);
      mean_dev += dispersion_mean(spec.lab.family, d.dispersion);
    }
    row.gamma_mean = mean(row.gamma);
    row.gamma_median = median(row.gamma);
    row.dispersion_median = median(us);
    row.mean_deviations_at_median = dispersion_mean(spec.lab.family, row.dispersion_median);
    row.mean_deviations_posterior_mean = mean_dev / static_cast<double>(posterior.samples.size());
  }
  return out;
}

std::string interpret_log_bayes_factor(double log_bf) {
  if (std::isnan(log_bf)) return "undefined";
  if (log_bf < 0.0) return "supports the pooled model";
  if (log_bf < std::log(3.0)) return "not worth more than a bare mention";
  if (log_bf < std::log(20.0)) return "positive";
  if (log_bf < std::log(150.0)) return "strong";
  return "very strong";
}

BayesFactorResult bayes_factor(const GroupedDataset& data, const HierarchicalSpec& spec, const TwoStageConfig& config,
                               const DTable* table) {
  BayesFactorResult r;
  r.log_evidence_hierarchical = hierarchical_log_evidence(data, spec, config, table);
  BruteForceConfig pooled;
  pooled.prior_draws = config.prior_draws;
  pooled.stratified = config.stratified;
  pooled.seed = config.seed;
  pooled.max_centers = config.budget.max_centers;
  pooled.threads = config.threads;
  r.log_evidence_pooled = estimate_evidence(data.pooled(), spec.consensus, pooled);
  r.log_bayes_factor = r.log_evidence_hierarchical - r.log_evidence_pooled;
  r.interpretation = interpret_log_bayes_factor(r.log_bayes_factor);
  return r;
}

}  // namespace setvalued
