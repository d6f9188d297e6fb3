#include "setvalued/one_stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "inference_common.hpp"
#include "setvalued/errors.hpp"
#include "setvalued/numeric.hpp"

namespace setvalued {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct HistogramHash {
  std::size_t operator()(const std::vector<int>& h) const noexcept {
    std::uint64_t x = 0xcbf29ce484222325ULL;
    for (int v : h) {
      x ^= static_cast<std::uint64_t>(v);
      x *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(x);
  }
};

void check_compatible(const Dataset& data, const ModelSpec& spec) {
  data.validate();
  if (spec.family.n() != data.n || spec.family.N() != data.outside())
    throw InputError("model family dimensions do not match the data");
}

void deviation_histogram(std::span<const Subset> subsets, Subset center, std::vector<int>& histogram) {
  std::fill(histogram.begin(), histogram.end(), 0);
  for (const auto& x : subsets) ++histogram[static_cast<std::size_t>(x.without(center).size())];
}

double histogram_log_point(std::span<const int> histogram, const double* row) {
  double v = 0.0;
  for (std::size_t k = 0; k < histogram.size(); ++k)
    if (histogram[k] != 0) v += histogram[k] * row[k];
  return std::isnan(v) ? kNegInf : v;
}

// ln P^(X | A) for every centre, by rank, from common prior draws.
std::vector<double> pooled_log_marginals(const Dataset& data, const ModelSpec& spec, std::span<const double> prior_us,
                                         int threads) {
  const int M = data.universe();
  const int n = data.n;
  const std::uint64_t total = binomial(M, n);
  const auto table = detail::log_point_table(spec.family, prior_us);
  const std::size_t width = static_cast<std::size_t>(n) + 1;
  const auto subsets = data.subsets();
  const double log_draws = std::log(static_cast<double>(prior_us.size()));
  std::vector<double> out(total);

  detail::parallel_for(total, threads, [&](std::uint64_t begin, std::uint64_t end) {
    std::unordered_map<std::vector<int>, double, HistogramHash> memo;
    std::vector<int> histogram(width);
    std::vector<double> per_draw(prior_us.size());
    std::uint64_t rank = begin;
    for (Subset center : enumerate_subset_ranks(M, n, begin, end - begin)) {
      deviation_histogram(subsets, center, histogram);
      auto it = memo.find(histogram);
      if (it == memo.end()) {
        for (std::size_t j = 0; j < prior_us.size(); ++j)
          per_draw[j] = histogram_log_point(histogram, table.data() + j * width);
        it = memo.emplace(histogram, log_sum_exp(per_draw) - log_draws).first;
      }
      out[rank++] = it->second;
    }
  });
  return out;
}

}  // namespace

Subset PosteriorOneStage::mode() const {
  if (center_support.empty()) throw InputError("posterior has an empty centre support");
  return center_support.front().center;
}

double log_likelihood(const Dataset& data, const HammingModel& model) {
  double total = 0.0;
  const auto log_e = model.family.log_pmf(model.dispersion);
  for (const auto& o : data.observations) {
    const int k = overlap_outside(o.subset, model.center);
    total += log_e[static_cast<std::size_t>(k)] - model.family.log_counts()[static_cast<std::size_t>(k)];
  }
  return total;
}

double estimate_evidence(const Dataset& data, const ModelSpec& spec, const BruteForceConfig& config) {
  check_compatible(data, spec);
  (void)enumerate_subsets(data.universe(), data.n, config.max_centers);
  CounterRng prior_rng(config.seed, detail::kPriorStream);
  const auto us = detail::draw_prior(spec.prior, config.prior_draws, config.stratified, prior_rng);
  const auto marginals = pooled_log_marginals(data, spec, us, config.threads);
  return log_sum_exp(marginals) - std::log(static_cast<double>(marginals.size()));
}

PosteriorOneStage brute_force_posterior(const Dataset& data, const ModelSpec& spec, const BruteForceConfig& config) {
  check_compatible(data, spec);
  const int M = data.universe();
  const int n = data.n;
  const std::uint64_t total = enumerate_subsets(M, n, config.max_centers).count();

  CounterRng prior_rng(config.seed, detail::kPriorStream);
  const auto us = detail::draw_prior(spec.prior, config.prior_draws, config.stratified, prior_rng);
  const auto centers = detail::summarize_centers(pooled_log_marginals(data, spec, us, config.threads), config.epsilon);

  PosteriorOneStage posterior;
  posterior.log_evidence = centers.log_evidence;
  posterior.diagnostics.method = "brute-force";
  posterior.diagnostics.seed = config.seed;
  posterior.diagnostics.centers_enumerated = total;
  posterior.diagnostics.retained_mass = centers.retained_mass;
  posterior.diagnostics.prior_draws = config.prior_draws;
  posterior.diagnostics.cdf_grid = config.cdf_grid;
  for (std::size_t i = 0; i < centers.retained.size(); ++i)
    posterior.center_support.push_back({unrank_subset(M, n, centers.retained[i]), centers.retained_probability[i], 0.0});

  if (config.posterior_samples > 0) {
    const auto grid = detail::DispersionGrid::build(spec, config.cdf_grid);
    const detail::RetainedSampler pick(centers);
    const auto subsets = data.subsets();
    std::map<std::size_t, GridDistribution> conditionals;
    std::vector<int> histogram(static_cast<std::size_t>(n) + 1);
    CounterRng rng(config.seed, detail::kSamplingStream);
    posterior.samples.reserve(static_cast<std::size_t>(config.posterior_samples));
    for (int s = 0; s < config.posterior_samples; ++s) {
      const std::size_t slot = pick.draw(rng);
      const Subset center = posterior.center_support[slot].center;
      auto it = conditionals.find(slot);
      if (it == conditionals.end()) {
        deviation_histogram(subsets, center, histogram);
        it = conditionals.emplace(slot, grid.conditional(histogram)).first;
      }
      posterior.samples.push_back({center, it->second.sample(rng)});
    }
  }
  return posterior;
}

// ---------------------------------------------------------------------------

CenterDispersionChain::CenterDispersionChain(const Dataset& data, const ModelSpec& spec, double sigma2,
                                             bool weighted_proposal, Subset initial_center, double initial_dispersion)
    : spec_(spec),
      universe_(data.universe()),
      n_(data.n),
      step_sd_(std::sqrt(sigma2)),
      center_(initial_center),
      dispersion_(initial_dispersion) {
  if (!(sigma2 > 0.0)) throw InputError("proposal variance must be positive");
  if (initial_center.size() != n_) throw InputError("initial centre has the wrong cardinality");
  const auto counts = data.selection_counts();
  weights_.resize(static_cast<std::size_t>(universe_));
  containing_.resize(static_cast<std::size_t>(universe_));
  for (int item = 0; item < universe_; ++item)
    weights_[static_cast<std::size_t>(item)] = weighted_proposal ? counts[static_cast<std::size_t>(item)] + 1.0 : 1.0;
  for (std::size_t i = 0; i < data.observations.size(); ++i)
    for (int item : data.observations[i].subset.indices()) containing_[static_cast<std::size_t>(item)].push_back(static_cast<int>(i));
  subsets_ = data.subsets();
  deviations_.resize(subsets_.size());
  histogram_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (std::size_t i = 0; i < subsets_.size(); ++i) {
    deviations_[i] = subsets_[i].without(center_).size();
    ++histogram_[static_cast<std::size_t>(deviations_[i])];
  }
  log_point_.resize(static_cast<std::size_t>(n_) + 1);
  scratch_.resize(log_point_.size());
  scratch_histogram_.resize(histogram_.size());
  refresh_log_point();
}

void CenterDispersionChain::refresh_log_point() {
  spec_.family.log_pmf(dispersion_, log_point_);
  for (std::size_t k = 0; k < log_point_.size(); ++k) log_point_[k] -= spec_.family.log_counts()[k];
  log_lik_ = histogram_log_likelihood(histogram_, log_point_);
}

double CenterDispersionChain::histogram_log_likelihood(std::span<const int> histogram,
                                                       std::span<const double> log_point) const {
  return histogram_log_point(histogram, log_point.data());
}

bool CenterDispersionChain::step_dispersion(CounterRng& rng) {
  const double lo = spec_.prior.lower();
  const double hi = std::min(spec_.prior.upper(), spec_.family.upper());
  const double width = hi - lo;
  const double s = (dispersion_ - lo) / width;
  const double w = std::log(s) - std::log1p(-s);
  const double w_new = w + step_sd_ * rng.normal();
  const double s_new = 1.0 / (1.0 + std::exp(-w_new));
  const double log_u = std::log(rng.uniform_open());
  if (!(s_new > 0.0 && s_new < 1.0)) return false;
  const double u_new = lo + width * s_new;
  if (!(u_new > lo && u_new < hi)) return false;

  spec_.family.log_pmf(u_new, scratch_);
  for (std::size_t k = 0; k < scratch_.size(); ++k) scratch_[k] -= spec_.family.log_counts()[k];
  const double ll_new = histogram_log_likelihood(histogram_, scratch_);
  const double log_ratio = ll_new - log_lik_ + spec_.prior.log_density(u_new) - spec_.prior.log_density(dispersion_) +
                           std::log(s_new) + std::log1p(-s_new) - std::log(s) - std::log1p(-s);
  if (!(log_u < log_ratio)) return false;
  dispersion_ = u_new;
  log_point_.swap(scratch_);
  log_lik_ = ll_new;
  return true;
}

bool CenterDispersionChain::step_center(CounterRng& rng) {
  const auto members = center_.indices();
  const int leaving = members[static_cast<std::size_t>(rng.below(members.size()))];

  // Candidates {leaving} ∪ (Ω \ A); the same set serves the reverse move,
  // so the normalizers cancel in the Hastings ratio.
  double total = 0.0;
  for (int item = 0; item < universe_; ++item)
    if (item == leaving || !center_.contains(item)) total += weights_[static_cast<std::size_t>(item)];
  double x = rng.uniform() * total;
  int entering = leaving;
  for (int item = 0; item < universe_; ++item) {
    if (item != leaving && center_.contains(item)) continue;
    entering = item;
    x -= weights_[static_cast<std::size_t>(item)];
    if (x < 0.0) break;
  }
  const double log_u = std::log(rng.uniform_open());
  if (entering == leaving) return true;

  std::copy(histogram_.begin(), histogram_.end(), scratch_histogram_.begin());
  for (int i : containing_[static_cast<std::size_t>(leaving)])
    if (!subsets_[static_cast<std::size_t>(i)].contains(entering)) {
      const auto k = static_cast<std::size_t>(deviations_[static_cast<std::size_t>(i)]);
      --scratch_histogram_[k];
      ++scratch_histogram_[k + 1];
    }
  for (int i : containing_[static_cast<std::size_t>(entering)])
    if (!subsets_[static_cast<std::size_t>(i)].contains(leaving)) {
      const auto k = static_cast<std::size_t>(deviations_[static_cast<std::size_t>(i)]);
      --scratch_histogram_[k];
      ++scratch_histogram_[k - 1];
    }
  const double ll_new = histogram_log_likelihood(scratch_histogram_, log_point_);
  const double log_ratio = ll_new - log_lik_ + std::log(weights_[static_cast<std::size_t>(leaving)]) -
                           std::log(weights_[static_cast<std::size_t>(entering)]);
  if (!(log_u < log_ratio)) return false;

  for (int i : containing_[static_cast<std::size_t>(leaving)])
    if (!subsets_[static_cast<std::size_t>(i)].contains(entering)) ++deviations_[static_cast<std::size_t>(i)];
  for (int i : containing_[static_cast<std::size_t>(entering)])
    if (!subsets_[static_cast<std::size_t>(i)].contains(leaving)) --deviations_[static_cast<std::size_t>(i)];
  histogram_.swap(scratch_histogram_);
  center_ = center_.without(leaving).with(entering);
  log_lik_ = ll_new;
  return true;
}

namespace {

struct ChainResult {
  std::unordered_map<std::uint64_t, std::uint64_t> visits;
  std::vector<JointSample> samples;
  std::uint64_t dispersion_accepted = 0;
  std::uint64_t center_accepted = 0;
};

}  // namespace

PosteriorOneStage mcmc_posterior(const Dataset& data, const ModelSpec& spec, const McmcConfig& config) {
  check_compatible(data, spec);
  if (config.iterations <= config.burn_in) throw InputError("MCMC: iterations must exceed burn-in");
  if (config.chains < 1 || config.thin < 1) throw InputError("MCMC: chains and thinning must be positive");
  const std::uint64_t kept = config.iterations - config.burn_in;
  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));

  detail::parallel_for(static_cast<std::uint64_t>(config.chains), config.threads, [&](std::uint64_t b, std::uint64_t e) {
    for (std::uint64_t c = b; c < e; ++c) {
      CounterRng rng(config.seed, detail::kChainStreamBase + c);
      const Subset start = sample_without_replacement(Subset(data.ground.full_mask()), data.n, rng);
      const double hi = std::min(spec.prior.upper(), spec.family.upper());
      const double u0 = std::clamp(spec.prior.sample(rng), spec.prior.lower() + 1e-9 * hi, hi * (1.0 - 1e-9));
      CenterDispersionChain chain(data, spec, config.sigma2, config.weighted_proposal, start, u0);
      auto& out = results[c];
      out.samples.reserve(static_cast<std::size_t>(kept / config.thin + 1));
      for (std::uint64_t it = 0; it < config.iterations; ++it) {
        out.dispersion_accepted += chain.step_dispersion(rng);
        out.center_accepted += chain.step_center(rng);
        if (it < config.burn_in) continue;
        ++out.visits[chain.center().mask()];
        if ((it - config.burn_in) % config.thin == 0) out.samples.push_back({chain.center(), chain.dispersion()});
      }
    }
  });

  PosteriorOneStage posterior;
  auto& diag = posterior.diagnostics;
  diag.method = "mcmc";
  diag.seed = config.seed;
  diag.chain_length = config.iterations;
  diag.burn_in = config.burn_in;
  diag.thin = config.thin;
  diag.chains = config.chains;

  std::map<std::uint64_t, std::vector<double>> frequencies;
  for (std::size_t c = 0; c < results.size(); ++c)
    for (const auto& [mask, count] : results[c].visits) {
      auto& f = frequencies[mask];
      f.resize(results.size(), 0.0);
      f[c] = static_cast<double>(count) / static_cast<double>(kept);
    }
  for (const auto& [mask, f] : frequencies) {
    const double m = mean(f);
    double var = 0.0;
    for (double v : f) var += (v - m) * (v - m);
    const double sd = f.size() > 1 ? std::sqrt(var / static_cast<double>(f.size() - 1)) : 0.0;
    posterior.center_support.push_back({Subset(mask), m, sd});
  }
  std::stable_sort(posterior.center_support.begin(), posterior.center_support.end(),
                   [](const CenterProbability& a, const CenterProbability& b) { return a.probability > b.probability; });

  double acc_u = 0.0;
  double acc_a = 0.0;
  for (auto& r : results) {
    acc_u += static_cast<double>(r.dispersion_accepted);
    acc_a += static_cast<double>(r.center_accepted);
    posterior.samples.insert(posterior.samples.end(), r.samples.begin(), r.samples.end());
  }
  const double moves = static_cast<double>(config.iterations) * config.chains;
  diag.dispersion_acceptance = acc_u / moves;
  diag.center_acceptance = acc_a / moves;
  for (auto [name, rate] : {std::pair{"dispersion", diag.dispersion_acceptance}, std::pair{"centre", diag.center_acceptance}}) {
    if (rate < 0.01) diag.warnings.push_back(std::string(name) + " acceptance rate below 1%");
    if (rate > 0.90) diag.warnings.push_back(std::string(name) + " acceptance rate above 90%");
  }
  return posterior;
}

// ---------------------------------------------------------------------------

std::string to_string(Signal s) {
  switch (s) {
    case Signal::None: return "none";
    case Signal::Alert: return "alert";
    case Signal::Action: return "action";
  }
  return "none";
}

void SignalThresholds::validate() const {
  if (!(action > 0.0 && alert > 0.0 && action < alert && alert < 1.0))
    throw InputError("signal thresholds must satisfy 0 < action < alert < 1");
}

Signal SignalThresholds::classify(double p_value) const noexcept {
  if (p_value < action) return Signal::Action;
  if (p_value < alert) return Signal::Alert;
  return Signal::None;
}

SignalReport posterior_p_values(const Dataset& data, const ModelSpec& spec, const PosteriorOneStage& posterior,
                                const SignalThresholds& thresholds) {
  thresholds.validate();
  if (posterior.samples.size() < 100)
    throw InputError("posterior p-values need at least 100 joint samples (got " +
                     std::to_string(posterior.samples.size()) + ")");
  const auto subsets = data.subsets();
  std::vector<double> sums(subsets.size(), 0.0);
  std::vector<double> tail(static_cast<std::size_t>(data.n) + 2, 0.0);
  for (const auto& sample : posterior.samples) {
    const auto e = spec.family.pmf(sample.dispersion);
    tail.back() = 0.0;
    for (std::size_t k = e.size(); k-- > 0;) tail[k] = tail[k + 1] + e[k];
    for (std::size_t i = 0; i < subsets.size(); ++i)
      sums[i] += std::min(1.0, tail[static_cast<std::size_t>(subsets[i].without(sample.center).size())]);
  }
  SignalReport report;
  report.mode = posterior.mode();
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    ObservationSignal row;
    row.id = data.observations[i].id;
    row.p_value = sums[i] / static_cast<double>(posterior.samples.size());
    row.deviations = subsets[i].without(report.mode).size();
    row.signal = thresholds.classify(row.p_value);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace setvalued
