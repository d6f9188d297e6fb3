#include "inference_common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "setvalued/errors.hpp"
#include "setvalued/subsets.hpp"

namespace setvalued::detail {

void parallel_for(std::uint64_t total, int threads, const std::function<void(std::uint64_t, std::uint64_t)>& fn) {
  const auto workers = static_cast<std::uint64_t>(std::max(1, threads));
  if (workers == 1 || total < 2 * workers) {
    fn(0, total);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::uint64_t block = (total + workers - 1) / workers;
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t begin = w * block;
    const std::uint64_t end = std::min(total, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> draw_prior(const DispersionPrior& prior, int count, bool stratified, CounterRng& rng) {
  if (count < 1) throw InputError("the number of prior draws must be positive");
  if (stratified) return prior.stratified_draws(count, rng);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& u : out) u = prior.sample(rng);
  return out;
}

std::vector<double> log_point_table(const DispersionFamily& family, std::span<const double> us) {
  const std::size_t width = static_cast<std::size_t>(family.n()) + 1;
  std::vector<double> table(us.size() * width);
  for (std::size_t j = 0; j < us.size(); ++j) {
    std::span<double> row(table.data() + j * width, width);
    family.log_pmf(us[j], row);
    for (std::size_t k = 0; k < width; ++k) row[k] -= family.log_counts()[k];
  }
  return table;
}

DispersionGrid DispersionGrid::build(const ModelSpec& spec, int cells) {
  if (cells < 2) throw InputError("the CDF grid needs at least two cells");
  DispersionGrid grid;
  grid.lower = spec.prior.lower();
  grid.upper = std::min(spec.prior.upper(), spec.family.upper());
  grid.u = grid_midpoints(grid.lower, grid.upper, cells);
  grid.width = static_cast<std::size_t>(spec.family.n()) + 1;
  grid.log_prior.resize(grid.u.size());
  grid.log_pmf.resize(grid.u.size() * grid.width);
  for (std::size_t m = 0; m < grid.u.size(); ++m) {
    grid.log_prior[m] = spec.prior.log_density(grid.u[m]);
    spec.family.log_pmf(grid.u[m], std::span<double>(grid.log_pmf.data() + m * grid.width, grid.width));
  }
  return grid;
}

GridDistribution DispersionGrid::conditional(std::span<const int> histogram) const {
  std::vector<double> log_density(u.size());
  for (std::size_t m = 0; m < u.size(); ++m) {
    double v = log_prior[m];
    const auto row = log_pmf_row(m);
    for (std::size_t k = 0; k < width; ++k)
      if (histogram[k] != 0) v += histogram[k] * row[k];
    log_density[m] = std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  }
  return GridDistribution(lower, upper, log_density);
}

CenterPosterior summarize_centers(std::vector<double> log_marginal, double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("truncation epsilon must be positive");
  CenterPosterior out;
  out.log_marginal = std::move(log_marginal);
  const auto count = static_cast<double>(out.log_marginal.size());
  out.log_total = log_sum_exp(out.log_marginal);
  if (!std::isfinite(out.log_total)) throw NumericalError("the data have zero likelihood under every centre");
  out.log_evidence = out.log_total - std::log(count);
  const double threshold = std::log(epsilon) + out.log_evidence - std::log(count);
  std::vector<std::uint64_t> keep;
  for (std::uint64_t r = 0; r < out.log_marginal.size(); ++r)
    if (out.log_marginal[r] > threshold) keep.push_back(r);
  if (keep.empty()) throw NumericalError("truncation discarded every centre; decrease epsilon");
  std::stable_sort(keep.begin(), keep.end(), [&](std::uint64_t a, std::uint64_t b) {
    return out.log_marginal[a] > out.log_marginal[b];
  });
  out.retained = std::move(keep);
  out.retained_probability.reserve(out.retained.size());
  for (auto r : out.retained) {
    const double p = std::exp(out.log_marginal[r] - out.log_total);
    out.retained_probability.push_back(p);
    out.retained_mass += p;
  }
  return out;
}

RetainedSampler::RetainedSampler(const CenterPosterior& posterior) {
  cumulative_.resize(posterior.retained_probability.size());
  std::partial_sum(posterior.retained_probability.begin(), posterior.retained_probability.end(), cumulative_.begin());
  for (auto& c : cumulative_) c /= cumulative_.back();
}

std::size_t RetainedSampler::draw(CounterRng& rng) const {
  const double x = rng.uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

}  // namespace setvalued::detail
