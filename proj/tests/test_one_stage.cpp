#include <doctest.h>

#include "oracles.hpp"
#include "setvalued/errors.hpp"
#include "setvalued/numeric.hpp"

using namespace setvalued;
using oracle::items;

namespace {

const ModelSpec& fisher_3_7() {
  static const ModelSpec spec = ModelSpec::defaults(FamilyKind::FisherNCH, 3, 7);
  return spec;
}

}  // namespace

TEST_CASE("log_likelihood") {
  const auto& spec = fisher_3_7();
  SUBCASE("single exact response") {
    Dataset d;
    d.ground = GroundSet(10);
    d.n = 3;
    d.observations.push_back({"a", items({1, 2, 3})});
    CHECK(log_likelihood(d, {items({1, 2, 3}), 1e-12, spec.family}) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("toy data: {1,2,3} maximizes the likelihood at fixed u") {
    const auto d = oracle::table1();
    for (double u : {0.05, 0.3, 0.9}) {
      Subset best;
      double best_ll = -1e300;
      for (Subset a : enumerate_subsets(10, 3)) {
        const double ll = log_likelihood(d, {a, u, spec.family});
        if (ll > best_ll) best_ll = ll, best = a;
      }
      CHECK(best == items({1, 2, 3}));
    }
  }
  SUBCASE("invariant under reordering responses and relabelling items") {
    const auto d = oracle::table1();
    auto reordered = d;
    std::reverse(reordered.observations.begin(), reordered.observations.end());
    // item permutation i -> (i + 3) mod 10 applied to data and centre
    const auto shift = [](Subset s) {
      std::vector<int> v;
      for (int i : s.indices()) v.push_back((i + 3) % 10);
      return Subset::from_indices(v);
    };
    auto relabelled = d;
    for (auto& o : relabelled.observations) o.subset = shift(o.subset);
    for (Subset a : {items({1, 2, 3}), items({1, 2, 4}), items({5, 6, 8})})
      for (double u : {0.1, 0.6}) {
        const double ll = log_likelihood(d, {a, u, spec.family});
        CHECK(log_likelihood(reordered, {a, u, spec.family}) == doctest::Approx(ll).epsilon(1e-12));
        CHECK(log_likelihood(relabelled, {shift(a), u, spec.family}) == doctest::Approx(ll).epsilon(1e-12));
      }
  }
  SUBCASE("sum of per-response log probabilities") {
    const auto d = oracle::table1();
    const HammingModel m{items({1, 2, 7}), 0.35, spec.family};
    double want = 0.0;
    for (const auto& o : d.observations) want += hamming_log_pmf(m, o.subset);
    CHECK(log_likelihood(d, m) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("brute force on the toy data") {
  const auto d = oracle::table1();
  const auto post = brute_force_posterior(d, fisher_3_7(), {});
  REQUIRE_FALSE(post.center_support.empty());
  CHECK(post.center_support.front().center == items({1, 2, 3}));
  CHECK(post.center_support.front().probability >= 1 - 1e-6);
  CHECK(post.mode() == items({1, 2, 3}));
  CHECK(post.samples.size() == 1000);
  double sum = 0.0;
  for (const auto& c : post.center_support) sum += c.probability;
  CHECK(sum <= 1 + 1e-9);
  for (const auto& s : post.samples) {
    CHECK(s.dispersion > 0.0);
    CHECK(s.dispersion <= 1.0);
  }
  CHECK(post.diagnostics.method == "brute-force");
  CHECK(std::isfinite(post.log_evidence));
}

TEST_CASE("brute force: one response and u near one give a near-uniform posterior") {
  Dataset d;
  d.ground = GroundSet(10);
  d.n = 3;
  d.observations.push_back({"a", items({4, 5, 6})});
  const ModelSpec spec{DispersionFamily::fisher(3, 7), DispersionPrior::beta(400.0, 1.0, 1.0)};
  BruteForceConfig cfg;
  cfg.epsilon = 1e-6;
  const auto post = brute_force_posterior(d, spec, cfg);
  CHECK(post.center_support.size() == 120);
  for (const auto& c : post.center_support) CHECK(c.probability == doctest::Approx(1.0 / 120).epsilon(0.02));
}

TEST_CASE("brute force matches the exact posterior on small synthetic data") {
  const auto spec = ModelSpec::defaults(FamilyKind::FisherNCH, 2, 4);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto d = oracle::synthetic_pooled(seed, 0.4, 6, 2, 4, items({1, 2}));
    BruteForceConfig cfg;
    cfg.seed = seed;
    cfg.epsilon = 1e-6;
    const auto post = brute_force_posterior(d, spec, cfg);
    CHECK(oracle::total_variation(oracle::exact_posterior(d, spec), post.center_support) < 0.005);
  }
}

TEST_CASE("brute force with the binomial family") {
  const auto spec = ModelSpec::defaults(FamilyKind::Binomial, 2, 4);
  Dataset d;
  d.ground = GroundSet(6);
  d.n = 2;
  d.observations = {{"a", items({1, 2})}, {"b", items({1, 3})}, {"c", items({1, 2})}};
  BruteForceConfig cfg;
  cfg.epsilon = 1e-6;
  const auto post = brute_force_posterior(d, spec, cfg);
  CHECK(oracle::total_variation(oracle::exact_posterior(d, spec), post.center_support) < 0.005);
  for (const auto& s : post.samples) CHECK(s.dispersion <= spec.family.upper());
}

TEST_CASE("truncation consistency") {
  const auto d = oracle::synthetic_pooled(4, 0.6, 8, 3, 6, items({1, 2, 3}));
  const auto spec = ModelSpec::defaults(FamilyKind::FisherNCH, 3, 5);
  BruteForceConfig coarse, fine;
  coarse.epsilon = 0.01;
  fine.epsilon = 1e-4;
  const auto a = brute_force_posterior(d, spec, coarse);
  const auto b = brute_force_posterior(d, spec, fine);
  CHECK(b.center_support.size() >= a.center_support.size());
  double kept = 0.0;
  for (const auto& c : a.center_support) kept += c.probability;
  const double discarded = 1.0 - kept;
  for (const auto& c : a.center_support)
    CHECK(std::abs(c.probability - oracle::probability_of(b.center_support, c.center)) <= discarded + 1e-12);
}

TEST_CASE("budget and degenerate configurations") {
  Dataset d;
  d.ground = GroundSet(40);
  d.n = 20;
  d.observations.push_back({"a", unrank_subset(40, 20, 0)});
  CHECK_THROWS_AS(brute_force_posterior(d, ModelSpec::defaults(FamilyKind::FisherNCH, 20, 20), {}), BudgetError);
  BruteForceConfig bad;
  bad.epsilon = 1e5;  // above #P_n^2 = 14400, so nothing survives
  CHECK_THROWS_AS(brute_force_posterior(oracle::table1(), fisher_3_7(), bad), NumericalError);
}

TEST_CASE("conditional draws of u follow the integrated conditional CDF") {
  const auto d = oracle::table1();
  const auto& spec = fisher_3_7();
  BruteForceConfig cfg;
  cfg.posterior_samples = 10'000;
  const auto post = brute_force_posterior(d, spec, cfg);
  std::vector<double> us;
  for (const auto& s : post.samples)
    if (s.center == items({1, 2, 3})) us.push_back(s.dispersion);
  REQUIRE(us.size() > 9'900);
  std::sort(us.begin(), us.end());
  // exact conditional CDF of u given A = {1,2,3}
  const HammingModel base{items({1, 2, 3}), 0.5, spec.family};
  auto log_f = [&](double u) {
    HammingModel m = base;
    m.dispersion = u;
    return log_likelihood(d, m);
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  const double shift = log_f(0.04);
  auto dens = [&](double u) { return u <= 0.0 ? 0.0 : std::exp(log_f(u) - shift) * prior_density_u(u); };
  const double z = ts.integrate(dens, 0.0, 1.0);
  double dmax = 0.0;
  const std::size_t step = 50;
  for (std::size_t i = 0; i < us.size(); i += step) {
    const double f = ts.integrate(dens, 0.0, us[i]) / z;
    dmax = std::max({dmax, std::abs(f - (i + 1.0) / us.size()), std::abs(f - static_cast<double>(i) / us.size())});
  }
  const double band = std::sqrt(std::log(2 / 0.001) / (2.0 * static_cast<double>(us.size())));
  CHECK(dmax < band);
}

TEST_CASE("evidence") {
  const auto& spec = fisher_3_7();
  SUBCASE("empty data") {
    Dataset d;
    d.ground = GroundSet(10);
    d.n = 3;
    CHECK(estimate_evidence(d, spec, {}) == 0.0);
  }
  SUBCASE("single response against quadrature") {
    const auto s = ModelSpec::defaults(FamilyKind::FisherNCH, 2, 4);
    Dataset d;
    d.ground = GroundSet(6);
    d.n = 2;
    d.observations.push_back({"a", items({2, 5})});
    // sum_A P_{A,u}(X) = 1 for every u, so P(X) = 1 / C(6, 2) exactly
    CHECK(estimate_evidence(d, s, {}) == doctest::Approx(std::log(1.0 / 15)).epsilon(1e-12));
    CHECK(oracle::exact_log_evidence(d, s) == doctest::Approx(std::log(1.0 / 15)).epsilon(1e-8));
  }
  SUBCASE("toy data: seeds scatter around the exact value") {
    const auto d = oracle::table1();
    const double exact = oracle::exact_log_evidence(d, spec);
    std::vector<double> est;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      BruteForceConfig cfg;
      cfg.seed = seed;
      est.push_back(estimate_evidence(d, spec, cfg));
    }
    double m = mean(est), var = 0.0;
    for (double e : est) var += (e - m) * (e - m);
    const double sd = std::sqrt(var / (est.size() - 1));
    CHECK(sd < 0.5);
    for (double e : est) CHECK(std::abs(e - exact) < 3 * sd + 1e-3);
    CHECK(std::abs(m - exact) < 3 * sd / std::sqrt(10.0) + 1e-3);
  }
}

TEST_CASE("MCMC on the toy data agrees with brute force") {
  const auto d = oracle::table1();
  McmcConfig cfg;
  cfg.iterations = 100'000;
  cfg.burn_in = 10'000;
  const auto post = mcmc_posterior(d, fisher_3_7(), cfg);
  const auto bf = brute_force_posterior(d, fisher_3_7(), {});
  CHECK(std::abs(oracle::probability_of(post.center_support, items({1, 2, 3})) - bf.center_support.front().probability) < 0.01);
  CHECK(post.diagnostics.chains == 30);
  CHECK(post.diagnostics.dispersion_acceptance > 0.01);
  CHECK(post.diagnostics.dispersion_acceptance < 0.9);
  for (const auto& s : post.samples) {
    CHECK(s.dispersion > 0.0);
    CHECK(s.dispersion <= 1.0);
  }
}

TEST_CASE("MCMC: unanimous responses drive u towards zero") {
  Dataset d;
  d.ground = GroundSet(8);
  d.n = 3;
  for (int i = 0; i < 20; ++i) d.observations.push_back({"o" + std::to_string(i), items({2, 4, 6})});
  McmcConfig cfg;
  cfg.iterations = 50'000;
  cfg.burn_in = 5'000;
  cfg.thin = 10;
  cfg.chains = 4;
  const auto post = mcmc_posterior(d, ModelSpec::defaults(FamilyKind::FisherNCH, 3, 5), cfg);
  std::vector<double> us;
  for (const auto& s : post.samples) us.push_back(s.dispersion);
  CHECK(median(us) < 0.05);
  CHECK(post.mode() == items({2, 4, 6}));
}

TEST_CASE("MCMC with flat proposals targets the same posterior") {
  const auto spec = ModelSpec::defaults(FamilyKind::FisherNCH, 2, 4);
  const auto d = oracle::synthetic_pooled(9, 0.5, 6, 2, 5, items({1, 2}));
  const auto exact = oracle::exact_posterior(d, spec);
  for (bool weighted : {true, false}) {
    McmcConfig cfg;
    cfg.iterations = 100'000;
    cfg.burn_in = 10'000;
    cfg.thin = 5;
    cfg.chains = 8;
    cfg.weighted_proposal = weighted;
    const auto post = mcmc_posterior(d, spec, cfg);
    CHECK(oracle::total_variation(exact, post.center_support) < 0.02);
  }
}

TEST_CASE("MCMC centre move satisfies detailed balance on a two-state target") {
  // M = 2, n = 1: states {1} and {2}; both responses are {1}. At fixed u the
  // kernel moves {1} -> {2} with probability (1/4) min(1, 3 u^2) and
  // {2} -> {1} with probability (3/4) min(1, 1 / (3 u^2)).
  Dataset d;
  d.ground = GroundSet(2);
  d.n = 1;
  d.observations = {{"a", items({1})}, {"b", items({1})}};
  const auto spec = ModelSpec::defaults(FamilyKind::FisherNCH, 1, 1);
  const double u = 0.5;
  CenterDispersionChain chain(d, spec, 0.5, true, items({1}), u);
  CounterRng rng(41);
  std::uint64_t from1 = 0, move12 = 0, from2 = 0, move21 = 0;
  for (int i = 0; i < 200'000; ++i) {
    const Subset before = chain.center();
    chain.step_center(rng);
    const Subset after = chain.center();
    if (before == items({1})) {
      ++from1;
      move12 += after != before;
    } else {
      ++from2;
      move21 += after != before;
    }
  }
  const double p12 = 0.25 * std::min(1.0, 3 * u * u);
  const double p21 = 0.75 * std::min(1.0, 1 / (3 * u * u));
  const auto within = [](std::uint64_t hits, std::uint64_t trials, double p) {
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
    return std::abs(static_cast<double>(hits) / static_cast<double>(trials) - p) < 5 * se;
  };
  CHECK(within(move12, from1, p12));
  CHECK(within(move21, from2, p21));
  // stationary ratio pi({1}) / pi({2}) = 1 / u^2
  CHECK(static_cast<double>(from1) / static_cast<double>(from2) == doctest::Approx(1 / (u * u)).epsilon(0.05));
}

TEST_CASE("MCMC dispersion move leaves the conditional of u invariant") {
  const auto d = oracle::table1();
  const auto& spec = fisher_3_7();
  CenterDispersionChain chain(d, spec, 0.5, true, items({1, 2, 3}), 0.5);
  CounterRng rng(42);
  std::vector<double> us;
  for (int i = 0; i < 400'000; ++i) {
    chain.step_dispersion(rng);
    if (i >= 10'000 && i % 20 == 0) us.push_back(chain.dispersion());
  }
  BruteForceConfig cfg;
  cfg.posterior_samples = 20'000;
  const auto post = brute_force_posterior(d, spec, cfg);
  std::vector<double> ref;
  for (const auto& s : post.samples) ref.push_back(s.dispersion);
  for (double p : {0.1, 0.5, 0.9}) CHECK(quantile(us, p) == doctest::Approx(quantile(ref, p)).epsilon(0.05));
}

TEST_CASE("posterior p-values on the toy data") {
  const auto d = oracle::table1();
  const auto post = brute_force_posterior(d, fisher_3_7(), {});
  const auto report = posterior_p_values(d, fisher_3_7(), post);
  REQUIRE(report.rows.size() == 12);
  CHECK(report.mode == items({1, 2, 3}));
  for (std::size_t i = 0; i < 11; ++i) {
    CHECK(report.rows[i].p_value > 0.05);
    CHECK(report.rows[i].signal == Signal::None);
  }
  CHECK(report.rows[11].p_value == doctest::Approx(0.002).epsilon(0.5));
  CHECK(report.rows[11].deviations == 3);
  CHECK(report.rows[11].signal == Signal::Action);
  CHECK(report.rows[0].p_value == doctest::Approx(1.0));
}

TEST_CASE("posterior p-values at a fixed parameter equal the tail sum") {
  const auto d = oracle::table1();
  PosteriorOneStage post;
  post.center_support.push_back({items({1, 2, 3}), 1.0, 0.0});
  for (int i = 0; i < 100; ++i) post.samples.push_back({items({1, 2, 3}), 0.3});
  const auto report = posterior_p_values(d, fisher_3_7(), post);
  const auto e = fisher_nch_pmf(0.3, 3, 7);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int k = overlap_outside(d.observations[i].subset, items({1, 2, 3}));
    double tail = 0.0;
    for (int j = k; j <= 3; ++j) tail += e[static_cast<std::size_t>(j)];
    CHECK(report.rows[i].p_value == doctest::Approx(tail).epsilon(1e-12));
  }
  post.samples.resize(99);
  CHECK_THROWS_AS(posterior_p_values(d, fisher_3_7(), post), InputError);
}

TEST_CASE("signal thresholds") {
  SignalThresholds t;
  CHECK(t.classify(0.2) == Signal::None);
  CHECK(t.classify(0.03) == Signal::Alert);
  CHECK(t.classify(0.001) == Signal::Action);
  CHECK(to_string(Signal::Alert) == "alert");
  SignalThresholds bad{0.01, 0.05};
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("results are reproducible for a fixed seed and independent of threads") {
  const auto d = oracle::synthetic_pooled(2, 0.5, 10, 3, 30, items({1, 2, 3}));
  BruteForceConfig one, four;
  four.threads = 4;
  const auto a = brute_force_posterior(d, fisher_3_7(), one);
  const auto b = brute_force_posterior(d, fisher_3_7(), four);
  REQUIRE(a.center_support.size() == b.center_support.size());
  for (std::size_t i = 0; i < a.center_support.size(); ++i) {
    CHECK(a.center_support[i].center == b.center_support[i].center);
    CHECK(a.center_support[i].probability == b.center_support[i].probability);
  }
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].dispersion == b.samples[i].dispersion);
  CHECK(a.log_evidence == b.log_evidence);
}
