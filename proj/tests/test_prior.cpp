#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "oracles.hpp"
#include "setvalued/errors.hpp"
#include "setvalued/numeric.hpp"

using namespace setvalued;

TEST_CASE("prior density integrates to one") {
  boost::math::quadrature::tanh_sinh<double> ts;
  const double total = ts.integrate([](double u) { return u <= 0.0 ? 0.0 : prior_density_u(u); }, 0.0, 1.0);
  CHECK(std::abs(total - 1.0) < 1e-8);
}

TEST_CASE("prior density at and around one") {
  CHECK(prior_density_u(1.0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  // numerical limit
  CHECK(prior_density_u(1.0 - 1e-6) == doctest::Approx(1.0 / 3).epsilon(1e-5));
  for (double d : {1e-4, -1e-4}) {
    const double u = 1.0 + d;
    if (u > 1.0) continue;
    CHECK(std::abs(prior_density_u_series(u) - prior_density_u(u)) < 1e-9);
  }
  // direct formula evaluated with long double just outside the series band
  const long double u = 1.0L - 2e-4L;
  const long double direct = (4 * (1 - u) + 2 * (u + 1) * std::log(u)) / ((u - 1) * (u - 1) * (u - 1));
  CHECK(prior_density_u(static_cast<double>(u)) == doctest::Approx(static_cast<double>(direct)).epsilon(1e-6));
  CHECK_THROWS_AS(prior_density_u(0.0), InputError);
  CHECK_THROWS_AS(prior_density_u(1.5), InputError);
}

TEST_CASE("prior density is finite near zero") {
  for (double u : {1e-300, 1e-100, 1e-20, 1e-8}) {
    const double g = prior_density_u(u);
    CHECK(std::isfinite(g));
    CHECK(g == doctest::Approx(-2 * std::log(u) - 4).epsilon(1e-6));
  }
}

TEST_CASE("prior CDF and quantile") {
  boost::math::quadrature::tanh_sinh<double> ts;
  const auto prior = DispersionPrior::triangle();
  for (double u : {1e-6, 0.01, 0.2, 0.5, 0.9, 0.9999, 1.0}) {
    const double want = ts.integrate([](double v) { return v <= 0.0 ? 0.0 : prior_density_u(v); }, 0.0, u);
    CHECK(prior_cdf_u(u) == doctest::Approx(want).epsilon(1e-9));
    CHECK(prior.cdf(u) == doctest::Approx(want).epsilon(1e-9));
  }
  for (double p : {1e-9, 0.001, 0.3, 0.5, 0.77, 0.999999}) CHECK(prior.cdf(prior.quantile(p)) == doctest::Approx(p).epsilon(1e-10));
}

TEST_CASE("triangle pushforward histogram matches g") {
  // u = p2 (1 - p1) / (p1 (1 - p2)) for (p1, p2) uniform on {0 < p2 <= p1 < 1}
  const int draws = 200'000, bins = 50;
  CounterRng rng(31);
  std::vector<double> counts(bins, 0.0);
  for (int i = 0; i < draws; ++i) {
    double a = rng.uniform_open(), b = rng.uniform_open();
    const double p1 = std::max(a, b), p2 = std::min(a, b);
    const double u = p2 * (1 - p1) / (p1 * (1 - p2));
    counts[std::min(bins - 1, static_cast<int>(u * bins))] += 1.0;
  }
  double worst = 0.0;
  for (int j = 0; j < bins; ++j) {
    const double p = prior_cdf_u((j + 1.0) / bins) - prior_cdf_u(static_cast<double>(j) / bins);
    const double se = std::sqrt(draws * p * (1 - p));
    worst = std::max(worst, std::abs(counts[static_cast<std::size_t>(j)] - draws * p) / se);
  }
  CHECK(worst < 4.0);
}

TEST_CASE("prior sampling obeys the DKW band") {
  const auto prior = DispersionPrior::triangle();
  CounterRng rng(32);
  const int n = 20'000;
  std::vector<double> xs;
  for (int i = 0; i < n; ++i) xs.push_back(prior.sample(rng));
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = prior.cdf(xs[static_cast<std::size_t>(i)]);
    d = std::max({d, std::abs(f - (i + 1.0) / n), std::abs(f - static_cast<double>(i) / n)});
  }
  CHECK(d < std::sqrt(std::log(2 / 0.001) / (2.0 * n)));
}

TEST_CASE("stratified draws place one point per CDF stratum") {
  const auto prior = DispersionPrior::triangle();
  CounterRng rng(33);
  const auto xs = prior.stratified_draws(1000, rng);
  REQUIRE(xs.size() == 1000);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double p = prior.cdf(xs[j]);
    CHECK(p >= j / 1000.0 - 1e-9);
    CHECK(p <= (j + 1) / 1000.0 + 1e-9);
  }
}

TEST_CASE("truncated Beta prior") {
  const auto prior = DispersionPrior::beta(2.0, 3.0, 0.7);
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  CHECK(gk.integrate([&](double u) { return prior.density(u); }, 0.0, 0.7) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(prior.cdf(0.35) == doctest::Approx(boost::math::ibeta(2.0, 3.0, 0.35) / boost::math::ibeta(2.0, 3.0, 0.7)));
  CHECK(prior.quantile(prior.cdf(0.2)) == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(prior.upper() == 0.7);
  const auto flat = DispersionPrior::default_for(DispersionFamily::binomial(3, 7));
  CHECK(flat.density(0.3) == doctest::Approx(1.0 / 0.7));
  CHECK(flat.kind() == DispersionPrior::Kind::Beta);
  CHECK(DispersionPrior::default_for(DispersionFamily::fisher(3, 7)).kind() == DispersionPrior::Kind::Triangle);
}

TEST_CASE("prior quadrature integrates against the prior") {
  for (const auto& prior : {DispersionPrior::triangle(), DispersionPrior::beta(1.0, 1.0, 0.7)}) {
    const auto rule = prior_quadrature(prior, 256);
    double mass = 0.0, first = 0.0;
    for (std::size_t m = 0; m < rule.nodes.size(); ++m) {
      mass += rule.weights[m];
      first += rule.weights[m] * rule.nodes[m];
    }
    boost::math::quadrature::tanh_sinh<double> ts;
    const double want = ts.integrate([&](double u) { return u <= 0.0 ? 0.0 : u * prior.density(u); }, 0.0, prior.upper());
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(first == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> v{-1000.0, -1000.0};
  CHECK(log_sum_exp(v) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(std::isinf(log_sum_exp(std::vector<double>{})));
  LogSumAccumulator acc;
  acc.add(std::log(0.25));
  acc.add(std::log(0.5));
  acc.add(-std::numeric_limits<double>::infinity());
  CHECK(acc.value() == doctest::Approx(std::log(0.75)));
}

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
  const auto rule = gauss_legendre(8);
  for (int deg = 0; deg <= 15; ++deg) {
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], deg);
    const double want = deg % 2 ? 0.0 : 2.0 / (deg + 1);
    CHECK(s == doctest::Approx(want).epsilon(1e-13));
  }
  const auto one = gauss_legendre(1);
  CHECK(one.weights[0] == doctest::Approx(2.0));
}

TEST_CASE("grid distribution inverts its CDF") {
  const auto mids = grid_midpoints(0.0, 1.0, 1000);
  std::vector<double> logd;
  for (double m : mids) logd.push_back(std::log(2 * m));  // density 2u
  const GridDistribution grid(0.0, 1.0, logd);
  CHECK(grid.log_mass() == doctest::Approx(0.0).epsilon(1e-6));
  for (double u : {0.1, 0.5, 0.9}) {
    CHECK(grid.cdf(u) == doctest::Approx(u * u).epsilon(1e-5));
    CHECK(grid.quantile(u * u) == doctest::Approx(u).epsilon(1e-5));
  }
  CounterRng rng(34);
  double mean_u = 0.0;
  for (int i = 0; i < 100'000; ++i) mean_u += grid.sample(rng);
  CHECK(mean_u / 100'000 == doctest::Approx(2.0 / 3).epsilon(0.01));
}

TEST_CASE("chi-square tail and test") {
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi_square_sf(0.0, 3) == 1.0);
  const std::vector<std::uint64_t> fair{250, 250, 250, 250};
  CHECK(chi_square_test(fair, std::vector<double>(4, 0.25)).p_value == doctest::Approx(1.0));
  const std::vector<std::uint64_t> biased{400, 200, 200, 200};
  CHECK(chi_square_test(biased, std::vector<double>(4, 0.25)).p_value < 1e-6);
}

TEST_CASE("order statistics") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(quantile({0.0, 1.0}, 0.25) == doctest::Approx(0.25));
  const std::vector<double> v{1.0, 2.0, 6.0};
  CHECK(mean(v) == 3.0);
}

TEST_CASE("counter RNG streams are reproducible and distinct") {
  CounterRng a(1, 0), b(1, 0), c(1, 1);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
  }
  CounterRng r(2);
  std::vector<std::uint64_t> h(7, 0);
  for (int i = 0; i < 70'000; ++i) ++h[r.below(7)];
  CHECK(chi_square_test(h, std::vector<double>(7, 1.0 / 7)).p_value > 0.01);
}
