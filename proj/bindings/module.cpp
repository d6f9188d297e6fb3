// Python module setvalued._core. Items cross the boundary as 1-based ints.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "setvalued/analysis.hpp"
#include "setvalued/errors.hpp"
#include "setvalued/io.hpp"
#include "setvalued/one_stage.hpp"
#include "setvalued/prior.hpp"
#include "setvalued/simulate.hpp"
#include "setvalued/two_stage.hpp"

namespace py = pybind11;
using namespace setvalued;

namespace {

Subset to_subset(const std::vector<int>& one_based, int universe) {
  std::vector<int> idx;
  for (int i : one_based) {
    if (i < 1 || i > universe)
      throw InputError("item " + std::to_string(i) + " outside 1.." + std::to_string(universe));
    idx.push_back(i - 1);
  }
  return Subset::from_indices(idx);
}

std::vector<int> to_items(Subset s) {
  auto v = s.indices();
  for (auto& i : v) ++i;
  return v;
}

Dataset to_dataset(const std::vector<std::vector<int>>& responses, int universe, int n) {
  Dataset d;
  d.ground = GroundSet(universe);
  d.n = n;
  for (std::size_t i = 0; i < responses.size(); ++i)
    d.observations.push_back({"X" + std::to_string(i + 1), to_subset(responses[i], universe)});
  d.validate();
  return d;
}

GroupedDataset to_grouped(const std::vector<std::vector<std::vector<int>>>& labs, int universe, int n) {
  GroupedDataset d;
  d.ground = GroundSet(universe);
  d.n = n;
  for (std::size_t l = 0; l < labs.size(); ++l) {
    Lab lab{"L" + std::to_string(l + 1), {}};
    for (std::size_t j = 0; j < labs[l].size(); ++j)
      lab.observations.push_back({"o" + std::to_string(j + 1), to_subset(labs[l][j], universe)});
    d.labs.push_back(std::move(lab));
  }
  d.validate();
  return d;
}

py::list support_list(const std::vector<CenterProbability>& support) {
  py::list out;
  for (const auto& c : support) out.append(py::make_tuple(to_items(c.center), c.probability));
  return out;
}

// Keys follow the report's "config" block.
AnalysisConfig config_from(const py::dict& options) {
  AnalysisConfig c;
  for (const auto& [key_obj, value] : options) {
    const auto key = py::cast<std::string>(key_obj);
    if (key == "model") c.model = parse_model(py::cast<std::string>(value));
    else if (key == "family") c.family = parse_family(py::cast<std::string>(value));
    else if (key == "inference") c.inference = parse_inference(py::cast<std::string>(value));
    else if (key == "epsilon") c.epsilon = py::cast<double>(value);
    else if (key == "prior_draws") c.prior_draws = py::cast<int>(value);
    else if (key == "stratified") c.stratified = py::cast<bool>(value);
    else if (key == "cdf_grid") c.cdf_grid = py::cast<int>(value);
    else if (key == "posterior_samples") c.posterior_samples = py::cast<int>(value);
    else if (key == "sigma2") c.sigma2 = py::cast<double>(value);
    else if (key == "iterations") c.iterations = py::cast<std::uint64_t>(value);
    else if (key == "burn_in") c.burn_in = py::cast<std::uint64_t>(value);
    else if (key == "thin") c.thin = py::cast<std::uint64_t>(value);
    else if (key == "chains") c.chains = py::cast<int>(value);
    else if (key == "weighted_proposal") c.weighted_proposal = py::cast<bool>(value);
    else if (key == "seed") c.seed = py::cast<std::uint64_t>(value);
    else if (key == "alert") c.thresholds.alert = py::cast<double>(value);
    else if (key == "action") c.thresholds.action = py::cast<double>(value);
    else if (key == "quadrature_nodes") c.quadrature_nodes = py::cast<int>(value);
    else if (key == "lab_gamma_threshold") c.lab_gamma_threshold = py::cast<double>(value);
    else if (key == "dtable_cache") c.dtable_cache = py::cast<std::string>(value);
    else if (key == "beta_a") c.beta_a = py::cast<double>(value);
    else if (key == "beta_b") c.beta_b = py::cast<double>(value);
    else if (key == "max_centers") c.budget.max_centers = py::cast<std::uint64_t>(value);
    else if (key == "max_operators") c.budget.max_operators = py::cast<int>(value);
    else if (key == "max_compositions") c.budget.max_compositions = py::cast<std::size_t>(value);
    else if (key == "max_work") c.budget.max_work = py::cast<double>(value);
    else if (key == "threads") c.threads = py::cast<int>(value);
    else throw InputError("unknown analysis option '" + key + "'");
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian analysis of set-valued interlaboratory data";
  m.attr("__version__") = kToolVersion;

  py::register_exception<BudgetError>(m, "BudgetError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("count_at_distance", &count_at_distance, py::arg("n"), py::arg("N"), py::arg("k"),
        "Number of n-subsets with k items outside a fixed n-subset of an (n + N)-set.");

  m.def(
      "dispersion_pmf",
      [](const std::string& family, double u, int n, int N) {
        return DispersionFamily::make(parse_family(family), n, N).pmf(u);
      },
      py::arg("family"), py::arg("u"), py::arg("n"), py::arg("N"), "e_u(k) for k = 0..n.");

  m.def(
      "hamming_pmf",
      [](const std::vector<int>& x, const std::vector<int>& center, double u, int universe, const std::string& family) {
        const int n = static_cast<int>(center.size());
        const HammingModel model{to_subset(center, universe), u,
                                 DispersionFamily::make(parse_family(family), n, universe - n)};
        return std::exp(hamming_log_pmf(model, to_subset(x, universe)));
      },
      py::arg("x"), py::arg("center"), py::arg("u"), py::arg("universe"), py::arg("family") = "fisher");

  m.def(
      "monotonicity",
      [](const std::string& family, double u, int n, int N) {
        const auto f = parse_family(family) == FamilyKind::Binomial ? DispersionFamily::binomial(n, N, 1.0)
                                                                    : DispersionFamily::fisher(n, N);
        return to_string(check_hamming_monotone(f, u));
      },
      py::arg("family"), py::arg("u"), py::arg("n"), py::arg("N"));

  m.def("prior_density", &prior_density_u, py::arg("u"));
  m.def("prior_cdf", &prior_cdf_u, py::arg("u"));

  m.def(
      "brute_force_posterior",
      [](const std::vector<std::vector<int>>& responses, int universe, int n, const std::string& family,
         double epsilon, int prior_draws, std::uint64_t seed, int threads) {
        const auto data = to_dataset(responses, universe, n);
        const auto spec = ModelSpec::defaults(parse_family(family), n, universe - n);
        BruteForceConfig cfg;
        cfg.epsilon = epsilon;
        cfg.prior_draws = prior_draws;
        cfg.seed = seed;
        cfg.threads = threads;
        PosteriorOneStage post;
        {
          py::gil_scoped_release release;
          post = brute_force_posterior(data, spec, cfg);
        }
        std::vector<double> us;
        for (const auto& s : post.samples) us.push_back(s.dispersion);
        const auto signals = posterior_p_values(data, spec, post);
        std::vector<double> p_values;
        for (const auto& r : signals.rows) p_values.push_back(r.p_value);
        py::dict out;
        out["support"] = support_list(post.center_support);
        out["u_samples"] = us;
        out["log_evidence"] = post.log_evidence;
        out["p_values"] = p_values;
        return out;
      },
      py::arg("responses"), py::arg("universe"), py::arg("n"), py::arg("family") = "fisher",
      py::arg("epsilon") = 0.01, py::arg("prior_draws") = 1000, py::arg("seed") = 1, py::arg("threads") = 1,
      "Posterior over the consensus set by enumeration. Responses are lists of 1-based items.");

  m.def(
      "mcmc_posterior",
      [](const std::vector<std::vector<int>>& responses, int universe, int n, const std::string& family,
         std::uint64_t iterations, std::uint64_t burn_in, std::uint64_t thin, int chains, std::uint64_t seed,
         int threads) {
        const auto data = to_dataset(responses, universe, n);
        const auto spec = ModelSpec::defaults(parse_family(family), n, universe - n);
        McmcConfig cfg;
        cfg.iterations = iterations;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.chains = chains;
        cfg.seed = seed;
        cfg.threads = threads;
        PosteriorOneStage post;
        {
          py::gil_scoped_release release;
          post = mcmc_posterior(data, spec, cfg);
        }
        std::vector<double> us;
        for (const auto& s : post.samples) us.push_back(s.dispersion);
        py::dict out;
        out["support"] = support_list(post.center_support);
        out["u_samples"] = us;
        out["dispersion_acceptance"] = post.diagnostics.dispersion_acceptance;
        out["center_acceptance"] = post.diagnostics.center_acceptance;
        return out;
      },
      py::arg("responses"), py::arg("universe"), py::arg("n"), py::arg("family") = "fisher",
      py::arg("iterations") = 1'000'000, py::arg("burn_in") = 100'000, py::arg("thin") = 46, py::arg("chains") = 30,
      py::arg("seed") = 1, py::arg("threads") = 1);

  m.def(
      "bayes_factor",
      [](const std::vector<std::vector<std::vector<int>>>& labs, int universe, int n, const std::string& family,
         std::uint64_t seed, int threads) {
        const auto data = to_grouped(labs, universe, n);
        const auto spec = HierarchicalSpec::defaults(parse_family(family), n, universe - n);
        TwoStageConfig cfg;
        cfg.seed = seed;
        cfg.threads = threads;
        BayesFactorResult r;
        {
          py::gil_scoped_release release;
          r = bayes_factor(data, spec, cfg);
        }
        py::dict out;
        out["log_evidence_hierarchical"] = r.log_evidence_hierarchical;
        out["log_evidence_pooled"] = r.log_evidence_pooled;
        out["log_bayes_factor"] = r.log_bayes_factor;
        out["interpretation"] = r.interpretation;
        return out;
      },
      py::arg("labs"), py::arg("universe"), py::arg("n"), py::arg("family") = "fisher", py::arg("seed") = 1,
      py::arg("threads") = 1, "Log Bayes factor of the laboratory-effect model against pooling all operators.");

  m.def(
      "simulate",
      [](const std::vector<int>& center, double u, int universe, const std::vector<int>& operators,
         std::optional<double> lab_u, const std::string& lab_effect, bool pooled, const std::string& family,
         std::uint64_t seed) {
        SimulationConfig cfg;
        cfg.family = parse_family(family);
        cfg.center = to_subset(center, universe);
        cfg.dispersion = u;
        cfg.operators = operators;
        cfg.lab_dispersion = lab_u;
        cfg.pooled = pooled;
        cfg.seed = seed;
        if (lab_effect == "random") cfg.lab_effect = LabEffect::Random;
        else if (lab_effect == "forced") cfg.lab_effect = LabEffect::Forced;
        else if (lab_effect == "none") cfg.lab_effect = LabEffect::None;
        else throw InputError("lab_effect must be random, forced or none");
        const auto sim = setvalued::simulate(GroundSet(universe), static_cast<int>(center.size()), cfg);
        std::vector<std::vector<std::vector<int>>> labs;
        for (const auto& lab : sim.data.labs) {
          labs.emplace_back();
          for (const auto& o : lab.observations) labs.back().push_back(to_items(o.subset));
        }
        std::vector<std::vector<int>> lab_centers;
        for (Subset c : sim.truth.lab_centers) lab_centers.push_back(to_items(c));
        py::dict out;
        out["labs"] = labs;
        out["lab_centers"] = lab_centers;
        out["lab_u"] = sim.truth.lab_dispersions;
        return out;
      },
      py::arg("center"), py::arg("u"), py::arg("universe"), py::arg("operators"), py::arg("lab_u") = py::none(),
      py::arg("lab_effect") = "random", py::arg("pooled") = false, py::arg("family") = "fisher", py::arg("seed") = 1);

  m.def(
      "analyze_csv",
      [](const std::string& path, int universe, int n, const py::dict& options) {
        const auto config = config_from(options);
        const auto data = read_csv_file(path, DataShape{universe, n, {}});
        AnalysisReport report;
        {
          py::gil_scoped_release release;
          report = run_analysis(config, data);
        }
        return py::make_tuple(report.json, report.sidecars);
      },
      py::arg("path"), py::arg("universe"), py::arg("n"), py::arg("options") = py::dict(),
      "Runs a full analysis on a CSV file; returns (report JSON text, {sidecar: TSV text}).");

  m.def(
      "check_distribution",
      [](const std::string& family, double u, int universe, int n, std::uint64_t draws, std::uint64_t seed) {
        return check_distribution(parse_family(family), u, universe, n, draws, seed);
      },
      py::arg("family"), py::arg("u"), py::arg("universe"), py::arg("n"), py::arg("draws"), py::arg("seed") = 1,
      "Sampled distance histogram against e_u plus the monotonicity verdict, as JSON text.");
}
