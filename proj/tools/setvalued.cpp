#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "setvalued/analysis.hpp"
#include "setvalued/errors.hpp"
#include "setvalued/io.hpp"
#include "setvalued/simulate.hpp"

namespace sv = setvalued;
using nlohmann::ordered_json;

namespace {

struct Options {
  sv::AnalysisConfig config;
  std::string model = "pooled";
  std::string family = "fisher";
  std::string inference = "brute-force";
  double gamma_threshold = 0.0;
  int universe = 0;
  int subset_size = 0;
  std::string manifest;
  std::string data;
  std::string output;
};

void add_analysis_options(CLI::App& app, Options& o) {
  auto& c = o.config;
  auto env = [](CLI::Option* opt, const std::string& name) { opt->envname("SETVALUED_" + name); };
  env(app.add_option("--model", o.model, "pooled or hierarchical")->capture_default_str(), "MODEL");
  env(app.add_option("--family", o.family, "fisher or binomial")->capture_default_str(), "FAMILY");
  env(app.add_option("--inference", o.inference, "brute-force or mcmc")->capture_default_str(), "INFERENCE");
  env(app.add_option("--epsilon", c.epsilon, "brute-force truncation level")->capture_default_str(), "EPSILON");
  env(app.add_option("--n-mc", c.prior_draws, "prior draws for the evidence and marginals")->capture_default_str(),
      "N_MC");
  env(app.add_option("--stratified", c.stratified, "stratify the prior draws")->capture_default_str(), "STRATIFIED");
  env(app.add_option("--cdf-grid", c.cdf_grid, "grid cells for the conditional of u")->capture_default_str(),
      "CDF_GRID");
  env(app.add_option("--posterior-samples", c.posterior_samples, "joint samples drawn after brute force")
          ->capture_default_str(),
      "POSTERIOR_SAMPLES");
  env(app.add_option("--sigma2", c.sigma2, "random-walk variance on logit u")->capture_default_str(), "SIGMA2");
  env(app.add_option("--n-iter", c.iterations, "MCMC iterations per chain")->capture_default_str(), "N_ITER");
  env(app.add_option("--burn-in", c.burn_in, "MCMC burn-in")->capture_default_str(), "BURN_IN");
  env(app.add_option("--thin", c.thin, "MCMC thinning")->capture_default_str(), "THIN");
  env(app.add_option("--n-chains", c.chains, "independent MCMC chains")->capture_default_str(), "N_CHAINS");
  env(app.add_option("--weighted-proposal", c.weighted_proposal, "selection-count weighted swap proposal")
          ->capture_default_str(),
      "WEIGHTED_PROPOSAL");
  env(app.add_option("--seed", c.seed, "random seed")->capture_default_str(), "SEED");
  env(app.add_option("--alert", c.thresholds.alert, "alert p-value threshold")->capture_default_str(), "ALERT");
  env(app.add_option("--action", c.thresholds.action, "action p-value threshold")->capture_default_str(), "ACTION");
  env(app.add_option("--quad-nodes", c.quadrature_nodes, "Gauss-Legendre nodes over u_i")->capture_default_str(),
      "QUAD_NODES");
  env(app.add_option("--gamma-threshold", o.gamma_threshold, "flag labs whose median Gamma_i is below this"),
      "GAMMA_THRESHOLD");
  env(app.add_option("--dtable-cache", c.dtable_cache, "D-table cache file (loaded when valid, else rebuilt)"),
      "DTABLE_CACHE");
  env(app.add_option("--beta-a", c.beta_a, "binomial prior shape a")->capture_default_str(), "BETA_A");
  env(app.add_option("--beta-b", c.beta_b, "binomial prior shape b")->capture_default_str(), "BETA_B");
  env(app.add_option("--max-centers", c.budget.max_centers, "centre enumeration budget")->capture_default_str(),
      "MAX_CENTERS");
  env(app.add_option("--max-operators", c.budget.max_operators, "operators per lab budget")->capture_default_str(),
      "MAX_OPERATORS");
  env(app.add_option("--max-compositions", c.budget.max_compositions, "composition budget per lab")
          ->capture_default_str(),
      "MAX_COMPOSITIONS");
  env(app.add_option("--max-work", c.budget.max_work, "D precomputation work budget")->capture_default_str(),
      "MAX_WORK");
}

void add_shape_options(CLI::App& app, Options& o) {
  app.add_option("--universe-size,-M", o.universe, "number of items M")->envname("SETVALUED_UNIVERSE_SIZE");
  app.add_option("--subset-size,-n", o.subset_size, "items per selection n")->envname("SETVALUED_SUBSET_SIZE");
  app.add_option("--manifest", o.manifest, "JSON manifest declaring universe_size, subset_size, labels")
      ->check(CLI::ExistingFile);
}

sv::DataShape shape_of(const Options& o) {
  sv::DataShape shape;
  if (!o.manifest.empty()) shape = sv::read_manifest(o.manifest);
  if (o.universe > 0) shape.universe = o.universe;
  if (o.subset_size > 0) shape.subset_size = o.subset_size;
  if (shape.universe <= 0 || shape.subset_size <= 0)
    throw sv::InputError("declare M and n with --universe-size/--subset-size or --manifest");
  return shape;
}

void finish_config(Options& o, int threads) {
  o.config.model = sv::parse_model(o.model);
  o.config.family = sv::parse_family(o.family);
  o.config.inference = sv::parse_inference(o.inference);
  if (o.gamma_threshold > 0.0) o.config.lab_gamma_threshold = o.gamma_threshold;
  o.config.threads = threads;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

void print_summary(const sv::AnalysisReport& report, std::ostream& out) {
  const auto j = ordered_json::parse(report.json);
  if (j.contains("posterior_A")) {
    out << "posterior of A (top 10):\n";
    const auto& sets = j["posterior_A"]["sets"];
    for (std::size_t i = 0; i < std::min<std::size_t>(10, sets.size()); ++i)
      out << "  " << sets[i]["set"].get<std::string>() << "  " << fixed(sets[i]["probability"].get<double>(), 6)
          << '\n';
  }
  if (j.contains("dispersion") && j["dispersion"].contains("quantiles"))
    out << "u: mean " << fixed(j["dispersion"]["mean"].get<double>(), 4) << ", median "
        << fixed(j["dispersion"]["quantiles"]["0.5"].get<double>(), 4) << '\n';
  if (j.contains("signals")) {
    out << "signals:\n";
    for (const auto& r : j["signals"]["rows"])
      out << "  " << r["operator"].get<std::string>() << "  p=" << fixed(r["p_value"].get<double>(), 4) << "  k="
          << r["deviations"].get<int>() << "  " << r["signal"].get<std::string>() << '\n';
  }
  if (j.contains("labs")) {
    out << "labs:\n";
    for (const auto& r : j["labs"]["rows"]) {
      out << "  " << r["lab"].get<std::string>() << "  Gamma mean " << fixed(r["gamma_mean"].get<double>(), 4)
          << ", median " << fixed(r["gamma_median"].get<double>(), 4);
      if (r.contains("flagged") && r["flagged"].get<bool>()) out << "  flagged";
      out << '\n';
    }
  }
  if (j.contains("evidence")) {
    const auto& e = j["evidence"];
    out << "log evidence: " << fixed(e["log_evidence"].get<double>(), 8) << '\n';
    if (e.contains("log_bayes_factor"))
      out << "log Bayes factor: " << fixed(e["log_bayes_factor"].get<double>(), 6) << " ("
          << e["interpretation"].get<std::string>() << ")\n";
  }
  for (const auto& w : j["diagnostics"]["warnings"]) out << "warning: " << w.get<std::string>() << '\n';
}

sv::AnalysisReport analyse(Options& o, int threads) {
  finish_config(o, threads);
  const auto data = sv::read_csv_file(o.data, shape_of(o));
  auto report = sv::run_analysis(o.config, data);
  if (!o.output.empty()) sv::write_report(report, o.output);
  return report;
}

std::vector<int> parse_items(const std::string& text) {
  std::vector<int> items;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      items.push_back(v - 1);
    } catch (const std::logic_error&) {
      throw sv::InputError("--center expects comma-separated item indices, got '" + text + "'");
    }
  }
  return items;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian analysis of set-valued interlaboratory data"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML config file; flags override it, it overrides SETVALUED_* variables");
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--threads", threads, "worker threads")->envname("SETVALUED_THREADS")->capture_default_str();

  Options o;
  add_analysis_options(app, o);
  add_shape_options(app, o);

  auto* fit = app.add_subcommand("fit", "fit the pooled or hierarchical model and write a report");
  fit->add_option("data", o.data, "CSV file: lab,operator,item_1..item_n")->required()->check(CLI::ExistingFile);
  fit->add_option("-o,--output", o.output, "report JSON path (sidecars are written next to it)");

  auto* signals = app.add_subcommand("signals", "posterior p-values and alert/action signals (pooled model)");
  signals->add_option("data", o.data, "CSV file")->required()->check(CLI::ExistingFile);
  signals->add_option("-o,--output", o.output, "report JSON path");

  auto* bf = app.add_subcommand("bayes-factor", "Bayes factor of the lab-effect model against pooling");
  bf->add_option("data", o.data, "CSV file")->required()->check(CLI::ExistingFile);
  bf->add_option("-o,--output", o.output, "report JSON path");

  std::string center = "1,2,3";
  double u = 0.1;
  int labs = 4;
  std::vector<int> operators{3};
  double lab_u = -1.0;
  std::string lab_effect = "random";
  bool pooled = false;
  auto* sim = app.add_subcommand("simulate", "draw a data set from the model, with a ground-truth sidecar");
  sim->add_option("--center", center, "consensus A as 1-based items")->capture_default_str();
  sim->add_option("--u", u, "top-level dispersion")->capture_default_str();
  sim->add_option("--labs", labs, "number of labs L")->capture_default_str();
  sim->add_option("--operators", operators, "operators per lab (one value or one per lab)")->capture_default_str();
  sim->add_option("--lab-u", lab_u, "lab dispersion u_i (drawn from the prior when omitted)");
  sim->add_option("--lab-effect", lab_effect, "random, forced (A_i != A) or none (A_i = A)")->capture_default_str();
  sim->add_flag("--pooled", pooled, "draw all operators directly around A");
  sim->add_option("-o,--output", o.output, "CSV path (truth goes to <path>.truth.json)")->required();

  double check_u = 0.5;
  std::uint64_t draws = 100'000;
  auto* check = app.add_subcommand("check-distribution", "sampler goodness of fit and monotonicity verdict");
  check->add_option("--u", check_u, "dispersion")->capture_default_str();
  check->add_option("--draws", draws, "sampled responses")->capture_default_str();

  auto* cache = app.add_subcommand("cache", "D-table cache management");
  cache->require_subcommand(1);
  auto* cache_build = cache->add_subcommand("build", "precompute the D-table for grouped data");
  cache_build->add_option("data", o.data, "CSV file")->required()->check(CLI::ExistingFile);
  std::string cache_path;
  cache_build->add_option("--file", cache_path, "cache file to write")->required();
  auto* cache_info = cache->add_subcommand("info", "print a cache file's header");
  cache_info->add_option("file", cache_path, "cache file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads < 1) throw sv::InputError("--threads must be at least 1");
    if (*fit) {
      print_summary(analyse(o, threads), std::cout);
    } else if (*signals) {
      o.model = "pooled";
      const auto report = analyse(o, threads);
      const auto j = ordered_json::parse(report.json);
      if (!j.contains("signals")) throw sv::NumericalError("too few posterior samples for p-values");
      std::cout << "operator\tp_value\tdeviations\tsignal\n";
      for (const auto& r : j["signals"]["rows"])
        std::cout << r["operator"].get<std::string>() << '\t' << fixed(r["p_value"].get<double>(), 6) << '\t'
                  << r["deviations"].get<int>() << '\t' << r["signal"].get<std::string>() << '\n';
    } else if (*bf) {
      o.model = "hierarchical";
      o.inference = "brute-force";
      const auto report = analyse(o, threads);
      const auto e = ordered_json::parse(report.json)["evidence"];
      std::cout << "log evidence (hierarchical): " << fixed(e["log_evidence"].get<double>(), 10) << '\n'
                << "log evidence (pooled): " << fixed(e["log_evidence_pooled"].get<double>(), 10) << '\n'
                << "log Bayes factor: " << fixed(e["log_bayes_factor"].get<double>(), 6) << '\n'
                << "interpretation: " << e["interpretation"].get<std::string>() << '\n';
    } else if (*sim) {
      const auto shape = shape_of(o);
      sv::SimulationConfig sc;
      sc.family = sv::parse_family(o.family);
      sc.center = sv::Subset::from_indices(parse_items(center));
      sc.dispersion = u;
      sc.pooled = pooled;
      if (pooled) {
        sc.operators = {operators.front()};
      } else if (operators.size() == 1) {
        sc.operators.assign(static_cast<std::size_t>(std::max(labs, 0)), operators.front());
      } else {
        sc.operators = operators;
      }
      if (lab_u >= 0.0) sc.lab_dispersion = lab_u;
      if (lab_effect == "random") sc.lab_effect = sv::LabEffect::Random;
      else if (lab_effect == "forced") sc.lab_effect = sv::LabEffect::Forced;
      else if (lab_effect == "none") sc.lab_effect = sv::LabEffect::None;
      else throw sv::InputError("--lab-effect must be random, forced or none");
      sc.seed = o.config.seed;
      const auto result = sv::simulate(shape.ground(), shape.subset_size, sc);

      std::ofstream csv(o.output);
      if (!csv) throw sv::InputError("cannot write '" + o.output + "'");
      if (pooled) sv::write_csv(csv, result.data.pooled());
      else sv::write_csv(csv, result.data);

      auto one_based = [](sv::Subset s) {
        auto v = s.indices();
        for (auto& i : v) ++i;
        return v;
      };
      ordered_json truth;
      truth["operation"] = "ilc-cli/simulate";
      truth["seed"] = sc.seed;
      truth["family"] = sv::to_string(sc.family);
      truth["universe_size"] = shape.universe;
      truth["subset_size"] = shape.subset_size;
      truth["center"] = one_based(result.truth.center);
      truth["u"] = result.truth.dispersion;
      ordered_json lab_rows = ordered_json::array();
      for (std::size_t i = 0; i < result.truth.lab_centers.size(); ++i)
        lab_rows.push_back({{"lab", result.data.labs[i].id},
                            {"center", one_based(result.truth.lab_centers[i])},
                            {"u", result.truth.lab_dispersions[i]}});
      truth["labs"] = lab_rows;
      std::ofstream tj(o.output + ".truth.json");
      tj << truth.dump(2) << '\n';
      std::cout << "wrote " << o.output << " (" << result.data.total_observations() << " responses)\n";
    } else if (*check) {
      const auto shape = shape_of(o);
      std::cout << sv::check_distribution(sv::parse_family(o.family), check_u, shape.universe, shape.subset_size,
                                          draws, o.config.seed);
    } else if (*cache_build) {
      finish_config(o, threads);
      o.config.validate();
      const auto data = sv::read_csv_file(o.data, shape_of(o));
      if (!std::holds_alternative<sv::GroupedDataset>(data))
        throw sv::InputError("the D-table needs grouped data (several labs)");
      const auto& grouped = std::get<sv::GroupedDataset>(data);
      const int N = grouped.universe() - grouped.n;
      const sv::HierarchicalSpec spec{sv::make_model_spec(o.config, grouped.n, N),
                                      sv::make_model_spec(o.config, grouped.n, N)};
      const auto table = sv::DTable::build(grouped, spec, o.config.quadrature_nodes, o.config.budget, threads);
      table.save(cache_path);
      std::cout << "wrote " << cache_path << " (" << table.labs().size() << " labs, " << table.cached_integrals()
                << " integrals)\n";
    } else if (*cache_info) {
      const auto h = sv::DTable::read_header(cache_path);
      if (!h) throw sv::InputError("'" + cache_path + "' is not a D-table cache");
      std::cout << "format version: " << h->version << (h->version == sv::kDTableFormatVersion ? "" : " (stale)")
                << "\nuniverse size: " << h->universe << "\nsubset size: " << h->n << "\nlabs: " << h->labs
                << "\nconfig hash: " << std::hex << std::setw(16) << std::setfill('0') << h->config_hash << std::dec
                << "\nbytes: " << h->bytes << '\n';
    }
  } catch (const sv::BudgetError& e) {
    std::cerr << "error: " << e.what() << '\n'
              << "hint: raise --max-centers, --max-operators, --max-compositions or --max-work; for large pooled "
                 "instances use --inference mcmc\n";
    return e.exit_code();
  } catch (const sv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
