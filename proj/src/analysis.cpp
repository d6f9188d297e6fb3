#include "setvalued/analysis.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "setvalued/errors.hpp"
#include "setvalued/numeric.hpp"
#include "setvalued/simulate.hpp"

namespace setvalued {
namespace {

using nlohmann::ordered_json;

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Shortest round-trip text for TSV cells.
std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<int> one_based(Subset s) {
  auto items = s.indices();
  for (auto& i : items) ++i;
  return items;
}

ordered_json set_entry(Subset s, const GroundSet& ground) {
  return {{"set", format_subset(s, ground)}, {"items", one_based(s)}};
}

ordered_json dispersion_summary(std::vector<double> us) {
  ordered_json out;
  if (us.empty()) return out;
  out["mean"] = mean(us);
  ordered_json q;
  for (double p : {0.025, 0.25, 0.5, 0.75, 0.975}) {
    std::ostringstream key;
    key << p;
    q[key.str()] = quantile(us, p);
  }
  out["quantiles"] = q;
  out["samples"] = us.size();
  return out;
}

std::string posterior_table(const std::vector<CenterProbability>& support, const GroundSet& ground) {
  std::ostringstream os;
  os << "set\tprobability\tstddev\n";
  for (const auto& c : support) os << format_subset(c.center, ground) << '\t' << num(c.probability) << '\t' << num(c.stddev) << '\n';
  return os.str();
}

std::string selection_histogram(const Dataset& data) {
  std::ostringstream os;
  os << "item\tlabel\tcount\n";
  const auto counts = data.selection_counts();
  for (int i = 0; i < data.universe(); ++i)
    os << (i + 1) << '\t' << data.ground.label(i) << '\t' << counts[static_cast<std::size_t>(i)] << '\n';
  return os.str();
}

ordered_json diagnostics_json(const PosteriorDiagnostics& d) {
  ordered_json j;
  j["method"] = d.method;
  j["seed"] = d.seed;
  if (d.method == "mcmc") {
    j["chain_length"] = d.chain_length;
    j["burn_in"] = d.burn_in;
    j["thin"] = d.thin;
    j["chains"] = d.chains;
    j["dispersion_acceptance"] = d.dispersion_acceptance;
    j["center_acceptance"] = d.center_acceptance;
  } else {
    j["centers_enumerated"] = d.centers_enumerated;
    j["retained_mass"] = d.retained_mass;
    j["prior_draws"] = d.prior_draws;
    j["cdf_grid"] = d.cdf_grid;
  }
  j["warnings"] = d.warnings;
  return j;
}

void pooled_analysis(const AnalysisConfig& config, const Dataset& data, ordered_json& report,
                     std::map<std::string, std::string>& sidecars) {
  const auto spec = make_model_spec(config, data.n, data.outside());
  PosteriorOneStage posterior;
  if (config.inference == InferenceKind::BruteForce) {
    BruteForceConfig bc;
    bc.epsilon = config.epsilon;
    bc.prior_draws = config.prior_draws;
    bc.stratified = config.stratified;
    bc.cdf_grid = config.cdf_grid;
    bc.posterior_samples = config.posterior_samples;
    bc.seed = config.seed;
    bc.max_centers = config.budget.max_centers;
    bc.threads = config.threads;
    posterior = brute_force_posterior(data, spec, bc);
  } else {
    McmcConfig mc;
    mc.sigma2 = config.sigma2;
    mc.iterations = config.iterations;
    mc.burn_in = config.burn_in;
    mc.thin = config.thin;
    mc.chains = config.chains;
    mc.seed = config.seed;
    mc.weighted_proposal = config.weighted_proposal;
    mc.threads = config.threads;
    posterior = mcmc_posterior(data, spec, mc);
  }

  ordered_json pa;
  pa["operation"] = config.inference == InferenceKind::BruteForce ? "inference-one-stage/brute_force_posterior"
                                                                   : "inference-one-stage/mcmc_posterior";
  pa["file"] = "posterior_A";
  ordered_json rows = ordered_json::array();
  for (const auto& c : posterior.center_support) {
    auto row = set_entry(c.center, data.ground);
    row["probability"] = c.probability;
    if (config.inference == InferenceKind::Mcmc) row["stddev"] = c.stddev;
    rows.push_back(row);
  }
  pa["sets"] = rows;
  report["posterior_A"] = pa;

  std::vector<double> us;
  std::ostringstream u_tsv;
  u_tsv << "sample\tu\tA\n";
  for (std::size_t s = 0; s < posterior.samples.size(); ++s) {
    us.push_back(posterior.samples[s].dispersion);
    u_tsv << s << '\t' << num(posterior.samples[s].dispersion) << '\t'
          << format_subset(posterior.samples[s].center, data.ground) << '\n';
  }
  auto disp = dispersion_summary(us);
  disp["operation"] = pa["operation"];
  disp["file"] = "u_samples";
  report["dispersion"] = disp;
  sidecars["posterior_A"] = posterior_table(posterior.center_support, data.ground);
  sidecars["u_samples"] = u_tsv.str();

  if (posterior.samples.size() >= 100) {
    const auto signals = posterior_p_values(data, spec, posterior, config.thresholds);
    ordered_json sj;
    sj["operation"] = "inference-one-stage/posterior_p_values";
    sj["mode"] = set_entry(signals.mode, data.ground);
    sj["alert_threshold"] = config.thresholds.alert;
    sj["action_threshold"] = config.thresholds.action;
    ordered_json srows = ordered_json::array();
    std::ostringstream tsv;
    tsv << "operator\tp_value\tdeviations\tsignal\n";
    for (const auto& r : signals.rows) {
      srows.push_back({{"operator", r.id}, {"p_value", r.p_value}, {"deviations", r.deviations}, {"signal", to_string(r.signal)}});
      tsv << r.id << '\t' << num(r.p_value) << '\t' << r.deviations << '\t' << to_string(r.signal) << '\n';
    }
    sj["rows"] = srows;
    sj["file"] = "signals";
    report["signals"] = sj;
    sidecars["signals"] = tsv.str();
  } else {
    posterior.diagnostics.warnings.push_back("fewer than 100 joint samples; signals not computed");
  }
  if (std::isfinite(posterior.log_evidence))
    report["evidence"] = {{"operation", "inference-one-stage/estimate_evidence"}, {"log_evidence", posterior.log_evidence}};
  report["diagnostics"] = diagnostics_json(posterior.diagnostics);
}

void hierarchical_analysis(const AnalysisConfig& config, const GroupedDataset& data, ordered_json& report,
                           std::map<std::string, std::string>& sidecars) {
  const int N = data.ground.size() - data.n;
  const HierarchicalSpec spec{make_model_spec(config, data.n, N), make_model_spec(config, data.n, N)};
  TwoStageConfig tc;
  tc.epsilon = config.epsilon;
  tc.prior_draws = config.prior_draws;
  tc.stratified = config.stratified;
  tc.cdf_grid = config.cdf_grid;
  tc.posterior_samples = config.posterior_samples;
  tc.quadrature_nodes = config.quadrature_nodes;
  tc.seed = config.seed;
  tc.budget = config.budget;
  tc.threads = config.threads;

  std::optional<DTable> table;
  bool cache_hit = false;
  if (!config.dtable_cache.empty()) {
    table = DTable::load(config.dtable_cache, data, spec, config.quadrature_nodes, config.budget);
    cache_hit = table.has_value();
  }
  if (!table) {
    table = DTable::build(data, spec, config.quadrature_nodes, config.budget, config.threads);
    if (!config.dtable_cache.empty()) table->save(config.dtable_cache);
  }

  auto posterior = two_stage_posterior(data, spec, tc, &*table);
  const auto labs = gamma_statistics(posterior, spec);
  const auto bf = bayes_factor(data, spec, tc, &*table);

  ordered_json pa;
  pa["operation"] = "inference-two-stage/two_stage_posterior";
  pa["file"] = "posterior_A";
  ordered_json rows = ordered_json::array();
  for (const auto& c : posterior.center_support) {
    auto row = set_entry(c.center, data.ground);
    row["probability"] = c.probability;
    rows.push_back(row);
  }
  pa["sets"] = rows;
  report["posterior_A"] = pa;

  std::vector<double> us;
  std::ostringstream u_tsv;
  u_tsv << "sample\tu\tA\n";
  std::ostringstream g_tsv;
  g_tsv << "sample\tlab\tgamma\tk\tA_i\tu_i\n";
  for (std::size_t s = 0; s < posterior.samples.size(); ++s) {
    const auto& smp = posterior.samples[s];
    us.push_back(smp.dispersion);
    u_tsv << s << '\t' << num(smp.dispersion) << '\t' << format_subset(smp.center, data.ground) << '\n';
    for (std::size_t i = 0; i < smp.labs.size(); ++i)
      g_tsv << s << '\t' << posterior.lab_ids[i] << '\t' << num(smp.labs[i].gamma) << '\t' << smp.labs[i].deviations
            << '\t' << format_subset(smp.labs[i].center, data.ground) << '\t' << num(smp.labs[i].dispersion) << '\n';
  }
  auto disp = dispersion_summary(us);
  disp["operation"] = pa["operation"];
  disp["file"] = "u_samples";
  report["dispersion"] = disp;

  ordered_json lj;
  lj["operation"] = "inference-two-stage/gamma_statistics";
  lj["file"] = "gamma_samples";
  if (config.lab_gamma_threshold) lj["gamma_threshold"] = *config.lab_gamma_threshold;
  ordered_json lrows = ordered_json::array();
  for (const auto& l : labs) {
    ordered_json r;
    r["lab"] = l.id;
    r["gamma_mean"] = l.gamma_mean;
    r["gamma_median"] = l.gamma_median;
    r["u_median"] = l.dispersion_median;
    r["mean_deviations_at_median_u"] = l.mean_deviations_at_median;
    r["mean_deviations_posterior_mean"] = l.mean_deviations_posterior_mean;
    r["k_histogram"] = l.deviation_histogram;
    if (config.lab_gamma_threshold) r["flagged"] = l.gamma_median < *config.lab_gamma_threshold;
    lrows.push_back(r);
  }
  lj["rows"] = lrows;
  report["labs"] = lj;

  report["evidence"] = {{"operation", "inference-two-stage/bayes_factor"},
                        {"log_evidence", bf.log_evidence_hierarchical},
                        {"log_evidence_pooled", bf.log_evidence_pooled},
                        {"log_bayes_factor", bf.log_bayes_factor},
                        {"interpretation", bf.interpretation}};
  auto diag = diagnostics_json(posterior.diagnostics);
  diag["dtable"] = {{"cache", config.dtable_cache}, {"cache_hit", cache_hit}};
  report["diagnostics"] = diag;

  sidecars["posterior_A"] = posterior_table(posterior.center_support, data.ground);
  sidecars["u_samples"] = u_tsv.str();
  sidecars["gamma_samples"] = g_tsv.str();
}

}  // namespace

std::string to_string(ModelKind m) { return m == ModelKind::Pooled ? "pooled" : "hierarchical"; }
std::string to_string(InferenceKind i) { return i == InferenceKind::BruteForce ? "brute-force" : "mcmc"; }

ModelKind parse_model(const std::string& s) {
  if (s == "pooled") return ModelKind::Pooled;
  if (s == "hierarchical") return ModelKind::Hierarchical;
  throw InputError("unknown model '" + s + "' (expected pooled or hierarchical)");
}

InferenceKind parse_inference(const std::string& s) {
  if (s == "brute-force" || s == "bruteforce") return InferenceKind::BruteForce;
  if (s == "mcmc") return InferenceKind::Mcmc;
  throw InputError("unknown inference '" + s + "' (expected brute-force or mcmc)");
}

void AnalysisConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw InputError(std::string(name) + " must be positive");
  };
  positive(epsilon, "epsilon");
  positive(prior_draws, "prior draws");
  positive(cdf_grid, "cdf grid");
  positive(sigma2, "sigma2");
  positive(static_cast<double>(iterations), "iterations");
  positive(static_cast<double>(thin), "thin");
  positive(chains, "chains");
  positive(quadrature_nodes, "quadrature nodes");
  positive(beta_a, "beta a");
  positive(beta_b, "beta b");
  positive(threads, "threads");
  positive(static_cast<double>(budget.max_centers), "centre budget");
  positive(budget.max_operators, "operator budget");
  positive(budget.max_work, "work budget");
  if (posterior_samples < 0) throw InputError("posterior samples must be non-negative");
  if (burn_in >= iterations) throw InputError("burn-in must be smaller than the number of iterations");
  thresholds.validate();
  if (lab_gamma_threshold && !(*lab_gamma_threshold > 0.0 && *lab_gamma_threshold < 1.0))
    throw InputError("lab gamma threshold must lie in (0, 1)");
  if (model == ModelKind::Hierarchical && inference == InferenceKind::Mcmc)
    throw InputError("the hierarchical model is fitted by brute force only");
}

std::string AnalysisConfig::canonical_json() const {
  ordered_json j;
  j["model"] = to_string(model);
  j["family"] = to_string(family);
  j["inference"] = to_string(inference);
  j["epsilon"] = epsilon;
  j["prior_draws"] = prior_draws;
  j["stratified"] = stratified;
  j["cdf_grid"] = cdf_grid;
  j["posterior_samples"] = posterior_samples;
  j["sigma2"] = sigma2;
  j["iterations"] = iterations;
  j["burn_in"] = burn_in;
  j["thin"] = thin;
  j["chains"] = chains;
  j["weighted_proposal"] = weighted_proposal;
  j["seed"] = seed;
  j["alert"] = thresholds.alert;
  j["action"] = thresholds.action;
  j["quadrature_nodes"] = quadrature_nodes;
  j["lab_gamma_threshold"] = lab_gamma_threshold ? ordered_json(*lab_gamma_threshold) : ordered_json();
  j["beta_a"] = beta_a;
  j["beta_b"] = beta_b;
  j["max_centers"] = budget.max_centers;
  j["max_operators"] = budget.max_operators;
  j["max_compositions"] = budget.max_compositions;
  j["max_work"] = budget.max_work;
  return j.dump();
}

std::uint64_t AnalysisConfig::hash() const { return fnv(canonical_json()); }

ModelSpec make_model_spec(const AnalysisConfig& config, int n, int N) {
  auto family = DispersionFamily::make(config.family, n, N);
  auto prior = config.family == FamilyKind::FisherNCH ? DispersionPrior::triangle()
                                                      : DispersionPrior::beta(config.beta_a, config.beta_b, family.upper());
  return {std::move(family), std::move(prior)};
}

AnalysisReport run_analysis(const AnalysisConfig& config, const ParsedData& data) {
  config.validate();
  const std::string started = utc_now();
  ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = {{"name", "setvalued"}, {"version", kToolVersion}};
  report["config"] = ordered_json::parse(config.canonical_json());
  report["config_hash"] = hex(config.hash());
  report["seed"] = config.seed;
  AnalysisReport out;

  const bool grouped = std::holds_alternative<GroupedDataset>(data);
  const Dataset pooled = grouped ? std::get<GroupedDataset>(data).pooled() : std::get<Dataset>(data);
  pooled.validate();
  if (pooled.observations.empty()) throw InputError("the data set has no observations");
  ordered_json dj;
  dj["universe_size"] = pooled.universe();
  dj["subset_size"] = pooled.n;
  dj["observations"] = pooled.size();
  dj["labs"] = grouped ? std::get<GroupedDataset>(data).labs.size() : std::size_t{1};
  dj["selection_histogram_file"] = "selection_histogram";
  report["data"] = dj;
  out.sidecars["selection_histogram"] = selection_histogram(pooled);

  if (config.model == ModelKind::Hierarchical) {
    if (!grouped) throw InputError("the hierarchical model needs grouped data (a lab column with several labs)");
    hierarchical_analysis(config, std::get<GroupedDataset>(data), report, out.sidecars);
  } else {
    pooled_analysis(config, pooled, report, out.sidecars);
  }
  out.json = report.dump(2) + "\n";
  ordered_json meta;
  meta["tool_version"] = kToolVersion;
  meta["config_hash"] = hex(config.hash());
  meta["started"] = started;
  meta["finished"] = utc_now();
  meta["threads"] = config.threads;
  out.meta = meta.dump(2) + "\n";
  return out;
}

void write_report(const AnalysisReport& report, const std::filesystem::path& path) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write '" + p.string() + "'");
    f << text;
  };
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write(path, report.json);
  write(path.string() + ".meta.json", report.meta);
  const auto stem = path.parent_path() / path.stem();
  for (const auto& [name, text] : report.sidecars) write(stem.string() + "." + name + ".tsv", text);
}

std::string check_distribution(FamilyKind family_kind, double u, int universe, int subset_size, std::uint64_t draws,
                               std::uint64_t seed) {
  if (subset_size < 1 || subset_size >= universe || universe > kMaxUniverse)
    throw InputError("check-distribution needs 1 <= n < M <= 64");
  if (draws == 0) throw InputError("check-distribution needs at least one draw");
  // The binomial check covers the whole of [0, 1], not only the default truncated domain.
  const auto family = family_kind == FamilyKind::Binomial
                          ? DispersionFamily::binomial(subset_size, universe - subset_size, 1.0)
                          : DispersionFamily::make(family_kind, subset_size, universe - subset_size);
  if (!family.in_domain(u)) throw InputError("dispersion outside the family's parameter domain");
  std::vector<int> first(static_cast<std::size_t>(subset_size));
  for (int i = 0; i < subset_size; ++i) first[static_cast<std::size_t>(i)] = i;
  const Subset center = Subset::from_indices(first);
  CounterRng rng(seed, 0);
  std::vector<std::uint64_t> observed(static_cast<std::size_t>(subset_size) + 1, 0);
  for (std::uint64_t d = 0; d < draws; ++d) ++observed[static_cast<std::size_t>(draw_response(family, universe, center, u, rng).without(center).size())];
  const auto expected = family.pmf(u);
  const auto gof = chi_square_test(observed, expected);
  ordered_json j;
  j["operation"] = "ilc-cli/check_distribution";
  j["family"] = to_string(family_kind);
  j["u"] = u;
  j["universe_size"] = universe;
  j["subset_size"] = subset_size;
  j["draws"] = draws;
  j["seed"] = seed;
  j["observed"] = observed;
  j["expected_pmf"] = expected;
  j["chi_square"] = {{"statistic", gof.statistic}, {"dof", gof.dof}, {"p_value", gof.p_value}};
  j["monotonicity"] = to_string(check_hamming_monotone(family, u));
  return j.dump(2) + "\n";
}

}  // namespace setvalued
