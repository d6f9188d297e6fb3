#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "setvalued/analysis.hpp"
#include "setvalued/errors.hpp"
#include "setvalued/io.hpp"
#include "setvalued/numeric.hpp"
#include "setvalued/simulate.hpp"

using namespace setvalued;
using oracle::items;
using nlohmann::json;

namespace {

const char* kToyCsv = R"(lab,operator,item1,item2,item3
,X1,1,2,3
,X2,1,2,3
,X3,1,2,3
,X4,1,2,7
,X5,1,2,3
,X6,1,2,3
,X7,1,2,4
,X8,1,2,3
,X9,2,3,8
,X10,1,2,3
,X11,1,2,3
,X12,5,6,8
)";

ParsedData parse(const std::string& text, int M = 10, int n = 3) {
  std::istringstream in(text);
  return read_csv(in, DataShape{M, n, {}}, "t.csv");
}

std::string parse_error(const std::string& text, int M = 10, int n = 3) {
  try {
    (void)parse(text, M, n);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("setvalued_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("reading the toy data") {
  const auto parsed = parse(kToyCsv);
  REQUIRE(std::holds_alternative<Dataset>(parsed));
  const auto& d = std::get<Dataset>(parsed);
  const auto want = oracle::table1();
  CHECK(d.size() == 12);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.observations[i].id == want.observations[i].id);
    CHECK(d.observations[i].subset == want.observations[i].subset);
  }
  // no header, comments, blank lines and spaces
  const auto loose = parse("# toy\n\n a , X1 , 3 , 2 , 1\na,X2,1,2,4\n");
  CHECK(std::get<Dataset>(loose).observations[0].subset == items({1, 2, 3}));
}

TEST_CASE("CSV errors carry the line number") {
  CHECK(parse_error(",X1,1,2,11\n") == "t.csv:1: unknown item index 11 (items are 1..10)");
  CHECK(parse_error(",X1,1,2,0\n").find("unknown item index 0") != std::string::npos);
  CHECK(parse_error("lab,operator,item1,item2,item3\n,X1,1,2,2\n") == "t.csv:2: duplicate item 2 in selection");
  CHECK(parse_error(",X1,1,2\n").find("t.csv:1: row has 4 fields") != std::string::npos);
  CHECK(parse_error(",X1,1,2,x\n").find("'x' is not an integer") != std::string::npos);
  CHECK(parse_error(",X1,1,2,3\n,X1,4,5,6\n").find("t.csv:2: duplicate operator id 'X1'") != std::string::npos);
  CHECK(parse_error("lab,operator,item1,item2\n").find("header has 2 item columns, expected 3") != std::string::npos);
  CHECK(parse_error("a,X1,1,2,3\n,X2,1,2,3\n").find("t.csv:2: empty lab id") != std::string::npos);
  CHECK(parse_error(",,1,2,3\n").find("empty operator id") != std::string::npos);
  CHECK_FALSE(parse_error(",X1,1,2,3\n", 10, 10).empty());
}

TEST_CASE("grouped data and round trip") {
  const std::string text = "lab,operator,item1,item2\nA,o1,1,2\nA,o2,1,3\nB,o1,1,2\nB,o2,2,4\nB,o3,3,4\n";
  const auto parsed = parse(text, 6, 2);
  REQUIRE(std::holds_alternative<GroupedDataset>(parsed));
  const auto& g = std::get<GroupedDataset>(parsed);
  REQUIRE(g.labs.size() == 2);
  CHECK(g.labs[0].observations.size() == 2);
  CHECK(g.labs[1].observations.size() == 3);
  CHECK(g.pooled().size() == 5);
  CHECK(g.pooled().observations[2].id == "B/o1");
  std::ostringstream out;
  write_csv(out, g);
  CHECK(out.str() == text);
  CHECK(std::get<GroupedDataset>(parse(out.str(), 6, 2)) == g);

  std::ostringstream pooled_out;
  write_csv(pooled_out, std::get<Dataset>(parse(kToyCsv)));
  CHECK(pooled_out.str() == kToyCsv);
}

TEST_CASE("manifest") {
  const auto dir = scratch_dir("manifest");
  {
    std::ofstream f(dir / "m.json");
    f << R"({"universe_size": 4, "subset_size": 2, "labels": ["Cu", "Fe", "Pb", "Zn"]})";
  }
  const auto shape = read_manifest(dir / "m.json");
  CHECK(shape.universe == 4);
  CHECK(shape.subset_size == 2);
  CHECK(shape.ground().label(3) == "Zn");
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"universe_size": 4, "subset_size": 2, "labels": ["Cu"]})";
  }
  CHECK_THROWS_AS(read_manifest(dir / "bad.json").ground(), InputError);
  CHECK_THROWS_AS(read_manifest(dir / "none.json"), InputError);
  CHECK_THROWS_AS(read_csv_file(dir / "none.csv", shape), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulation") {
  SUBCASE("u = 0 reproduces the centre exactly") {
    for (FamilyKind kind : {FamilyKind::FisherNCH, FamilyKind::Binomial}) {
      SimulationConfig sim;
      sim.family = kind;
      sim.center = items({2, 5, 9});
      sim.dispersion = 0.0;
      sim.lab_dispersion = 0.0;
      sim.operators = {3, 3};
      const auto out = simulate(GroundSet(10), 3, sim);
      for (const auto& lab : out.data.labs)
        for (const auto& o : lab.observations) CHECK(o.subset == items({2, 5, 9}));
    }
  }
  SUBCASE("pooled u = 1 is uniform over the n-subsets") {
    SimulationConfig sim;
    sim.center = items({1, 2});
    sim.dispersion = 1.0;
    sim.pooled = true;
    sim.operators = {60'000};
    const auto out = simulate(GroundSet(6), 2, sim);
    REQUIRE(out.data.labs.size() == 1);
    std::vector<std::uint64_t> counts(15, 0);
    for (const auto& o : out.data.labs[0].observations) ++counts[rank_subset(o.subset)];
    CHECK(chi_square_test(counts, std::vector<double>(15, 1.0 / 15)).p_value > 0.001);
  }
  SUBCASE("truth and lab effects") {
    SimulationConfig sim;
    sim.center = items({1, 2, 3});
    sim.dispersion = 0.02;
    sim.operators = {3, 3, 3, 3};
    sim.lab_effect = LabEffect::Forced;
    sim.seed = 4;
    const auto out = simulate(GroundSet(10), 3, sim);
    REQUIRE(out.truth.lab_centers.size() == 4);
    for (Subset c : out.truth.lab_centers) CHECK(c != items({1, 2, 3}));
    for (double v : out.truth.lab_dispersions) CHECK((v > 0.0 && v <= 1.0));
    sim.lab_effect = LabEffect::None;
    for (Subset c : simulate(GroundSet(10), 3, sim).truth.lab_centers) CHECK(c == items({1, 2, 3}));
    // same seed, same data
    CHECK(simulate(GroundSet(10), 3, sim).data == simulate(GroundSet(10), 3, sim).data);
  }
}

TEST_CASE("planted centre is recovered from simulated data") {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimulationConfig sim;
    sim.center = items({3, 5, 7});
    sim.dispersion = 0.1;
    sim.pooled = true;
    sim.operators = {20};
    sim.seed = seed;
    const auto out = simulate(GroundSet(10), 3, sim);
    const auto post = brute_force_posterior(out.data.pooled(), ModelSpec::defaults(FamilyKind::FisherNCH, 3, 7), {});
    hits += post.mode() == items({3, 5, 7});
  }
  CHECK(hits >= 10);
}

TEST_CASE("analysis configuration") {
  AnalysisConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(parse_model("hierarchical") == ModelKind::Hierarchical);
  CHECK(parse_inference("mcmc") == InferenceKind::Mcmc);
  CHECK_THROWS_AS(parse_model("nested"), InputError);
  auto bad = c;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.thresholds = {0.001, 0.01};
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.burn_in = bad.iterations;
  CHECK_THROWS_AS(bad.validate(), InputError);
  auto threaded = c;
  threaded.threads = 8;
  CHECK(threaded.hash() == c.hash());
  auto seeded = c;
  seeded.seed = 2;
  CHECK(seeded.hash() != c.hash());
  const auto spec = make_model_spec(c, 3, 7);
  CHECK(spec.prior.kind() == DispersionPrior::Kind::Triangle);
  c.family = FamilyKind::Binomial;
  CHECK(make_model_spec(c, 3, 7).prior.upper() == doctest::Approx(0.7));
}

TEST_CASE("pooled analysis report") {
  AnalysisConfig c;
  const auto data = parse(kToyCsv);
  const auto report = run_analysis(c, data);
  const auto j = json::parse(report.json);
  CHECK(j["schema_version"] == kReportSchemaVersion);
  CHECK(j["posterior_A"]["operation"] == "inference-one-stage/brute_force_posterior");
  CHECK(j["posterior_A"]["sets"][0]["probability"].get<double>() > 1 - 1e-6);
  CHECK(j["data"]["observations"] == 12);
  const auto& rows = j["signals"]["rows"];
  REQUIRE(rows.size() == 12);
  CHECK(rows[11]["signal"] == "action");
  CHECK(rows[11]["operator"] == "X12");
  for (std::size_t i = 0; i < 11; ++i) CHECK(rows[i]["signal"] == "none");
  for (const char* name : {"posterior_A", "u_samples", "selection_histogram", "signals"})
    CHECK(report.sidecars.count(name) == 1);
  CHECK(report.sidecars.at("u_samples").rfind("sample\tu\tA\n", 0) == 0);
  // deterministic for a fixed seed, threads do not matter
  auto threaded = c;
  threaded.threads = 3;
  CHECK(run_analysis(threaded, data).json == report.json);
  CHECK(run_analysis(c, data).sidecars == report.sidecars);
  auto reseeded = c;
  reseeded.seed = 5;
  CHECK(run_analysis(reseeded, data).json != report.json);

  const auto dir = scratch_dir("report");
  write_report(report, dir / "toy.json");
  CHECK(std::filesystem::exists(dir / "toy.json.meta.json"));
  CHECK(std::filesystem::exists(dir / "toy.signals.tsv"));
  std::ifstream f(dir / "toy.json");
  std::stringstream back;
  back << f.rdbuf();
  CHECK(back.str() == report.json);
  std::filesystem::remove_all(dir);
}

TEST_CASE("hierarchical analysis needs grouped data") {
  AnalysisConfig c;
  c.model = ModelKind::Hierarchical;
  CHECK_THROWS_AS(run_analysis(c, parse(kToyCsv)), InputError);
  const auto grouped = parse("A,o1,1,2\nA,o2,1,3\nB,o1,1,2\nB,o2,1,2\n", 6, 2);
  c.lab_gamma_threshold = 0.05;
  const auto j = json::parse(run_analysis(c, grouped).json);
  CHECK(j["posterior_A"]["operation"] == "inference-two-stage/two_stage_posterior");
  REQUIRE(j["labs"]["rows"].size() == 2);
  CHECK(j["labs"]["rows"][0].contains("flagged"));
  CHECK(j["evidence"].contains("log_bayes_factor"));
  AnalysisConfig empty;
  CHECK_THROWS_AS(run_analysis(empty, ParsedData{Dataset{GroundSet(4), 2, {}}}), InputError);
}

TEST_CASE("planted lab effect is preferred by the Bayes factor") {
  int positive = 0;
  const auto spec = HierarchicalSpec::defaults(FamilyKind::FisherNCH, 2, 4);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimulationConfig sim;
    sim.center = items({1, 2});
    sim.dispersion = 0.05;
    sim.lab_dispersion = 0.02;
    sim.operators = {3, 3, 3};
    sim.lab_effect = LabEffect::Forced;
    sim.seed = seed;
    const auto data = simulate(GroundSet(6), 2, sim).data;
    TwoStageConfig cfg;
    cfg.seed = seed;
    positive += bayes_factor(data, spec, cfg).log_bayes_factor > 0.0;
  }
  CHECK(positive >= 4);
}

TEST_CASE("distribution check") {
  const auto fisher = json::parse(check_distribution(FamilyKind::FisherNCH, 0.5, 10, 3, 100'000, 1));
  CHECK(fisher["monotonicity"] == "decreasing");
  CHECK(fisher["chi_square"]["p_value"].get<double>() > 0.001);
  CHECK(fisher["observed"].size() == 4);
  CHECK(json::parse(check_distribution(FamilyKind::FisherNCH, 1.0, 10, 3, 1000, 1))["monotonicity"] == "non-increasing");
  const auto binom = json::parse(check_distribution(FamilyKind::Binomial, 0.9, 10, 3, 100'000, 2));
  CHECK(binom["monotonicity"] == "neither");
  CHECK(binom["chi_square"]["p_value"].get<double>() > 0.001);
  CHECK_THROWS_AS(check_distribution(FamilyKind::Binomial, 1.5, 10, 3, 10, 1), InputError);
  CHECK_THROWS_AS(check_distribution(FamilyKind::FisherNCH, 0.5, 10, 10, 10, 1), InputError);
}
