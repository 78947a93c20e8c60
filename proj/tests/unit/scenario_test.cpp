#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "builders.hpp"
#include "gridclear/errors.hpp"
#include "gridclear/exports.hpp"
#include "gridclear/scenario.hpp"

namespace gc = gridclear;
namespace gt = gridclear::testing;
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

const fs::path kData = GRIDCLEAR_DATA_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spill(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream cs(line);
    for (std::string cell; std::getline(cs, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class ScratchDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gridclear-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "-" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

// Two-line chain matching the contingent-pair fixture, as documents.
void write_pair_inputs(const fs::path& dir, double offer_price) {
  const double z_base = 2.401 * 2.401;
  const double r = 5.0 * z_base;
  std::string lines;
  for (int k = 0; k < 2; ++k) {
    if (k) lines += ",";
    lines += R"({"from": ")" + std::to_string(k) + R"(", "to": ")" + std::to_string(k + 1) + R"(", "r_ohm": [[)" +
             std::to_string(r) + ",0,0],[0," + std::to_string(r) + ",0],[0,0," + std::to_string(r) +
             R"(]], "x_ohm": [[0,0,0],[0,0,0],[0,0,0]], "s_max_kva": 10000})";
  }
  spill(dir / "feeder.json",
        R"({"schema": "gridclear-feeder/1", "header": {"s_base_kva": 1000, "v_base_kv": 2.401, "v0_pu": 1.03,
            "v_min_pu": 0.95, "v_max_pu": 1.05, "s0_max_kva": 5000},
            "buses": [{"index": 0, "label": "0"}, {"index": 1, "label": "1"}, {"index": 2, "label": "2"}],
            "lines": [)" + lines + "]}");
  spill(dir / "ders.json", R"({"schema": "gridclear-ders/1", "ders": [
      {"id": "far-bid", "bus": "2", "phases": "abc", "side": "bid", "price_cents_per_kwh": 16, "volume_kw": 30, "power_factor": 1},
      {"id": "far-offer", "bus": "2", "phases": "abc", "side": "offer", "price_cents_per_kwh": )" +
                               std::to_string(offer_price) + R"(, "volume_kw": 30, "power_factor": 1}]})");
}

}  // namespace

TEST(CaseSelector, NamesRoundTrip) {
  for (auto c : {gc::CaseSelector::A, gc::CaseSelector::B, gc::CaseSelector::C, gc::CaseSelector::TestCase1,
                 gc::CaseSelector::TestCase2})
    EXPECT_EQ(gc::parse_case(gc::to_string(c)), c);
  EXPECT_THROW(gc::parse_case("D"), gc::ConfigError);
}

TEST(ScenarioConfig, ParsesEveryField) {
  const gc::ScenarioConfig cfg = gc::parse_scenario(R"({"schema": "gridclear-scenario/1", "feeder": "f.json",
      "ders": "d.json", "market": {"network_cost_cents_per_kwh": 3, "period_hours": 0.25, "big_m_cents": 500,
      "polygon_edges": 8}, "lmp": {"affine": {"intercept_cents_per_kwh": 4, "slope_cents_per_kwh_per_kw": 0.01}},
      "case": "test-case-2", "output_dir": "out"})",
                                                    "/base");
  EXPECT_EQ(cfg.feeder, fs::path("/base/f.json"));
  EXPECT_EQ(*cfg.ders, fs::path("/base/d.json"));
  EXPECT_EQ(cfg.params.network_cost, 3.0);
  EXPECT_EQ(cfg.params.period_hours, 0.25);
  EXPECT_EQ(cfg.params.big_m, 500.0);
  EXPECT_EQ(cfg.polygon_edges, 8);
  EXPECT_EQ(cfg.lmp.kind, gc::LmpSource::Kind::Affine);
  EXPECT_EQ(cfg.lmp.slope, 0.01);
  EXPECT_EQ(cfg.selector, gc::CaseSelector::TestCase2);
  EXPECT_EQ(cfg.output_dir, fs::path("/base/out"));
  EXPECT_THROW(gc::parse_scenario(R"({"schema": "gridclear-scenario/2", "feeder": "f"})", "."), gc::SchemaError);
}

TEST(ScenarioConfig, ValidationRejectsBadValues) {
  gc::ScenarioConfig cfg = gc::load_scenario(kData / "ieee123" / "scenario.json");
  EXPECT_NO_THROW(cfg.validate());
  auto broken = [&](auto edit) {
    gc::ScenarioConfig c = cfg;
    edit(c);
    EXPECT_THROW(c.validate(), gc::ConfigError);
  };
  broken([](gc::ScenarioConfig& c) { c.params.period_hours = 0.0; });
  broken([](gc::ScenarioConfig& c) { c.params.network_cost = -1.0; });
  broken([](gc::ScenarioConfig& c) { c.params.big_m = 0.0; });
  broken([](gc::ScenarioConfig& c) { c.polygon_edges = 2; });
  broken([](gc::ScenarioConfig& c) { c.feeder = "/nonexistent/feeder.json"; });
  broken([](gc::ScenarioConfig& c) { c.generation.reset(); });
  broken([](gc::ScenarioConfig& c) { c.ders = "/nonexistent/ders.json"; });
  broken([](gc::ScenarioConfig& c) { c.lmp = {gc::LmpSource::Kind::Affine, 0, 1, 0}; });
}

TEST_F(ScratchDir, ReferenceRunExportsRoundTrip) {
  gc::ScenarioConfig cfg = gc::load_scenario(kData / "ieee123" / "scenario.json");
  cfg.output_dir = dir_;
  const gc::ScenarioOutcome out = gc::run_scenario(cfg);
  ASSERT_EQ(out.code, gc::ExitCode::Ok) << out.message;

  const std::map<std::string, std::string> schemas{{"ders.json", "gridclear-ders/1"},
                                                   {"solution.json", "gridclear-solution/1"},
                                                   {"outcome.json", "gridclear-outcome/1"},
                                                   {"retail.json", "gridclear-retail/1"},
                                                   {"manifest.json", "gridclear-manifest/1"}};
  for (const auto& [file, schema] : schemas) {
    const std::string text = slurp(dir_ / file);
    const Json doc = Json::parse(text);
    EXPECT_EQ(doc["schema"], schema) << file;
    EXPECT_EQ(doc.dump(2) + "\n", text) << file;
  }
  const Json manifest = Json::parse(slurp(dir_ / "manifest.json"));
  EXPECT_TRUE(manifest["complete"].get<bool>());
  EXPECT_EQ(manifest["files"].size(), 8u);

  // The DER file reloads into the same population.
  const gc::Network net = gc::load_network(cfg.feeder);
  const gc::DerPopulation pop = gc::load_ders(net, dir_ / "ders.json");
  EXPECT_EQ(pop.size(), 350u);
  EXPECT_EQ(gc::format_ders(net, pop), slurp(dir_ / "ders.json"));

  // Qualified DERs carry exactly two retail prices.
  std::set<double> qualified;
  const Json retail = Json::parse(slurp(dir_ / "retail.json"));
  for (const Json& r : retail["records"])
    if (r["qualified"].get<bool>()) qualified.insert(r["retail_price_cents_per_kwh"].get<double>());
  EXPECT_EQ(qualified, (std::set<double>{10.5, 15.5}));
}

TEST_F(ScratchDir, PlotDataSeries) {
  gc::ScenarioConfig cfg = gc::load_scenario(kData / "ieee123" / "scenario.json");
  cfg.output_dir = dir_;
  ASSERT_EQ(gc::run_scenario(cfg).code, gc::ExitCode::Ok);
  const gc::Network net = gc::load_network(cfg.feeder);
  std::size_t present = 0;
  for (int bus = 1; bus <= net.size(); ++bus) present += static_cast<std::size_t>(net.buses()[bus].phases.size());

  std::map<std::string, std::size_t> per_series;
  const auto volts = read_csv(dir_ / "voltages.csv");
  for (std::size_t k = 1; k < volts.size(); ++k) ++per_series[volts[k][0]];
  EXPECT_EQ(per_series, (std::map<std::string, std::size_t>{{"A", present}, {"B", present}, {"C", present},
                                                             {"final", present}}));

  // Bid multipliers come from the bids-only solve, offer multipliers from the offers-only one.
  const Json solution = Json::parse(slurp(dir_ / "solution.json"));
  std::map<std::string, double> lambda;
  for (const Json& s : solution["solves"])
    for (const Json& b : s["buses"])
      lambda[s["label"].get<std::string>() + "/" + b["bus"].get<std::string>() + "/" + b["phase"].get<std::string>()] =
          b["lambda_p_cents_per_kwh"].get<double>();
  const auto nqp = read_csv(dir_ / "nqp.csv");
  ASSERT_EQ(nqp.size(), 1 + 2 * present);
  for (std::size_t k = 1; k < nqp.size(); ++k) {
    const std::string bin = nqp[k][0] == "bids" ? "A" : "B";
    EXPECT_EQ(std::stod(nqp[k][3]), lambda.at(bin + "/" + nqp[k][1] + "/" + nqp[k][2]));
  }

  std::map<std::string, double> last;
  const auto curves = read_csv(dir_ / "curves.csv");
  ASSERT_GT(curves.size(), 1u);
  for (std::size_t k = 1; k < curves.size(); ++k) {
    const double cum = std::stod(curves[k][4]);
    EXPECT_GE(cum, last[curves[k][0]]);
    last[curves[k][0]] = cum;
  }
  EXPECT_EQ(read_csv(dir_ / "retail.csv").size(), 351u);
}

TEST_F(ScratchDir, EmptyPopulationCompletes) {
  spill(dir_ / "ders.json", R"({"schema": "gridclear-ders/1", "ders": []})");
  gc::ScenarioConfig cfg;
  cfg.feeder = kData / "ieee123" / "feeder.json";
  cfg.ders = dir_ / "ders.json";
  cfg.output_dir = dir_ / "run";
  ASSERT_EQ(gc::run_scenario(cfg).code, gc::ExitCode::Ok);
  const Json outcome = Json::parse(slurp(cfg.output_dir / "outcome.json"));
  EXPECT_TRUE(outcome["quotes"].empty());
  EXPECT_TRUE(outcome["cleared"]["bids"].empty());
  EXPECT_EQ(outcome["scheduled_net_interchange_kw"].get<double>(), 0.0);
  EXPECT_TRUE(Json::parse(slurp(cfg.output_dir / "retail.json"))["records"].empty());
  const auto volts = read_csv(cfg.output_dir / "voltages.csv");
  EXPECT_GT(volts.size(), 1u);
  EXPECT_EQ(read_csv(cfg.output_dir / "retail.csv").size(), 1u);
}

TEST_F(ScratchDir, TestCaseOneReportsViolation) {
  write_pair_inputs(dir_, 11.0);
  gc::ScenarioConfig cfg;
  cfg.feeder = dir_ / "feeder.json";
  cfg.ders = dir_ / "ders.json";
  cfg.selector = gc::CaseSelector::TestCase1;
  cfg.output_dir = dir_ / "tc1";
  ASSERT_EQ(gc::run_scenario(cfg).code, gc::ExitCode::Ok);
  const Json tc1 = Json::parse(slurp(cfg.output_dir / "outcome.json"));
  EXPECT_GE(tc1["dispatch"]["violation_count"].get<int>(), 1);
  EXPECT_FALSE(tc1["dispatch"]["voltage_violations"].empty());

  cfg.selector = gc::CaseSelector::C;
  cfg.output_dir = dir_ / "c";
  ASSERT_EQ(gc::run_scenario(cfg).code, gc::ExitCode::Ok);
  EXPECT_EQ(Json::parse(slurp(cfg.output_dir / "outcome.json"))["dispatch"]["violation_count"].get<int>(), 0);
}

TEST_F(ScratchDir, FailedStageIsRecorded) {
  spill(dir_ / "ders.json", R"({"schema": "gridclear-ders/1", "ders": [{"id": "x"}]})");
  gc::ScenarioConfig cfg;
  cfg.feeder = kData / "ieee123" / "feeder.json";
  cfg.ders = dir_ / "ders.json";
  cfg.output_dir = dir_ / "run";
  const gc::ScenarioOutcome out = gc::run_scenario(cfg);
  EXPECT_EQ(out.code, gc::ExitCode::Validation);
  EXPECT_EQ(out.failed_stage, "load");
  const Json manifest = Json::parse(slurp(cfg.output_dir / "manifest.json"));
  EXPECT_FALSE(manifest["complete"].get<bool>());
  EXPECT_EQ(manifest["failed_stage"], "load");
}

TEST(ExitCodes, ErrorFamiliesMapToStatus) {
  EXPECT_EQ(gc::exit_code_for(gc::ConfigError("x")), gc::ExitCode::Validation);
  EXPECT_EQ(gc::exit_code_for(gc::TopologyError("x")), gc::ExitCode::Validation);
  EXPECT_EQ(gc::exit_code_for(gc::IoError("x")), gc::ExitCode::Io);
  EXPECT_EQ(gc::exit_code_for(gc::BinInfeasibleError("A", {})), gc::ExitCode::Infeasible);
  EXPECT_EQ(gc::exit_code_for(std::runtime_error("x")), gc::ExitCode::Internal);
}

TEST(RunMarket, OneSidedCasesKeepTheirSide) {
  const gc::MarketContext ctx = gt::contingent_pair(16.0, 9.0, true);
  const gc::LmpSource lmp;
  const gc::RunResult a = gc::run_market(ctx, gc::CaseSelector::A, lmp);
  ASSERT_EQ(a.population->size(), 2u);
  for (const gc::Der& d : a.population->ders()) EXPECT_EQ(d.side(), gc::Side::Bid);
  ASSERT_EQ(a.solves.size(), 1u);
  EXPECT_EQ(a.solves[0].first, "A");
  const gc::RunResult b = gc::run_market(ctx, gc::CaseSelector::B, lmp);
  ASSERT_EQ(b.population->size(), 1u);
  EXPECT_EQ(b.solves[0].first, "B");
}

TEST(RunMarket, TestCaseTwoListsMismatchedDers) {
  // Without the markup in the price test, an offer at 11 clears at lmp 13
  // although it cannot cover the 2.5 network cost.
  const gc::MarketContext ctx =
      gt::make_context(gt::chain_feeder(2, 0.01, 0.01), {gt::make_der("o", 2, "abc", 11.0, 20.0),
                                                          gt::make_der("b", 1, "abc", 20.0, -20.0)});
  const gc::RunResult run = gc::run_market(ctx, gc::CaseSelector::TestCase2, gc::LmpSource{});
  ASSERT_EQ(run.mismatched.size(), 1u);
  EXPECT_EQ((*run.population)[run.mismatched[0]].id, "o");
  ASSERT_TRUE(run.curves_without_cost.has_value());
  EXPECT_DOUBLE_EQ(run.curves_without_cost->offers.at(0).price, 11.0);
  EXPECT_DOUBLE_EQ(run.curves.offers.at(0).price, 13.5);
}
