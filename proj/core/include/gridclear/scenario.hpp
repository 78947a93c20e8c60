#pragma once

// Scenario configuration and end-to-end market runs.

#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridclear/pipeline.hpp"
#include "gridclear/retail.hpp"

namespace gridclear {

enum class CaseSelector { A, B, C, TestCase1, TestCase2 };

std::string to_string(CaseSelector selector);
/// Accepts A, B, C, test-case-1, test-case-2. Throws ConfigError.
CaseSelector parse_case(std::string_view text);

inline constexpr std::string_view kScenarioSchema = "gridclear-scenario/1";

struct ScenarioConfig {
  std::filesystem::path feeder;
  std::optional<std::filesystem::path> ders;
  std::optional<GenerationSpec> generation;
  MarketParams params;
  int polygon_edges = 12;
  LmpSource lmp;
  std::filesystem::path output_dir = "run";
  CaseSelector selector = CaseSelector::C;

  /// Throws ConfigError for missing inputs or non-positive parameters.
  void validate() const;
};

/// Parses a scenario document; relative paths resolve against `base_dir`.
ScenarioConfig parse_scenario(std::string_view document, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Everything a run produces, before serialisation.
struct RunResult {
  CaseSelector selector = CaseSelector::C;
  MarketParams params;
  /// Population the run used; one-sided cases keep only their side.
  std::shared_ptr<const DerPopulation> population;
  /// Named solves: bins "A", "B", "C", or the single solve of a one-sided
  /// case labelled by its bin.
  std::vector<std::pair<std::string, TdopfSolution>> solves;
  std::optional<Bins> bins;
  std::vector<IdsoQuote> quotes;
  Curves curves;
  /// Curves built without the network markup (test case 2 only).
  std::optional<Curves> curves_without_cost;
  WpmOutcome outcome;
  std::vector<double> qualification;
  std::vector<RetailSignal> retail;
  DispatchReport dispatch;
  /// Cleared DERs whose own price cannot cover the markup (test case 2).
  std::vector<std::size_t> mismatched;
};

/// Runs the selected case on an assembled market.
/// One-sided cases use only the DERs of their side.
RunResult run_market(const MarketContext& ctx, CaseSelector selector, const LmpSource& lmp);

/// Exit status of a scenario run.
enum class ExitCode : int { Ok = 0, Internal = 1, Validation = 2, Infeasible = 3, Io = 4 };

/// Exit status for an error escaping a library call.
ExitCode exit_code_for(const std::exception& error);

struct ScenarioOutcome {
  ExitCode code = ExitCode::Ok;
  std::string failed_stage;
  std::string message;
};

/// Loads inputs, runs the market and writes every export plus plot data
/// and a manifest into the output directory. Never throws for input
/// problems: they are reported through the returned outcome and manifest.
ScenarioOutcome run_scenario(const ScenarioConfig& config);

/// Builds the market context for a configuration (loads feeder and DERs).
MarketContext load_market(const ScenarioConfig& config);

}  // namespace gridclear
