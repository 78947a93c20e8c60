#pragma once

// Versioned run exports and the tabular plot series derived from them.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gridclear/scenario.hpp"

namespace gridclear {

inline constexpr std::string_view kSolutionSchema = "gridclear-solution/1";
inline constexpr std::string_view kOutcomeSchema = "gridclear-outcome/1";
inline constexpr std::string_view kRetailSchema = "gridclear-retail/1";

std::string solution_document(const Network& network, const RunResult& run);
std::string outcome_document(const Network& network, const RunResult& run);
std::string retail_document(const RunResult& run);

/// Writes solution.json, outcome.json, retail.json and ders.json.
/// Returns the written file names. Throws IoError.
std::vector<std::string> write_exports(const Network& network, const RunResult& run,
                                       const std::filesystem::path& dir);

/// Reads the JSON exports of a run directory and writes voltages.csv,
/// nqp.csv, curves.csv and retail.csv next to them. Returns the file names.
/// Throws IoError or SchemaError.
std::vector<std::string> emit_plot_data(const std::filesystem::path& run_dir);

}  // namespace gridclear
