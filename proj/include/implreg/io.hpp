#pragma once

#include "implreg/experiments.hpp"
#include "implreg/oracle.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace implreg {

using json = nlohmann::json;

inline constexpr const char* kResultsSchema = "implreg-results v1";
inline constexpr const char* kInstanceSchema = "implreg-instance v1";
inline constexpr const char* kSummarySchema = "implreg-summary v1";

/// Column names of results.csv in order.
const std::vector<std::string>& result_columns();

/**
 * results.csv body: a "# implreg-results v1" line, the header row, then one
 * line per row. Reals use %.17g, non-finite values are nan / inf / -inf and
 * not-applicable fields NA. Wall time is left out so the output depends only
 * on the inputs.
 */
std::string results_csv(const ResultTable& table);

/// instance, solver, wall_time sidecar.
std::string timings_csv(const ResultTable& table);

std::string format_real(double v);

json to_json(const SymMat& m);
SymMat sym_from_json(const json& j);
json to_json(const ProblemInstance& inst, const std::string& id);
ProblemInstance instance_from_json(const json& j);
json to_json(const KKTCertificate& c);
json to_json(const OracleResult& r);
json to_json(const Summary& s);
json to_json(const GridSearchStats& s);

/// Config documents overlay a preset; unknown keys raise ConfigError.
void apply_json(const json& j, SweepConfig& cfg);
void apply_json(const json& j, FlowConfig& cfg);
void apply_json(const json& j, GridSearchConfig& cfg);
json to_json(const SweepConfig& cfg);
json to_json(const FlowConfig& cfg);
json to_json(const GridSearchConfig& cfg);

json read_json_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, const std::string& text);

}  // namespace implreg
