#pragma once

// Comma-separated output tables. Every table opens with `#`-prefixed header
// lines (tool version, model hash, grid, config echo) followed by one column
// header row. Numbers use the shortest round-trip decimal form, so a written
// table reads back to the same doubles.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "rsctmdp/convergence.hpp"
#include "rsctmdp/lyapunov.hpp"
#include "rsctmdp/model.hpp"
#include "rsctmdp/simulator.hpp"
#include "rsctmdp/solver.hpp"

namespace rsctmdp {

inline constexpr std::string_view kToolName = "rsctmdp";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest round-trip decimal; "inf", "-inf" and "nan" for non-finite values.
std::string format_double(double v);
/// 16 lowercase hex digits.
std::string format_hash(std::uint64_t h);

/// Header block shared by all tables.
struct TableHeader {
    std::uint64_t model_hash = 0;
    /// e.g. "T=1,steps=2000"; empty when the table has no time grid.
    std::string grid;
    /// Compact JSON echo of the run configuration.
    std::string config;
};

void write_header(std::ostream& out, const TableHeader& header);

void write_value_table(std::ostream& out, const TableHeader& header, const ValueFunction& values);
void write_policy_table(std::ostream& out, const TableHeader& header, const Policy& policy);

struct EstimateRow {
    std::string policy_id;
    State initial_state = 0;
    MCEstimate estimate;
};
void write_estimate_table(std::ostream& out, const TableHeader& header, const std::vector<EstimateRow>& rows);
void write_paths_table(std::ostream& out, const TableHeader& header, const std::vector<PathSummary>& paths);

void write_certificate_table(std::ostream& out, const TableHeader& header, const CertificateReport& report);
void write_ladder_table(std::ostream& out, const TableHeader& header, const LadderReport& report);
void write_refinement_table(std::ostream& out, const TableHeader& header, const std::vector<RefinementRow>& rows);

void write_compare_tables(std::ostream& ranking, std::ostream& pairs, const TableHeader& header,
                          const std::vector<std::string>& policy_ids, State initial_state,
                          const PolicyComparison& comparison);

/// Reads a table written by write_policy_table. Throws ValidationError when
/// the stored model hash differs from `model` or an action is off its grid.
Policy read_policy_table(std::istream& in, const Model& model);
Policy read_policy_file(const std::filesystem::path& path, const Model& model);

}  // namespace rsctmdp
