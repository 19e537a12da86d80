#pragma once

#include <map>
#include <optional>
#include <string>

#include "nag/harness.hpp"
#include "nag/relabel.hpp"

namespace nag {

enum class ReportFormat { kStructured, kTabular };

// Structured form is versioned JSON and round-trips through parse_report;
// tabular form is one CSV row per fold with a fixed column order.
std::string report_to_string(const Report& report);
std::string report_to_csv(const Report& report);
void emit_report(const Report& report, const std::string& path, ReportFormat format);
Report parse_report(const std::string& path);

// Single-run summary for the train command.
std::string train_report_to_string(const RunArtifacts& art, const Dataset& ds,
                                   const std::map<std::string, std::string>& config);

// Diagnostic emitters for the refine and distances commands.
std::string relabel_report_to_string(const std::optional<RelabelOutcome>& outcome,
                                     const std::optional<GmmParams>& gmm, bool fallback,
                                     const std::map<std::string, std::string>& config);
std::string distance_stats_to_string(const DistanceStats& stats,
                                     const std::map<std::string, std::string>& config);
std::string distance_stats_to_csv(const DistanceStats& stats);

}  // namespace nag
