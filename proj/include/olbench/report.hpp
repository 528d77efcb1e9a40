#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "olbench/experiment.hpp"

namespace olbench {

/// Full report as JSON. With include_timing = false the wall-clock fields are
/// omitted, which leaves only fields that are reproducible under a fixed seed.
nlohmann::json report_to_json(const RunReport& report, bool include_timing = true);
/// Throws ParseError on missing fields, ValidationError on inconsistent content.
RunReport report_from_json(const nlohmann::json& j);

void save_report(const RunReport& report, const std::filesystem::path& path);
RunReport load_report(const std::filesystem::path& path);

/// Metrics x strategies table, one column per report.
struct ComparisonTable {
    std::string dataset_id;
    std::vector<std::string> columns;
    std::vector<std::string> rows;
    std::vector<std::vector<double>> values;  // [row][column]

    std::string to_csv() const;
    std::string to_markdown() const;
    nlohmann::json to_json() const;
};

/// Rows: accuracy (%), mean training step time (ms), max allocated OL memory (kB).
/// Columns follow the fixed strategy order (TinyOL ... CWR), ties kept in input
/// order. Throws ValidationError when reports disagree on dataset or schema.
ComparisonTable compare(std::span<const RunReport> reports);

/// Per-class accuracy (%) companion table: one row per class, one column per report.
std::string per_class_csv(std::span<const RunReport> reports);

}  // namespace olbench
