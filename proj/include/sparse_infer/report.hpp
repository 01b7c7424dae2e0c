#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparse_infer/mc.hpp"

namespace sparse_infer {

/// Insertion-ordered, so serialized reports keep a fixed key order.
using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "sparse-infer/1";

/// {"schema", "kind", ...payload} with the schema tag first.
Json tagged(const std::string& kind, Json payload);

Json to_json(const DgpSpec& spec);
DgpSpec dgp_spec_from_json(const Json& j);

/// Missing metric values and standard errors become null.
Json to_json(const McReport& report);
/// Inverse of to_json; throws InputError on a schema mismatch.
McReport mc_report_from_json(const Json& j);
/// Header plus one line per (block, estimator): block, estimator, then
/// value and mc_se for every metric name seen in the report.
std::string to_csv(const McReport& report);
std::string to_text(const McReport& report);

Json to_json(const PowerCurve& curve);
/// Columns a, iv_lasso, sup_score.
std::string to_csv(const PowerCurve& curve);

/// Point estimate with an optional normal-approximation interval.
struct EstimateRow {
    std::string label;
    double estimate = 0.0;
    std::optional<double> se;
    std::vector<std::string> selected;
};

struct EstimateTable {
    std::string title;
    std::vector<EstimateRow> rows;
    std::vector<std::string> notes;
};

/// Columns: estimator, estimate, SE, 90% CI, 95% CI, selected.
std::string to_text(const EstimateTable& table);
std::string to_csv(const EstimateTable& table);
Json to_json(const EstimateTable& table);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Left-aligned first column, right-aligned others; widths fit the content.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// Throws InputError when the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace sparse_infer
