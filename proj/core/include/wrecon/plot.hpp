#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace wrecon {

struct MetricsRow {
    std::string variant;  // empty for plain sweeps
    std::string mask;
    int depth_level = 0;
    double rmse = 0;
    double mae = 0;
    double pcc = 0;
    int pcc_skipped = 0;
    int samples = 0;
};

/// Parses evaluator CSV (with or without a leading variant column). Throws
/// DataError on an empty table, an unknown header or any malformed field.
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

struct Series {
    std::string name;
    std::vector<double> values;  // NaN entries are left out of the line
};

std::string line_chart_svg(const std::string& title, const std::string& y_label, const std::vector<std::string>& x_labels,
                           const std::vector<Series>& series);

/// Row-major grid rendered with a diverging palette symmetric about zero.
std::string heatmap_panels_svg(const std::string& title, int height, int width,
                               const std::vector<std::pair<std::string, std::vector<double>>>& panels);

/// Writes rmse.svg, mae.svg and pcc.svg (metric against mask, one line per depth).
std::vector<std::filesystem::path> plot_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& out_dir);

/// Writes fields_<level>m.svg (target, prediction, error) per depth of an evaluator field dump.
std::vector<std::filesystem::path> plot_fields(const nlohmann::json& dump, const std::filesystem::path& out_dir);

}  // namespace wrecon
