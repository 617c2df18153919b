#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zsl/eval.hpp"

namespace zsl {

enum class ReportFormat { Csv, Markdown };

/// "52.1/85.7" for top1=0.521, top5=0.857.
std::string format_accuracy_cell(double top1, double top5);

/// Header "modalities,direction,metric,top1,top5"; accuracies as percentages
/// with one decimal.
std::string render_report_csv(std::vector<AblationCell> cells);

/// Rows are modality subsets; columns are metric x direction, each cell
/// "top1/top5" in percent.
std::string render_report_markdown(std::vector<AblationCell> cells);

/// Throws InvariantError for an empty cell list, IoError on write failure.
void emit_report(const std::vector<AblationCell>& cells, ReportFormat format, const std::filesystem::path& path);

struct ReportRow {
    std::string modalities;
    std::string direction;
    std::string metric;
    double top1_percent = 0.0;
    double top5_percent = 0.0;
};

std::vector<ReportRow> parse_report_csv(const std::string& text);

}  // namespace zsl
