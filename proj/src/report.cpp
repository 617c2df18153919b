#include "zsl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "binary_io.hpp"
#include "zsl/error.hpp"

namespace zsl {

namespace {

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
    return buf;
}

std::string metric_heading(const MetricKind& m) {
    switch (m.kind) {
        case MetricKind::Kind::EC: return "EC Distance";
        case MetricKind::Kind::EuclideanSq: return "Euclidean Distance";
        case MetricKind::Kind::Cosine: return "Cosine Distance";
    }
    return "?";
}

void require_cells(const std::vector<AblationCell>& cells) {
    if (cells.empty()) throw InvariantError("report needs at least one cell");
}

}  // namespace

std::string format_accuracy_cell(double top1, double top5) { return percent(top1) + "/" + percent(top5); }

std::string render_report_csv(std::vector<AblationCell> cells) {
    require_cells(cells);
    std::stable_sort(cells.begin(), cells.end(), cell_order);
    std::string out = "modalities,direction,metric,top1,top5\n";
    for (const auto& c : cells) {
        out += modality_set_name(c.modalities) + "," + direction_name(c.direction) + "," + c.metric.name() + "," +
               percent(c.result.top1) + "," + percent(c.result.top5) + "\n";
    }
    return out;
}

std::string render_report_markdown(std::vector<AblationCell> cells) {
    require_cells(cells);
    std::stable_sort(cells.begin(), cells.end(), cell_order);

    // Column = (metric, direction), in first-seen report order.
    struct Column {
        MetricKind metric;
        Direction direction;
    };
    std::vector<Column> columns;
    for (const auto& c : cells) {
        bool known = std::any_of(columns.begin(), columns.end(),
                                 [&](const Column& col) { return col.metric == c.metric && col.direction == c.direction; });
        if (!known) columns.push_back({c.metric, c.direction});
    }
    std::stable_sort(columns.begin(), columns.end(), [](const Column& a, const Column& b) {
        if (a.metric.kind != b.metric.kind) return a.metric.kind > b.metric.kind;
        if (a.metric.eta != b.metric.eta) return a.metric.eta < b.metric.eta;
        return a.direction < b.direction;
    });

    std::string out = "| Semantic Representation |";
    std::string rule = "|---|";
    for (const auto& col : columns) {
        std::string heading = metric_heading(col.metric);
        if (col.metric.kind == MetricKind::Kind::EC) heading += " (eta=" + detail::format_exact(col.metric.eta) + ")";
        out += " " + heading + " " + direction_label(col.direction) + " |";
        rule += "---|";
    }
    out += "\n" + rule + "\n";

    std::vector<ModalitySet> rows;
    for (const auto& c : cells) {
        if (std::find(rows.begin(), rows.end(), c.modalities) == rows.end()) rows.push_back(c.modalities);
    }
    for (const auto& subset : rows) {
        out += "| " + modality_set_name(subset) + " |";
        for (const auto& col : columns) {
            auto it = std::find_if(cells.begin(), cells.end(), [&](const AblationCell& c) {
                return c.modalities == subset && c.metric == col.metric && c.direction == col.direction;
            });
            out += " " + (it == cells.end() ? std::string("-") : format_accuracy_cell(it->result.top1, it->result.top5)) + " |";
        }
        out += "\n";
    }
    return out;
}

void emit_report(const std::vector<AblationCell>& cells, ReportFormat format, const std::filesystem::path& path) {
    require_cells(cells);
    detail::write_text_file(path, format == ReportFormat::Csv ? render_report_csv(cells) : render_report_markdown(cells));
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "modalities,direction,metric,top1,top5") {
        throw FormatError("malformed header: report CSV");
    }
    std::vector<ReportRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        if (fields.size() != 5) throw FormatError("malformed report row '" + line + "'");
        ReportRow r{fields[0], fields[1], fields[2], 0.0, 0.0};
        try {
            r.top1_percent = std::stod(fields[3]);
            r.top5_percent = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw FormatError("malformed accuracy in report row '" + line + "'");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace zsl
