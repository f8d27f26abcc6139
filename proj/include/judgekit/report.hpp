#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "judgekit/io.hpp"
#include "judgekit/metrics.hpp"

namespace judgekit {

enum class ReportFormat { table, structured };

namespace reportdetail {

/// Fixed 4 decimal places with trailing zeros trimmed: 0.52, 0.3611, 1.
inline std::string format_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s.empty() ? "0" : s;
}

inline std::string format_opt(const std::optional<double>& v) {
    return v ? format_rate(*v) : "n/a";
}

inline json rate_to_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

inline std::optional<double> rate_from_json(const json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

}  // namespace reportdetail

inline json report_to_json(const MetricReport& report) {
    using reportdetail::rate_to_json;
    json splits = json::array();
    for (const SplitReport& s : report.splits) {
        json labels = json::array();
        for (const LabelReport& l : s.labels) {
            labels.push_back({{"label", l.label},
                              {"confusion",
                               {{"tp", l.confusion.tp},
                                {"fp", l.confusion.fp},
                                {"fn", l.confusion.fn},
                                {"tn", l.confusion.tn}}},
                              {"accuracy", rate_to_json(l.rates.accuracy)},
                              {"precision", rate_to_json(l.rates.precision)},
                              {"recall", rate_to_json(l.rates.recall)},
                              {"f1", rate_to_json(l.rates.f1)}});
        }
        splits.push_back({{"split", s.split_name},
                          {"method", s.method},
                          {"evaluated", s.evaluated},
                          {"failed", s.failed},
                          {"spearman", rate_to_json(s.correlations.spearman)},
                          {"pearson", rate_to_json(s.correlations.pearson)},
                          {"kendall", rate_to_json(s.correlations.kendall)},
                          {"labels", std::move(labels)}});
    }
    return json{{"schema_version", 1}, {"task", report.task}, {"splits", std::move(splits)}};
}

inline MetricReport report_from_json(const json& doc, const std::string& where) {
    using reportdetail::rate_from_json;
    require_schema_version(doc, 1, where);
    check_known_fields(doc, {"schema_version", "task", "splits"}, where);
    MetricReport report;
    report.task = require_string(doc, "task", where);
    for (const json& s : require_field(doc, "splits", where)) {
        SplitReport split;
        split.split_name = require_string(s, "split", where);
        split.method = require_string(s, "method", where);
        split.evaluated = require_field(s, "evaluated", where).get<size_t>();
        split.failed = require_field(s, "failed", where).get<size_t>();
        split.correlations.spearman = rate_from_json(require_field(s, "spearman", where));
        split.correlations.pearson = rate_from_json(require_field(s, "pearson", where));
        split.correlations.kendall = rate_from_json(require_field(s, "kendall", where));
        for (const json& l : require_field(s, "labels", where)) {
            LabelReport label;
            label.label = require_string(l, "label", where);
            const json& conf = require_field(l, "confusion", where);
            label.confusion.tp = require_field(conf, "tp", where).get<uint64_t>();
            label.confusion.fp = require_field(conf, "fp", where).get<uint64_t>();
            label.confusion.fn = require_field(conf, "fn", where).get<uint64_t>();
            label.confusion.tn = require_field(conf, "tn", where).get<uint64_t>();
            label.rates.accuracy = rate_from_json(require_field(l, "accuracy", where));
            label.rates.precision = rate_from_json(require_field(l, "precision", where));
            label.rates.recall = rate_from_json(require_field(l, "recall", where));
            label.rates.f1 = rate_from_json(require_field(l, "f1", where));
            split.labels.push_back(std::move(label));
        }
        report.splits.push_back(std::move(split));
    }
    return report;
}

/// Aligned text table with the method / task / label row structure and one
/// Spearman/Pearson/Kendall, Acc, F1/Precision/Recall column group per split.
/// Correlations are per task, so they print on the first label row only.
inline std::string render_report_table(const MetricReport& report) {
    using reportdetail::format_opt;

    std::vector<std::string> split_names;
    for (const SplitReport& s : report.splits) split_names.push_back(s.split_name);

    // Label rows are aligned across splits by label name of the first split.
    const std::vector<SplitReport>& splits = report.splits;
    size_t label_rows = splits.empty() ? 0 : splits.front().labels.size();

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Method", "Task", "Label"};
    for (const std::string& name : split_names) header.push_back("S/P/K (" + name + ")");
    for (const std::string& name : split_names) header.push_back("Acc (" + name + ")");
    for (const std::string& name : split_names) header.push_back("F1/P/R (" + name + ")");
    rows.push_back(header);

    for (size_t i = 0; i < label_rows; ++i) {
        std::vector<std::string> row;
        row.push_back(i == 0 && !splits.empty() ? splits.front().method : "");
        row.push_back(i == 0 ? report.task : "");
        row.push_back(splits.front().labels[i].label);
        for (const SplitReport& s : splits) {
            if (i == 0) {
                row.push_back(format_opt(s.correlations.spearman) + "/" +
                              format_opt(s.correlations.pearson) + "/" +
                              format_opt(s.correlations.kendall));
            } else {
                row.push_back("");
            }
        }
        for (const SplitReport& s : splits) {
            row.push_back(i < s.labels.size() ? format_opt(s.labels[i].rates.accuracy) : "");
        }
        for (const SplitReport& s : splits) {
            if (i >= s.labels.size()) {
                row.push_back("");
                continue;
            }
            const RateSet& r = s.labels[i].rates;
            row.push_back(format_opt(r.f1) + "/" + format_opt(r.precision) + "/" +
                          format_opt(r.recall));
        }
        rows.push_back(std::move(row));
    }

    std::vector<size_t> widths(rows.front().size(), 0);
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    std::string out;
    for (size_t r = 0; r < rows.size(); ++r) {
        for (size_t c = 0; c < rows[r].size(); ++c) {
            std::string cell = rows[r][c];
            cell.resize(widths[c], ' ');
            out += cell;
            if (c + 1 < rows[r].size()) out += "  | ";
        }
        out += '\n';
        if (r == 0) {
            for (size_t c = 0; c < widths.size(); ++c) {
                out += std::string(widths[c], '-');
                if (c + 1 < widths.size()) out += "--+-";
            }
            out += '\n';
        }
    }
    if (!splits.empty()) {
        out += '\n';
        for (const SplitReport& s : splits) {
            out += s.split_name + ": " + std::to_string(s.evaluated) + " cases evaluated, " +
                   std::to_string(s.failed) + " failed\n";
        }
    }
    return out;
}

inline std::string render_report(const MetricReport& report, ReportFormat format) {
    if (format == ReportFormat::structured) return report_to_json(report).dump(2) + "\n";
    return render_report_table(report);
}

}  // namespace judgekit
