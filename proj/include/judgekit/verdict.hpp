#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "judgekit/criteria.hpp"
#include "judgekit/error.hpp"
#include "judgekit/io.hpp"
#include "judgekit/text.hpp"

namespace judgekit {

/// Which protocol call produced a verdict.
enum class Stage { zero_shot, few_shot, synthesis, rule_based };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::zero_shot: return "zero_shot";
        case Stage::few_shot: return "few_shot";
        case Stage::synthesis: return "synthesis";
        default: return "rule_based";
    }
}

inline Stage stage_from_name(std::string_view s, const std::string& where) {
    if (s == "zero_shot") return Stage::zero_shot;
    if (s == "few_shot") return Stage::few_shot;
    if (s == "synthesis") return Stage::synthesis;
    if (s == "rule_based") return Stage::rule_based;
    throw SchemaError("unknown stage \"" + std::string(s) + "\" in " + where);
}

struct JudgeVerdict {
    std::string label;
    bool present = false;
    std::string reason;
    Stage stage = Stage::few_shot;

    friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;

    json to_json() const {
        return json{{"label", label},
                    {"present", present},
                    {"reason", reason},
                    {"stage", stage_name(stage)}};
    }

    static JudgeVerdict from_json(const json& doc, const std::string& where) {
        check_known_fields(doc, {"label", "present", "reason", "stage"}, where);
        JudgeVerdict v;
        v.label = require_string(doc, "label", where);
        v.present = require_field(doc, "present", where).get<bool>();
        v.reason = require_string(doc, "reason", where);
        v.stage = stage_from_name(require_string(doc, "stage", where), where);
        return v;
    }
};

namespace verdictdetail {

inline std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t end = s.find('\n', pos);
        if (end == std::string_view::npos) {
            lines.emplace_back(s.substr(pos));
            break;
        }
        lines.emplace_back(s.substr(pos, end - pos));
        pos = end + 1;
    }
    return lines;
}

/// Parses "VERDICT: PRESENT|ABSENT" (case-insensitive, surrounding whitespace
/// allowed). Returns true on match and sets `present`.
inline bool match_verdict_line(std::string_view line, bool& present) {
    std::string t = text::lowercase_ascii(trim(line));
    if (t.rfind("verdict", 0) != 0) return false;
    size_t pos = 7;
    while (pos < t.size() && t[pos] == ' ') ++pos;
    if (pos >= t.size() || t[pos] != ':') return false;
    ++pos;
    while (pos < t.size() && t[pos] == ' ') ++pos;
    std::string value = t.substr(pos);
    if (value == "present") {
        present = true;
        return true;
    }
    if (value == "absent") {
        present = false;
        return true;
    }
    return false;
}

/// Parses "LABEL <name> VERDICT: PRESENT|ABSENT". The name is matched
/// verbatim (it may contain spaces); keywords are case-insensitive.
inline bool match_label_verdict_line(std::string_view line, std::string& name, bool& present) {
    std::string t = trim(line);
    std::string lower = text::lowercase_ascii(t);
    if (lower.rfind("label ", 0) != 0) return false;
    size_t verdict_pos = lower.rfind(" verdict");
    if (verdict_pos == std::string::npos || verdict_pos <= 6) return false;
    if (!match_verdict_line(t.substr(verdict_pos + 1), present)) return false;
    name = trim(t.substr(6, verdict_pos - 6));
    return !name.empty();
}

}  // namespace verdictdetail

/// Extracts the final verdict marker from a completion. The last non-empty
/// line must be the marker; everything before it is the reason. A completion
/// without a parsable marker, or without any reason text, is a ParseError
/// rather than a silent default.
inline JudgeVerdict parse_verdict(const std::string& raw, const LabelSpec& label,
                                  Stage stage = Stage::few_shot) {
    if (raw.empty()) throw ParseError("empty completion for label \"" + label.name + "\"", raw);
    std::vector<std::string> lines = verdictdetail::split_lines(raw);
    int marker_index = -1;
    bool present = false;
    for (int i = static_cast<int>(lines.size()) - 1; i >= 0; --i) {
        if (verdictdetail::trim(lines[i]).empty()) continue;
        if (verdictdetail::match_verdict_line(lines[i], present)) marker_index = i;
        break;  // only the final non-empty line may carry the marker
    }
    if (marker_index < 0)
        throw ParseError("no verdict marker found for label \"" + label.name + "\"", raw);
    std::string reason;
    for (int i = 0; i < marker_index; ++i) {
        reason += lines[i];
        if (i + 1 < marker_index) reason += '\n';
    }
    reason = verdictdetail::trim(reason);
    if (reason.empty())
        throw ParseError("completion carries a verdict but no reasoning for label \"" + label.name +
                             "\"",
                         raw);
    return JudgeVerdict{label.name, present, reason, stage};
}

/// Parses an undivided (all labels at once) completion. Every expected label
/// must appear on exactly one marker line; anything less fails closed.
inline std::map<std::string, bool> parse_multi_label_verdicts(
    const std::string& raw, const std::vector<const LabelSpec*>& labels) {
    if (raw.empty()) throw ParseError("empty undivided completion", raw);
    std::map<std::string, bool> found;
    for (const std::string& line : verdictdetail::split_lines(raw)) {
        std::string name;
        bool present = false;
        if (!verdictdetail::match_label_verdict_line(line, name, present)) continue;
        if (found.count(name))
            throw ParseError("duplicate verdict line for label \"" + name + "\"", raw);
        found[name] = present;
    }
    std::map<std::string, bool> out;
    for (const LabelSpec* label : labels) {
        auto it = found.find(label->name);
        if (it == found.end())
            throw ParseError("undivided response is missing a verdict for label \"" + label->name +
                                 "\"",
                             raw);
        out[label->name] = it->second;
        found.erase(it);
    }
    if (!found.empty())
        throw ParseError("undivided response names unknown label \"" + found.begin()->first + "\"",
                         raw);
    return out;
}

/// Deterministic length check for rule-based labels. The verdict is
/// "present" (the problem label applies) when the measured count falls
/// outside [min, max].
inline JudgeVerdict word_count_check(const std::string& answer, const WordCountRule& rule,
                                     const std::string& label_name) {
    if (rule.min > rule.max) throw SchemaError("word_count rule has min > max");
    long count = 0;
    switch (rule.unit) {
        case CountUnit::characters:
            count = static_cast<long>(text::count_codepoints(answer));
            break;
        case CountUnit::characters_excluding_whitespace:
            count = static_cast<long>(text::count_codepoints_excluding_whitespace(answer));
            break;
        case CountUnit::whitespace_tokens:
            count = static_cast<long>(text::count_whitespace_tokens(answer));
            break;
    }
    bool violation = count < rule.min || count > rule.max;
    std::string reason = "Rule check: counted " + std::to_string(count) + " " +
                         count_unit_name(rule.unit) + "; allowed range is [" +
                         std::to_string(rule.min) + ", " + std::to_string(rule.max) + "].";
    return JudgeVerdict{label_name, violation, std::move(reason), Stage::rule_based};
}

}  // namespace judgekit
