#pragma once

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "judgekit/io.hpp"

namespace judgekit {

/// Label polarity. An unacceptable label forces the case score to 0; an
/// acceptable label caps it at 1.
enum class Polarity { unacceptable, acceptable };

inline const char* polarity_name(Polarity p) {
    return p == Polarity::unacceptable ? "unacceptable" : "acceptable";
}

inline Polarity polarity_from_name(std::string_view s, const std::string& where) {
    if (s == "unacceptable") return Polarity::unacceptable;
    if (s == "acceptable") return Polarity::acceptable;
    throw SchemaError("unknown polarity \"" + std::string(s) + "\" in " + where);
}

enum class CountUnit { characters, characters_excluding_whitespace, whitespace_tokens };

inline const char* count_unit_name(CountUnit u) {
    switch (u) {
        case CountUnit::characters: return "characters";
        case CountUnit::characters_excluding_whitespace: return "characters_excluding_whitespace";
        default: return "whitespace_tokens";
    }
}

inline CountUnit count_unit_from_name(std::string_view s, const std::string& where) {
    if (s == "characters") return CountUnit::characters;
    if (s == "characters_excluding_whitespace") return CountUnit::characters_excluding_whitespace;
    if (s == "whitespace_tokens") return CountUnit::whitespace_tokens;
    throw SchemaError("unknown count unit \"" + std::string(s) + "\" in " + where);
}

/// Length requirement attached to a rule-based label. Judge models cannot
/// count reliably, so these labels bypass the model entirely.
struct WordCountRule {
    long min = 0;
    long max = std::numeric_limits<long>::max();
    CountUnit unit = CountUnit::characters_excluding_whitespace;

    friend bool operator==(const WordCountRule&, const WordCountRule&) = default;
};

struct LabelSpec {
    std::string name;
    std::string description;
    Polarity polarity = Polarity::unacceptable;
    std::string task;
    bool rule_based = false;
    std::optional<WordCountRule> word_count;  // required iff rule_based

    friend bool operator==(const LabelSpec&, const LabelSpec&) = default;
};

/// Ordered, validated label set for one task. Immutable after construction;
/// label order drives prompt assembly and call order, so it is preserved
/// exactly as authored.
class CriteriaSet {
public:
    static constexpr int kSchemaVersion = 1;

    CriteriaSet(std::string task, std::vector<LabelSpec> labels, int max_labels_hint = 10)
        : task_(std::move(task)), labels_(std::move(labels)), max_labels_hint_(max_labels_hint) {
        validate();
    }

    static CriteriaSet from_json(const json& doc, const std::string& where) {
        if (!doc.is_object()) throw SchemaError("criteria document must be an object in " + where);
        require_schema_version(doc, kSchemaVersion, where);
        check_known_fields(doc, {"schema_version", "task", "max_labels_hint", "labels"}, where);
        std::string task = require_string(doc, "task", where);
        int hint = 10;
        if (doc.contains("max_labels_hint")) {
            if (!doc["max_labels_hint"].is_number_integer() || doc["max_labels_hint"].get<int>() < 1)
                throw SchemaError("max_labels_hint must be a positive integer in " + where);
            hint = doc["max_labels_hint"].get<int>();
        }
        const json& arr = require_field(doc, "labels", where);
        if (!arr.is_array()) throw SchemaError("\"labels\" must be an array in " + where);
        std::vector<LabelSpec> labels;
        for (const json& l : arr) {
            std::string lw = where + ", label #" + std::to_string(labels.size());
            if (!l.is_object()) throw SchemaError("label entry must be an object in " + lw);
            check_known_fields(l, {"name", "description", "polarity", "rule_based", "word_count"}, lw);
            LabelSpec spec;
            spec.name = require_string(l, "name", lw);
            spec.description = require_string(l, "description", lw);
            spec.polarity = polarity_from_name(require_string(l, "polarity", lw), lw);
            spec.task = task;
            if (l.contains("rule_based")) {
                if (!l["rule_based"].is_boolean()) throw SchemaError("rule_based must be boolean in " + lw);
                spec.rule_based = l["rule_based"].get<bool>();
            }
            if (spec.rule_based) {
                const json& wc = require_field(l, "word_count", lw);
                check_known_fields(wc, {"min", "max", "unit"}, lw + ".word_count");
                WordCountRule rule;
                rule.min = require_field(wc, "min", lw).get<long>();
                rule.max = require_field(wc, "max", lw).get<long>();
                rule.unit = count_unit_from_name(require_string(wc, "unit", lw), lw);
                if (rule.min > rule.max) throw SchemaError("word_count.min > word_count.max in " + lw);
                spec.word_count = rule;
            } else if (l.contains("word_count")) {
                throw SchemaError("word_count is only valid on rule_based labels in " + lw);
            }
            labels.push_back(std::move(spec));
        }
        return CriteriaSet(std::move(task), std::move(labels), hint);
    }

    static CriteriaSet load(const std::filesystem::path& path) {
        return from_json(read_json_file(path), path.string());
    }

    json to_json() const {
        json labels = json::array();
        for (const LabelSpec& l : labels_) {
            json j{{"name", l.name},
                   {"description", l.description},
                   {"polarity", polarity_name(l.polarity)},
                   {"rule_based", l.rule_based}};
            if (l.word_count) {
                j["word_count"] = {{"min", l.word_count->min},
                                   {"max", l.word_count->max},
                                   {"unit", count_unit_name(l.word_count->unit)}};
            }
            labels.push_back(std::move(j));
        }
        return json{{"schema_version", kSchemaVersion},
                    {"task", task_},
                    {"max_labels_hint", max_labels_hint_},
                    {"labels", std::move(labels)}};
    }

    const std::string& task() const { return task_; }
    const std::vector<LabelSpec>& labels() const { return labels_; }
    int max_labels_hint() const { return max_labels_hint_; }

    const LabelSpec* find(std::string_view name) const {
        for (const LabelSpec& l : labels_) {
            if (l.name == name) return &l;
        }
        return nullptr;
    }

    bool contains(std::string_view name) const { return find(name) != nullptr; }

    /// Labels the judge model evaluates; rule-based labels are routed to the
    /// rule checker instead.
    std::vector<const LabelSpec*> model_judged() const {
        std::vector<const LabelSpec*> out;
        for (const LabelSpec& l : labels_) {
            if (!l.rule_based) out.push_back(&l);
        }
        return out;
    }

    friend bool operator==(const CriteriaSet& a, const CriteriaSet& b) {
        return a.task_ == b.task_ && a.labels_ == b.labels_ &&
               a.max_labels_hint_ == b.max_labels_hint_;
    }

private:
    void validate() const {
        if (labels_.empty()) throw SchemaError("empty criteria set for task \"" + task_ + "\"");
        if (task_.empty()) throw SchemaError("criteria set has empty task identifier");
        std::set<std::string_view> seen;
        for (const LabelSpec& l : labels_) {
            if (l.name.empty()) throw SchemaError("label with empty name in task \"" + task_ + "\"");
            if (l.description.empty())
                throw SchemaError("empty description for label \"" + l.name + "\"");
            if (!seen.insert(l.name).second)
                throw SchemaError("duplicate label \"" + l.name + "\" in task \"" + task_ + "\"");
            if (l.rule_based && !l.word_count)
                throw SchemaError("rule_based label \"" + l.name + "\" lacks a word_count rule");
        }
    }

    std::string task_;
    std::vector<LabelSpec> labels_;
    int max_labels_hint_;
};

/// Case-level score from the set of present labels: 0 when any unacceptable
/// label appears, 1 when only acceptable labels appear, 2 when none appears.
inline int final_score(const std::set<std::string>& present_labels, const CriteriaSet& criteria) {
    bool any_unacceptable = false;
    bool any_acceptable = false;
    for (const std::string& name : present_labels) {
        const LabelSpec* spec = criteria.find(name);
        if (!spec) throw SchemaError("unknown label \"" + name + "\" for task \"" + criteria.task() + "\"");
        if (spec->polarity == Polarity::unacceptable) {
            any_unacceptable = true;
        } else {
            any_acceptable = true;
        }
    }
    if (any_unacceptable) return 0;
    if (any_acceptable) return 1;
    return 2;
}

}  // namespace judgekit
