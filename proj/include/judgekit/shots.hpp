#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "judgekit/criteria.hpp"
#include "judgekit/io.hpp"

namespace judgekit {

enum class ExemplarPolarity { positive, negative };

inline const char* exemplar_polarity_name(ExemplarPolarity p) {
    return p == ExemplarPolarity::positive ? "positive" : "negative";
}

inline ExemplarPolarity exemplar_polarity_from_name(std::string_view s, const std::string& where) {
    if (s == "positive") return ExemplarPolarity::positive;
    if (s == "negative") return ExemplarPolarity::negative;
    throw SchemaError("unknown exemplar_polarity \"" + std::string(s) + "\" in " + where);
}

/// One authored exemplar for a label: a sample answer, the rationale a judge
/// should give, and the verdict. A positive shot shows the label present.
struct Shot {
    std::string label;
    ExemplarPolarity exemplar_polarity = ExemplarPolarity::positive;
    std::string case_text;
    std::string reason;
    bool verdict_present = true;

    friend bool operator==(const Shot&, const Shot&) = default;

    void validate(const std::string& where) const {
        if (reason.empty()) throw SchemaError("empty shot reason in " + where);
        if (case_text.empty()) throw SchemaError("empty shot case_text in " + where);
        bool positive = exemplar_polarity == ExemplarPolarity::positive;
        if (positive != verdict_present)
            throw SchemaError("verdict inconsistent with exemplar_polarity in " + where);
    }

    static Shot from_json(const json& doc, const std::string& label, const std::string& where) {
        if (!doc.is_object()) throw SchemaError("shot must be an object in " + where);
        check_known_fields(doc, {"exemplar_polarity", "case_text", "reason", "verdict"}, where);
        Shot s;
        s.label = label;
        s.exemplar_polarity =
            exemplar_polarity_from_name(require_string(doc, "exemplar_polarity", where), where);
        s.case_text = require_string(doc, "case_text", where);
        s.reason = require_string(doc, "reason", where);
        std::string verdict = require_string(doc, "verdict", where);
        if (verdict == "present") {
            s.verdict_present = true;
        } else if (verdict == "absent") {
            s.verdict_present = false;
        } else {
            throw SchemaError("unknown verdict \"" + verdict + "\" in " + where);
        }
        s.validate(where);
        return s;
    }

    json to_json() const {
        return json{{"exemplar_polarity", exemplar_polarity_name(exemplar_polarity)},
                    {"case_text", case_text},
                    {"reason", reason},
                    {"verdict", verdict_present ? "present" : "absent"}};
    }
};

/// Immutable snapshot of all exemplars for one task at one version. New
/// versions are written as whole new documents; readers never see a partial
/// edit.
struct ShotSet {
    static constexpr int kSchemaVersion = 1;

    int version = 1;
    std::string task;
    std::string changelog;
    std::map<std::string, std::vector<Shot>> shots_by_label;

    friend bool operator==(const ShotSet&, const ShotSet&) = default;

    const std::vector<Shot>* shots_for(const std::string& label) const {
        auto it = shots_by_label.find(label);
        return it == shots_by_label.end() ? nullptr : &it->second;
    }

    size_t total_shots() const {
        size_t n = 0;
        for (const auto& [label, shots] : shots_by_label) n += shots.size();
        return n;
    }

    void validate(const std::string& where) const {
        if (task.empty()) throw SchemaError("shot set has empty task in " + where);
        if (version < 1) throw SchemaError("shot set version must be >= 1 in " + where);
        for (const auto& [label, shots] : shots_by_label) {
            if (label.empty()) throw SchemaError("empty label key in " + where);
            size_t i = 0;
            for (const Shot& s : shots) {
                s.validate(where + ", label \"" + label + "\", shot #" + std::to_string(i));
                if (s.label != label)
                    throw SchemaError("shot label mismatch under key \"" + label + "\" in " + where);
                ++i;
            }
        }
    }

    void validate_against(const CriteriaSet& criteria) const {
        if (task != criteria.task())
            throw SchemaError("shot set task \"" + task + "\" does not match criteria task \"" +
                              criteria.task() + "\"");
        for (const auto& [label, shots] : shots_by_label) {
            if (!criteria.contains(label))
                throw SchemaError("shot set references unknown label \"" + label + "\"");
        }
    }

    static ShotSet from_json(const json& doc, const std::string& where) {
        if (!doc.is_object()) throw SchemaError("shot set must be an object in " + where);
        require_schema_version(doc, kSchemaVersion, where);
        check_known_fields(doc, {"schema_version", "task", "version", "changelog", "shots"}, where);
        ShotSet set;
        set.task = require_string(doc, "task", where);
        const json& v = require_field(doc, "version", where);
        if (!v.is_number_integer()) throw SchemaError("version must be an integer in " + where);
        set.version = v.get<int>();
        if (doc.contains("changelog")) set.changelog = require_string(doc, "changelog", where);
        const json& shots = require_field(doc, "shots", where);
        if (!shots.is_object()) throw SchemaError("\"shots\" must be an object in " + where);
        for (auto it = shots.begin(); it != shots.end(); ++it) {
            if (!it.value().is_array())
                throw SchemaError("shots for label \"" + it.key() + "\" must be an array in " + where);
            std::vector<Shot> list;
            for (const json& s : it.value()) {
                list.push_back(Shot::from_json(
                    s, it.key(), where + ", label \"" + it.key() + "\", shot #" + std::to_string(list.size())));
            }
            set.shots_by_label[it.key()] = std::move(list);
        }
        set.validate(where);
        return set;
    }

    static ShotSet load(const std::filesystem::path& path) {
        return from_json(read_json_file(path), path.string());
    }

    json to_json() const {
        json shots = json::object();
        for (const auto& [label, list] : shots_by_label) {
            json arr = json::array();
            for (const Shot& s : list) arr.push_back(s.to_json());
            shots[label] = std::move(arr);
        }
        return json{{"schema_version", kSchemaVersion},
                    {"task", task},
                    {"version", version},
                    {"changelog", changelog},
                    {"shots", std::move(shots)}};
    }

    void save(const std::filesystem::path& path) const {
        write_file_atomic(path, to_json().dump(2) + "\n");
    }

    /// Starting point for the next iteration of the authoring loop.
    ShotSet next_version(std::string new_changelog) const {
        ShotSet next = *this;
        next.version = version + 1;
        next.changelog = std::move(new_changelog);
        return next;
    }
};

// ---------------------------------------------------------------------------
// Shot set diffing. Shots are matched within a label: exact matches are
// unchanged, shots sharing case_text are modified, the rest are added or
// removed. The diff is complete enough to rebuild the new set from the old.
// ---------------------------------------------------------------------------

enum class ChangeKind { unchanged, modified, added };

struct ShotEntryChange {
    ChangeKind kind = ChangeKind::unchanged;
    std::optional<size_t> old_index;  // set for unchanged and modified
    std::optional<Shot> shot;         // set for modified and added
};

struct LabelDiff {
    std::vector<ShotEntryChange> new_entries;  // one per shot in the new list, in order
    std::vector<size_t> removed_old_indices;

    size_t count(ChangeKind kind) const {
        size_t n = 0;
        for (const ShotEntryChange& e : new_entries) {
            if (e.kind == kind) ++n;
        }
        return n;
    }
};

struct ShotSetDiff {
    std::string task;
    int old_version = 0;
    int new_version = 0;
    std::string new_changelog;
    std::map<std::string, LabelDiff> labels;

    size_t total(ChangeKind kind) const {
        size_t n = 0;
        for (const auto& [label, d] : labels) n += d.count(kind);
        return n;
    }
    size_t total_removed() const {
        size_t n = 0;
        for (const auto& [label, d] : labels) n += d.removed_old_indices.size();
        return n;
    }

    json summary_json() const {
        json per_label = json::object();
        for (const auto& [label, d] : labels) {
            per_label[label] = {{"unchanged", d.count(ChangeKind::unchanged)},
                                {"modified", d.count(ChangeKind::modified)},
                                {"added", d.count(ChangeKind::added)},
                                {"removed", d.removed_old_indices.size()}};
        }
        return json{{"task", task},
                    {"old_version", old_version},
                    {"new_version", new_version},
                    {"unchanged", total(ChangeKind::unchanged)},
                    {"modified", total(ChangeKind::modified)},
                    {"added", total(ChangeKind::added)},
                    {"removed", total_removed()},
                    {"labels", std::move(per_label)}};
    }
};

inline ShotSetDiff diff_shot_sets(const ShotSet& old_set, const ShotSet& new_set) {
    if (old_set.task != new_set.task)
        throw SchemaError("cannot diff shot sets for different tasks (\"" + old_set.task +
                          "\" vs \"" + new_set.task + "\")");
    ShotSetDiff diff;
    diff.task = old_set.task;
    diff.old_version = old_set.version;
    diff.new_version = new_set.version;
    diff.new_changelog = new_set.changelog;

    std::set<std::string> all_labels;
    for (const auto& [label, shots] : old_set.shots_by_label) all_labels.insert(label);
    for (const auto& [label, shots] : new_set.shots_by_label) all_labels.insert(label);

    static const std::vector<Shot> kEmpty;
    for (const std::string& label : all_labels) {
        const std::vector<Shot>* olds = old_set.shots_for(label);
        const std::vector<Shot>* news = new_set.shots_for(label);
        const std::vector<Shot>& o = olds ? *olds : kEmpty;
        const std::vector<Shot>& n = news ? *news : kEmpty;

        LabelDiff d;
        d.new_entries.resize(n.size());
        std::vector<bool> old_used(o.size(), false);
        std::vector<bool> new_done(n.size(), false);

        // Pass 1: exact matches.
        for (size_t j = 0; j < n.size(); ++j) {
            for (size_t i = 0; i < o.size(); ++i) {
                if (!old_used[i] && o[i] == n[j]) {
                    d.new_entries[j] = {ChangeKind::unchanged, i, std::nullopt};
                    old_used[i] = true;
                    new_done[j] = true;
                    break;
                }
            }
        }
        // Pass 2: same case_text means the annotation was edited in place.
        for (size_t j = 0; j < n.size(); ++j) {
            if (new_done[j]) continue;
            for (size_t i = 0; i < o.size(); ++i) {
                if (!old_used[i] && o[i].case_text == n[j].case_text) {
                    d.new_entries[j] = {ChangeKind::modified, i, n[j]};
                    old_used[i] = true;
                    new_done[j] = true;
                    break;
                }
            }
        }
        // Pass 3: everything else is an addition; leftovers on the old side
        // are removals.
        for (size_t j = 0; j < n.size(); ++j) {
            if (!new_done[j]) d.new_entries[j] = {ChangeKind::added, std::nullopt, n[j]};
        }
        for (size_t i = 0; i < o.size(); ++i) {
            if (!old_used[i]) d.removed_old_indices.push_back(i);
        }
        diff.labels[label] = std::move(d);
    }
    return diff;
}

/// Rebuilds the new shot set from the old one plus a diff; inverse check for
/// diff_shot_sets.
inline ShotSet apply_diff(const ShotSet& old_set, const ShotSetDiff& diff) {
    if (old_set.task != diff.task) throw SchemaError("diff task does not match shot set task");
    ShotSet out;
    out.task = diff.task;
    out.version = diff.new_version;
    out.changelog = diff.new_changelog;
    static const std::vector<Shot> kEmpty;
    for (const auto& [label, d] : diff.labels) {
        if (d.new_entries.empty()) continue;
        const std::vector<Shot>* olds = old_set.shots_for(label);
        const std::vector<Shot>& o = olds ? *olds : kEmpty;
        std::vector<Shot> list;
        for (const ShotEntryChange& e : d.new_entries) {
            if (e.kind == ChangeKind::unchanged) {
                if (!e.old_index || *e.old_index >= o.size())
                    throw SchemaError("diff references missing old shot for label \"" + label + "\"");
                list.push_back(o[*e.old_index]);
            } else {
                if (!e.shot) throw SchemaError("diff entry lacks shot content for label \"" + label + "\"");
                list.push_back(*e.shot);
            }
        }
        out.shots_by_label[label] = std::move(list);
    }
    return out;
}

}  // namespace judgekit
