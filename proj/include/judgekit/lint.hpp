#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "judgekit/criteria.hpp"
#include "judgekit/io.hpp"
#include "judgekit/shots.hpp"
#include "judgekit/text.hpp"

namespace judgekit {

// Shot-authoring rules enforced on exemplar rationales:
//   R1  the reason must open by restating the label description;
//   R2  no adversative/progressive connective in the first half of the
//       reason, so the exemplar does not leak the verdict early;
//   R3  positive and negative shots of a label must share the structural
//       skeleton of their first halves.

enum class LintRule {
    R1_missing_description_repeat,
    R2_adversative_in_first_half,
    R3_format_inconsistency,
};

inline const char* lint_rule_name(LintRule r) {
    switch (r) {
        case LintRule::R1_missing_description_repeat: return "R1";
        case LintRule::R2_adversative_in_first_half: return "R2";
        default: return "R3";
    }
}

struct LintConfig {
    static constexpr int kSchemaVersion = 1;

    /// Connectives that must not appear in the first half of a reason. The
    /// default list targets English fixtures; swap it per locale.
    std::vector<std::string> adversative_words{"however", "but", "and", "nevertheless", "yet"};
    /// Fraction of the normalized reason (in code points) treated as its
    /// "first half".
    double first_half_fraction = 0.5;
    /// Minimum share of the description's tokens that must appear as one
    /// contiguous run in the reason's first sentence.
    double restate_overlap_threshold = 0.6;
    /// Words kept verbatim in skeletons instead of being blanked out.
    std::vector<std::string> template_tokens{};

    void validate() const {
        if (first_half_fraction <= 0 || first_half_fraction > 1)
            throw SchemaError("first_half_fraction must be in (0,1]");
        if (restate_overlap_threshold <= 0 || restate_overlap_threshold > 1)
            throw SchemaError("restate_overlap_threshold must be in (0,1]");
    }

    static LintConfig from_json(const json& doc, const std::string& where) {
        if (!doc.is_object()) throw SchemaError("lint config must be an object in " + where);
        require_schema_version(doc, kSchemaVersion, where);
        check_known_fields(doc,
                           {"schema_version", "adversative_words", "first_half_fraction",
                            "restate_overlap_threshold", "template_tokens"},
                           where);
        LintConfig cfg;
        if (doc.contains("adversative_words")) {
            cfg.adversative_words = doc["adversative_words"].get<std::vector<std::string>>();
        }
        if (doc.contains("first_half_fraction")) {
            cfg.first_half_fraction = doc["first_half_fraction"].get<double>();
        }
        if (doc.contains("restate_overlap_threshold")) {
            cfg.restate_overlap_threshold = doc["restate_overlap_threshold"].get<double>();
        }
        if (doc.contains("template_tokens")) {
            cfg.template_tokens = doc["template_tokens"].get<std::vector<std::string>>();
        }
        cfg.validate();
        return cfg;
    }

    static LintConfig load(const std::filesystem::path& path) {
        return from_json(read_json_file(path), path.string());
    }

    json to_json() const {
        return json{{"schema_version", kSchemaVersion},
                    {"adversative_words", adversative_words},
                    {"first_half_fraction", first_half_fraction},
                    {"restate_overlap_threshold", restate_overlap_threshold},
                    {"template_tokens", template_tokens}};
    }
};

struct LintViolation {
    LintRule rule;
    std::string label;
    size_t shot_index = 0;
    std::string detail;

    friend bool operator==(const LintViolation&, const LintViolation&) = default;
};

namespace lintdetail {

/// First ceil(fraction * length) code points of the whitespace-normalized
/// reason.
inline std::string first_half(const std::string& reason, double fraction) {
    std::string norm = text::normalize_whitespace(reason);
    size_t cps = text::count_codepoints(norm);
    auto keep = static_cast<size_t>(std::ceil(static_cast<double>(cps) * fraction));
    return norm.substr(0, text::byte_offset_of_codepoint(norm, keep));
}

inline bool is_ascii_word(const std::string& w) {
    for (unsigned char c : w) {
        if (c >= 0x80 || !std::isalpha(c)) return false;
    }
    return !w.empty();
}

/// Whole-word match for ASCII words, substring match otherwise (token
/// boundaries do not exist in unsegmented scripts).
inline bool contains_word(const std::string& haystack_lower, const std::string& word_lower) {
    if (!is_ascii_word(word_lower)) return haystack_lower.find(word_lower) != std::string::npos;
    size_t pos = 0;
    while ((pos = haystack_lower.find(word_lower, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack_lower[pos - 1]));
        size_t end = pos + word_lower.size();
        bool right_ok =
            end >= haystack_lower.size() || !std::isalnum(static_cast<unsigned char>(haystack_lower[end]));
        if (left_ok && right_ok) return true;
        pos = end;
    }
    return false;
}

inline bool restates_description(const Shot& shot, const LabelSpec& spec, const LintConfig& cfg) {
    std::string sentence = text::first_sentence(text::normalize_whitespace(shot.reason));
    std::vector<std::string> desc_tokens = text::word_tokens_lower(spec.description);
    if (desc_tokens.empty()) return true;
    std::vector<std::string> sentence_tokens = text::word_tokens_lower(sentence);
    size_t run = text::longest_common_token_run(desc_tokens, sentence_tokens);
    return static_cast<double>(run) >=
           cfg.restate_overlap_threshold * static_cast<double>(desc_tokens.size());
}

/// Structural skeleton: word tokens become "_" (template tokens survive),
/// punctuation is kept. Two shots are format-consistent when their first-half
/// skeletons are equal.
inline std::string skeleton(const std::string& reason, const LintConfig& cfg) {
    std::string half = first_half(reason, cfg.first_half_fraction);
    std::string out;
    for (const text::Token& t : text::tokenize(half)) {
        if (!out.empty()) out.push_back(' ');
        if (!t.is_word) {
            out += t.value;
            continue;
        }
        std::string lower = text::lowercase_ascii(t.value);
        bool keep = false;
        for (const std::string& tok : cfg.template_tokens) {
            if (text::lowercase_ascii(tok) == lower) {
                keep = true;
                break;
            }
        }
        out += keep ? t.value : "_";
    }
    return out;
}

}  // namespace lintdetail

/// Per-shot rules R1 and R2. Lint never throws on content; it only reports.
inline std::vector<LintViolation> lint_shot(const Shot& shot, const LabelSpec& spec,
                                            const LintConfig& cfg, size_t shot_index = 0) {
    if (shot.label != spec.name)
        throw SchemaError("lint_shot called with mismatched label \"" + shot.label + "\" vs spec \"" +
                          spec.name + "\"");
    cfg.validate();
    std::vector<LintViolation> out;
    if (!lintdetail::restates_description(shot, spec, cfg)) {
        out.push_back({LintRule::R1_missing_description_repeat, spec.name, shot_index,
                       "reason does not open by restating the label description"});
    }
    std::string half_lower =
        text::lowercase_ascii(lintdetail::first_half(shot.reason, cfg.first_half_fraction));
    for (const std::string& word : cfg.adversative_words) {
        if (lintdetail::contains_word(half_lower, text::lowercase_ascii(word))) {
            out.push_back({LintRule::R2_adversative_in_first_half, spec.name, shot_index,
                           "first half of reason contains \"" + word + "\""});
        }
    }
    return out;
}

/// Whole-set lint: per-shot rules plus the pairwise R3 consistency check
/// between every positive and every negative shot of each label.
inline std::vector<LintViolation> lint_shot_set(const ShotSet& set, const CriteriaSet& criteria,
                                                const LintConfig& cfg) {
    set.validate("lint input");
    set.validate_against(criteria);
    cfg.validate();
    std::vector<LintViolation> out;
    for (const LabelSpec& spec : criteria.labels()) {
        const std::vector<Shot>* shots = set.shots_for(spec.name);
        if (!shots) continue;
        for (size_t i = 0; i < shots->size(); ++i) {
            for (LintViolation& v : lint_shot((*shots)[i], spec, cfg, i)) {
                out.push_back(std::move(v));
            }
        }
        for (size_t i = 0; i < shots->size(); ++i) {
            if ((*shots)[i].exemplar_polarity != ExemplarPolarity::positive) continue;
            std::string pos_skeleton = lintdetail::skeleton((*shots)[i].reason, cfg);
            for (size_t j = 0; j < shots->size(); ++j) {
                if ((*shots)[j].exemplar_polarity != ExemplarPolarity::negative) continue;
                std::string neg_skeleton = lintdetail::skeleton((*shots)[j].reason, cfg);
                if (pos_skeleton != neg_skeleton) {
                    out.push_back({LintRule::R3_format_inconsistency, spec.name, j,
                                   "first-half format differs from positive shot #" +
                                       std::to_string(i) + " (\"" + neg_skeleton + "\" vs \"" +
                                       pos_skeleton + "\")"});
                }
            }
        }
    }
    return out;
}

}  // namespace judgekit
