#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "judgekit/criteria.hpp"
#include "judgekit/dataset.hpp"
#include "judgekit/io.hpp"
#include "judgekit/shots.hpp"
#include "judgekit/verdict.hpp"

namespace judgekit {

enum class Role { system, user, assistant };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        default: return "assistant";
    }
}

struct Message {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

/// Chat context: a system message followed by user/assistant turns, always
/// ending on a user turn.
struct MessageSeq {
    std::vector<Message> messages;

    friend bool operator==(const MessageSeq&, const MessageSeq&) = default;

    void validate() const {
        if (messages.empty() || messages.front().role != Role::system)
            throw PromptError("context must start with a system message");
        for (size_t i = 1; i < messages.size(); ++i) {
            Role expected = (i % 2 == 1) ? Role::user : Role::assistant;
            if (messages[i].role != expected)
                throw PromptError("context roles must alternate user/assistant after the system message");
        }
        if (messages.back().role != Role::user)
            throw PromptError("context must end with a user message");
    }

    size_t rendered_chars() const {
        size_t n = 0;
        for (const Message& m : messages) n += m.content.size();
        return n;
    }

    /// Flat text form used for logs, context hashing, and containment checks.
    std::string render_text() const {
        std::string out;
        for (const Message& m : messages) {
            out += role_name(m.role);
            out += ": ";
            out += m.content;
            out += "\n\n";
        }
        return out;
    }

    json to_json() const {
        json arr = json::array();
        for (const Message& m : messages) {
            arr.push_back({{"role", role_name(m.role)}, {"content", m.content}});
        }
        return arr;
    }
};

enum class LabelProtocol { single_turn, multi_turn, zero_shot_only };

inline const char* label_protocol_name(LabelProtocol p) {
    switch (p) {
        case LabelProtocol::single_turn: return "single";
        case LabelProtocol::multi_turn: return "multiturn";
        default: return "zero_only";
    }
}

inline LabelProtocol label_protocol_from_name(std::string_view s, const std::string& where) {
    if (s == "single") return LabelProtocol::single_turn;
    if (s == "multiturn") return LabelProtocol::multi_turn;
    if (s == "zero_only") return LabelProtocol::zero_shot_only;
    throw SchemaError("unknown protocol \"" + std::string(s) + "\" in " + where);
}

struct PromptConfig {
    bool division = true;
    bool multi_turn = true;
    bool repeat_descriptions = true;
    int shot_limit_per_label = 8;
    size_t context_char_budget = 32000;
    /// Whether the synthesis call re-presents the case instruction alongside
    /// the answer. Default on; flagged for empirical tuning.
    bool synthesis_include_instruction = true;
    /// Per-label escape hatch for labels that react badly to uniform shots:
    /// force one label onto a different protocol without touching the rest.
    std::map<std::string, LabelProtocol> label_protocol_overrides;

    void validate() const {
        if (shot_limit_per_label < 0) throw SchemaError("shot_limit_per_label must be >= 0");
        if (context_char_budget == 0) throw SchemaError("context_char_budget must be > 0");
    }

    json to_json() const {
        json overrides = json::object();
        for (const auto& [label, protocol] : label_protocol_overrides) {
            overrides[label] = label_protocol_name(protocol);
        }
        return json{{"division", division},
                    {"multi_turn", multi_turn},
                    {"repeat_descriptions", repeat_descriptions},
                    {"shot_limit_per_label", shot_limit_per_label},
                    {"context_char_budget", context_char_budget},
                    {"synthesis_include_instruction", synthesis_include_instruction},
                    {"label_protocol_overrides", std::move(overrides)}};
    }
};

/// System-prompt template for one task. The three placeholders are mandatory;
/// a template missing any of them is rejected at load.
class PromptTemplate {
public:
    static constexpr int kSchemaVersion = 1;
    static constexpr const char* kRequirementsSlot = "{task_requirements}";
    static constexpr const char* kDescriptionSlot = "{label_description}";
    static constexpr const char* kVerdictSlot = "{verdict_instruction}";

    PromptTemplate(std::string task, std::string task_requirements, std::string system_template)
        : task_(std::move(task)),
          task_requirements_(std::move(task_requirements)),
          system_template_(std::move(system_template)) {
        for (const char* slot : {kRequirementsSlot, kDescriptionSlot, kVerdictSlot}) {
            if (system_template_.find(slot) == std::string::npos)
                throw SchemaError("system template is missing mandatory placeholder " +
                                  std::string(slot));
        }
    }

    static PromptTemplate defaults(std::string task) {
        return PromptTemplate(
            std::move(task),
            "Judge the quality of answers produced by another model for this task.",
            "You are a strict evaluation judge.\n"
            "Task requirements: {task_requirements}\n\n"
            "{label_description}\n\n"
            "{verdict_instruction}");
    }

    static PromptTemplate from_json(const json& doc, const std::string& where) {
        if (!doc.is_object()) throw SchemaError("template must be an object in " + where);
        require_schema_version(doc, kSchemaVersion, where);
        check_known_fields(doc, {"schema_version", "task", "task_requirements", "system_template"},
                           where);
        return PromptTemplate(require_string(doc, "task", where),
                              require_string(doc, "task_requirements", where),
                              require_string(doc, "system_template", where));
    }

    static PromptTemplate load(const std::filesystem::path& path) {
        return from_json(read_json_file(path), path.string());
    }

    json to_json() const {
        return json{{"schema_version", kSchemaVersion},
                    {"task", task_},
                    {"task_requirements", task_requirements_},
                    {"system_template", system_template_}};
    }

    const std::string& task() const { return task_; }

    std::string render_system(const std::string& label_description_section,
                              const std::string& verdict_instruction) const {
        std::string out = system_template_;
        replace_all(out, kRequirementsSlot, task_requirements_);
        replace_all(out, kDescriptionSlot, label_description_section);
        replace_all(out, kVerdictSlot, verdict_instruction);
        return out;
    }

private:
    static void replace_all(std::string& text, std::string_view slot, const std::string& value) {
        size_t pos = 0;
        while ((pos = text.find(slot, pos)) != std::string::npos) {
            text.replace(pos, slot.size(), value);
            pos += value.size();
        }
    }

    std::string task_;
    std::string task_requirements_;
    std::string system_template_;
};

namespace promptdetail {

inline std::string render_case(const Case& c, bool include_instruction = true) {
    std::string out;
    if (include_instruction) {
        out += "Instruction:\n" + c.instruction + "\n\n";
        if (c.reference) out += "Reference:\n" + *c.reference + "\n\n";
    }
    out += "Answer under evaluation:\n" + c.answer;
    return out;
}

inline std::string verdict_line(bool present) {
    return present ? "VERDICT: PRESENT" : "VERDICT: ABSENT";
}

inline std::string shot_assistant_text(const Shot& s) {
    return s.reason + "\n" + verdict_line(s.verdict_present);
}

inline std::string single_label_instruction(bool repeat_descriptions) {
    std::string out =
        "Decide whether this label applies to the answer under evaluation. "
        "Explain your reasoning, then finish with a final line that is exactly "
        "\"VERDICT: PRESENT\" if the label applies or \"VERDICT: ABSENT\" if it does not.";
    if (repeat_descriptions) {
        out +=
            " Begin your reasoning by restating the label description before "
            "judging the answer against it.";
    }
    return out;
}

inline std::string multi_label_instruction(const std::vector<const LabelSpec*>& labels,
                                           bool repeat_descriptions) {
    std::string out =
        "Decide for every label above whether it applies to the answer under "
        "evaluation. Explain your reasoning, then finish with one line per label "
        "of the form \"LABEL <name> VERDICT: PRESENT\" or \"LABEL <name> VERDICT: "
        "ABSENT\", followed by a final line \"FINAL SCORE: <0|1|2>\". Emit the "
        "label lines in the order listed:";
    for (const LabelSpec* l : labels) out += "\nLABEL " + l->name;
    if (repeat_descriptions) {
        out +=
            "\nBegin your reasoning for each label by restating its description "
            "before judging the answer against it.";
    }
    return out;
}

inline std::string label_description_section(const LabelSpec& label) {
    return "Label under evaluation: " + label.name + " (" + polarity_name(label.polarity) +
           ")\nLabel description: " + label.description;
}

inline void check_shots_target_label(std::span<const Shot> shots, const LabelSpec& label) {
    for (const Shot& s : shots) {
        if (s.label != label.name)
            throw PromptError("shot targets label \"" + s.label + "\" but context is for \"" +
                              label.name + "\"");
    }
}

/// Appends up to `limit` shots as user/assistant pairs while the running
/// total stays within budget. Trailing shots are dropped first; the case
/// under evaluation is never truncated.
inline void append_shot_pairs(MessageSeq& seq, std::span<const Shot> shots, int limit,
                              size_t budget, size_t reserved) {
    size_t used = seq.rendered_chars();
    int taken = 0;
    for (const Shot& s : shots) {
        if (taken >= limit) break;
        std::string assistant = shot_assistant_text(s);
        size_t pair_chars = s.case_text.size() + assistant.size();
        if (used + pair_chars + reserved > budget) break;
        seq.messages.push_back({Role::user, s.case_text});
        seq.messages.push_back({Role::assistant, std::move(assistant)});
        used += pair_chars;
        ++taken;
    }
}

inline void check_budget(const MessageSeq& seq, size_t budget, const std::string& what) {
    if (seq.rendered_chars() > budget)
        throw PromptError("context budget exceeded building " + what + " (" +
                          std::to_string(seq.rendered_chars()) + " > " + std::to_string(budget) +
                          " chars)");
}

}  // namespace promptdetail

/// System message plus the bare case. No exemplars.
inline MessageSeq build_zero_shot_context(const PromptTemplate& tmpl, const LabelSpec& label,
                                          const Case& c, const PromptConfig& cfg) {
    cfg.validate();
    if (c.answer.empty()) throw PromptError("case \"" + c.id + "\" has an empty answer");
    MessageSeq seq;
    seq.messages.push_back(
        {Role::system,
         tmpl.render_system(promptdetail::label_description_section(label),
                            promptdetail::single_label_instruction(cfg.repeat_descriptions))});
    seq.messages.push_back({Role::user, promptdetail::render_case(c)});
    promptdetail::check_budget(seq, cfg.context_char_budget, "zero-shot context");
    seq.validate();
    return seq;
}

/// System message, exemplars as user/assistant pairs in authored order, then
/// the case. With shot_limit_per_label = 0 this reduces to the zero-shot
/// context exactly.
inline MessageSeq build_few_shot_context(const PromptTemplate& tmpl, const LabelSpec& label,
                                         std::span<const Shot> shots, const Case& c,
                                         const PromptConfig& cfg) {
    cfg.validate();
    if (c.answer.empty()) throw PromptError("case \"" + c.id + "\" has an empty answer");
    promptdetail::check_shots_target_label(shots, label);
    MessageSeq seq;
    seq.messages.push_back(
        {Role::system,
         tmpl.render_system(promptdetail::label_description_section(label),
                            promptdetail::single_label_instruction(cfg.repeat_descriptions))});
    std::string case_text = promptdetail::render_case(c);
    promptdetail::append_shot_pairs(seq, shots, cfg.shot_limit_per_label, cfg.context_char_budget,
                                    case_text.size());
    seq.messages.push_back({Role::user, std::move(case_text)});
    promptdetail::check_budget(seq, cfg.context_char_budget, "few-shot context");
    seq.validate();
    return seq;
}

/// Reconciliation context: system prompt, exemplars, the case, the two prior
/// judgments labeled as candidates (zero-shot first), and a closing
/// instruction asking for one final verdict.
inline MessageSeq build_synthesis_context(const PromptTemplate& tmpl, const LabelSpec& label,
                                          std::span<const Shot> shots, const Case& c,
                                          const JudgeVerdict& zero_verdict,
                                          const JudgeVerdict& few_verdict,
                                          const PromptConfig& cfg) {
    cfg.validate();
    if (c.answer.empty()) throw PromptError("case \"" + c.id + "\" has an empty answer");
    if (zero_verdict.stage != Stage::zero_shot)
        throw PromptError("synthesis expects a zero_shot verdict as its first candidate");
    if (few_verdict.stage != Stage::few_shot)
        throw PromptError("synthesis expects a few_shot verdict as its second candidate");
    if (zero_verdict.label != label.name || few_verdict.label != label.name)
        throw PromptError("candidate verdicts target a different label than the synthesis context");
    promptdetail::check_shots_target_label(shots, label);

    MessageSeq seq;
    seq.messages.push_back(
        {Role::system,
         tmpl.render_system(promptdetail::label_description_section(label),
                            promptdetail::single_label_instruction(cfg.repeat_descriptions))});

    std::string case_text = promptdetail::render_case(c, cfg.synthesis_include_instruction);
    std::string candidates =
        "Judgment A (without examples):\n" + zero_verdict.reason + "\n" +
        promptdetail::verdict_line(zero_verdict.present) + "\n\nJudgment B (with examples):\n" +
        few_verdict.reason + "\n" + promptdetail::verdict_line(few_verdict.present);
    std::string closing =
        "Two independent judgments of this answer are shown above. Weigh them "
        "against the label description, resolve any disagreement, then deliver "
        "one final decision ending with the verdict line.";
    promptdetail::append_shot_pairs(seq, shots, cfg.shot_limit_per_label, cfg.context_char_budget,
                                    case_text.size() + candidates.size() + closing.size());
    seq.messages.push_back({Role::user, std::move(case_text)});
    seq.messages.push_back({Role::assistant, std::move(candidates)});
    seq.messages.push_back({Role::user, std::move(closing)});
    promptdetail::check_budget(seq, cfg.context_char_budget, "synthesis context");
    seq.validate();
    return seq;
}

/// Ablation context carrying every model-judged label and all its shots in
/// one request. Exemplars are never dropped in undivided mode; an oversized
/// context is an error.
inline MessageSeq build_undivided_context(const PromptTemplate& tmpl, const CriteriaSet& criteria,
                                          const ShotSet& shot_set, const Case& c,
                                          const PromptConfig& cfg) {
    cfg.validate();
    if (cfg.division)
        throw PromptError("build_undivided_context requires cfg.division = false");
    if (c.answer.empty()) throw PromptError("case \"" + c.id + "\" has an empty answer");
    shot_set.validate_against(criteria);

    std::vector<const LabelSpec*> labels = criteria.model_judged();
    if (labels.empty()) throw PromptError("criteria set has no model-judged labels");

    std::string description_section = "Labels under evaluation:";
    for (size_t i = 0; i < labels.size(); ++i) {
        description_section += "\n" + std::to_string(i + 1) + ". " + labels[i]->name + " (" +
                               polarity_name(labels[i]->polarity) + "): " + labels[i]->description;
    }
    MessageSeq seq;
    seq.messages.push_back(
        {Role::system,
         tmpl.render_system(description_section, promptdetail::multi_label_instruction(
                                                     labels, cfg.repeat_descriptions))});
    for (const LabelSpec* label : labels) {
        const std::vector<Shot>* shots = shot_set.shots_for(label->name);
        if (!shots) continue;
        int taken = 0;
        for (const Shot& s : *shots) {
            if (taken >= cfg.shot_limit_per_label) break;
            seq.messages.push_back({Role::user, s.case_text});
            seq.messages.push_back({Role::assistant, promptdetail::shot_assistant_text(s)});
            ++taken;
        }
    }
    seq.messages.push_back(
        {Role::user, promptdetail::render_case(c) +
                         "\n\nDeliver your verdict for every label listed in the system "
                         "message: one LABEL line per label in the order given, then the "
                         "FINAL SCORE line."});
    promptdetail::check_budget(seq, cfg.context_char_budget, "undivided context");
    seq.validate();
    return seq;
}

}  // namespace judgekit
