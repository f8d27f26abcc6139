#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "judgekit/backend.hpp"
#include "judgekit/criteria.hpp"
#include "judgekit/dataset.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/shots.hpp"
#include "judgekit/verdict.hpp"

namespace judgekit {

/// Final judgment for one case: the deciding verdict per label, the full
/// per-stage audit trail, and the derived score.
struct ScoreRecord {
    std::string case_id;
    std::map<std::string, JudgeVerdict> verdicts;                // label -> deciding verdict
    std::map<std::string, std::vector<JudgeVerdict>> stage_verdicts;  // full audit trail
    std::set<std::string> present_labels;
    int final = 2;
    std::string config_digest;

    friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;

    json to_json() const {
        json verdicts_json = json::object();
        for (const auto& [label, v] : verdicts) verdicts_json[label] = v.to_json();
        json stages_json = json::object();
        for (const auto& [label, vs] : stage_verdicts) {
            json arr = json::array();
            for (const JudgeVerdict& v : vs) arr.push_back(v.to_json());
            stages_json[label] = std::move(arr);
        }
        return json{{"case_id", case_id},
                    {"verdicts", std::move(verdicts_json)},
                    {"stage_verdicts", std::move(stages_json)},
                    {"present_labels", json(present_labels)},
                    {"final", final},
                    {"config_digest", config_digest}};
    }

    static ScoreRecord from_json(const json& doc, const std::string& where) {
        check_known_fields(
            doc, {"case_id", "verdicts", "stage_verdicts", "present_labels", "final", "config_digest"},
            where);
        ScoreRecord r;
        r.case_id = require_string(doc, "case_id", where);
        for (const auto& [label, v] : require_field(doc, "verdicts", where).items()) {
            r.verdicts[label] = JudgeVerdict::from_json(v, where);
        }
        for (const auto& [label, arr] : require_field(doc, "stage_verdicts", where).items()) {
            std::vector<JudgeVerdict> vs;
            for (const json& v : arr) vs.push_back(JudgeVerdict::from_json(v, where));
            r.stage_verdicts[label] = std::move(vs);
        }
        for (const json& l : require_field(doc, "present_labels", where)) {
            r.present_labels.insert(l.get<std::string>());
        }
        r.final = require_field(doc, "final", where).get<int>();
        r.config_digest = require_string(doc, "config_digest", where);
        return r;
    }
};

/// One judge call with the few-shot context; the single-turn ablation.
inline JudgeVerdict judge_label_single(const Case& c, const LabelSpec& label,
                                       std::span<const Shot> shots, const PromptTemplate& tmpl,
                                       const PromptConfig& cfg, Backend& backend) {
    if (label.rule_based)
        throw SchemaError("rule-based label \"" + label.name + "\" must not be model-judged");
    MessageSeq ctx = build_few_shot_context(tmpl, label, shots, c, cfg);
    std::string completion = backend.complete(ctx, {c.id, label.name, Stage::few_shot});
    return parse_verdict(completion, label, Stage::few_shot);
}

/// The three-call protocol: independent zero-shot and few-shot judgments,
/// then a synthesis call over both. The synthesis verdict always decides;
/// there is no majority shortcut. All three verdicts are returned via
/// `audit_out` when provided.
inline JudgeVerdict judge_label_multiturn(const Case& c, const LabelSpec& label,
                                          std::span<const Shot> shots, const PromptTemplate& tmpl,
                                          const PromptConfig& cfg, Backend& backend,
                                          std::vector<JudgeVerdict>* audit_out = nullptr) {
    if (label.rule_based)
        throw SchemaError("rule-based label \"" + label.name + "\" must not be model-judged");
    // Both contexts are assembled before either call; neither contains the
    // other's output.
    MessageSeq zero_ctx = build_zero_shot_context(tmpl, label, c, cfg);
    MessageSeq few_ctx = build_few_shot_context(tmpl, label, shots, c, cfg);

    std::string zero_completion = backend.complete(zero_ctx, {c.id, label.name, Stage::zero_shot});
    JudgeVerdict zero = parse_verdict(zero_completion, label, Stage::zero_shot);
    std::string few_completion = backend.complete(few_ctx, {c.id, label.name, Stage::few_shot});
    JudgeVerdict few = parse_verdict(few_completion, label, Stage::few_shot);

    MessageSeq synthesis_ctx = build_synthesis_context(tmpl, label, shots, c, zero, few, cfg);
    std::string synthesis_completion =
        backend.complete(synthesis_ctx, {c.id, label.name, Stage::synthesis});
    JudgeVerdict synthesis = parse_verdict(synthesis_completion, label, Stage::synthesis);

    if (audit_out) {
        audit_out->push_back(zero);
        audit_out->push_back(few);
        audit_out->push_back(synthesis);
    }
    return synthesis;
}

/// Zero-shot-only escape hatch, selectable per label via
/// PromptConfig::label_protocol_overrides.
inline JudgeVerdict judge_label_zero_only(const Case& c, const LabelSpec& label,
                                          const PromptTemplate& tmpl, const PromptConfig& cfg,
                                          Backend& backend) {
    MessageSeq ctx = build_zero_shot_context(tmpl, label, c, cfg);
    std::string completion = backend.complete(ctx, {c.id, label.name, Stage::zero_shot});
    return parse_verdict(completion, label, Stage::zero_shot);
}

namespace pipedetail {

inline std::span<const Shot> shots_for(const ShotSet& set, const std::string& label) {
    const std::vector<Shot>* shots = set.shots_for(label);
    if (!shots) return {};
    return {shots->data(), shots->size()};
}

inline LabelProtocol protocol_for(const PromptConfig& cfg, const std::string& label) {
    auto it = cfg.label_protocol_overrides.find(label);
    if (it != cfg.label_protocol_overrides.end()) return it->second;
    return cfg.multi_turn ? LabelProtocol::multi_turn : LabelProtocol::single_turn;
}

}  // namespace pipedetail

/// Judges every label of one case. Division mode makes one protocol run per
/// model-judged label plus the rule checks; non-division mode makes a single
/// undivided call and parses one verdict per label out of it.
inline ScoreRecord judge_case(const Case& c, const CriteriaSet& criteria, const ShotSet& shot_set,
                              const PromptTemplate& tmpl, const PromptConfig& cfg, Backend& backend,
                              const std::string& config_digest = "") {
    cfg.validate();
    shot_set.validate_against(criteria);
    if (c.task != criteria.task())
        throw SchemaError("case \"" + c.id + "\" belongs to task \"" + c.task +
                          "\", criteria cover \"" + criteria.task() + "\"");

    ScoreRecord record;
    record.case_id = c.id;
    record.config_digest = config_digest;

    if (cfg.division) {
        for (const LabelSpec& label : criteria.labels()) {
            if (label.rule_based) {
                JudgeVerdict v = word_count_check(c.answer, *label.word_count, label.name);
                record.stage_verdicts[label.name].push_back(v);
                record.verdicts[label.name] = std::move(v);
                continue;
            }
            std::span<const Shot> shots = pipedetail::shots_for(shot_set, label.name);
            JudgeVerdict final_verdict;
            switch (pipedetail::protocol_for(cfg, label.name)) {
                case LabelProtocol::multi_turn: {
                    std::vector<JudgeVerdict> audit;
                    final_verdict = judge_label_multiturn(c, label, shots, tmpl, cfg, backend, &audit);
                    record.stage_verdicts[label.name] = std::move(audit);
                    break;
                }
                case LabelProtocol::single_turn:
                    final_verdict = judge_label_single(c, label, shots, tmpl, cfg, backend);
                    record.stage_verdicts[label.name].push_back(final_verdict);
                    break;
                case LabelProtocol::zero_shot_only:
                    final_verdict = judge_label_zero_only(c, label, tmpl, cfg, backend);
                    record.stage_verdicts[label.name].push_back(final_verdict);
                    break;
            }
            record.verdicts[label.name] = std::move(final_verdict);
        }
    } else {
        MessageSeq ctx = build_undivided_context(tmpl, criteria, shot_set, c, cfg);
        std::string completion = backend.complete(ctx, {c.id, "", Stage::few_shot});
        std::vector<const LabelSpec*> labels = criteria.model_judged();
        std::map<std::string, bool> parsed = parse_multi_label_verdicts(completion, labels);
        for (const LabelSpec* label : labels) {
            // The undivided response is one shared rationale; it is carried on
            // every per-label verdict rather than fabricating per-label text.
            JudgeVerdict v{label->name, parsed.at(label->name), completion, Stage::few_shot};
            record.stage_verdicts[label->name].push_back(v);
            record.verdicts[label->name] = std::move(v);
        }
        for (const LabelSpec& label : criteria.labels()) {
            if (!label.rule_based) continue;
            JudgeVerdict v = word_count_check(c.answer, *label.word_count, label.name);
            record.stage_verdicts[label.name].push_back(v);
            record.verdicts[label.name] = std::move(v);
        }
    }

    for (const auto& [label, verdict] : record.verdicts) {
        if (verdict.present) record.present_labels.insert(label);
    }
    record.final = final_score(record.present_labels, criteria);
    return record;
}

// ---------------------------------------------------------------------------
// Experiment runner.
// ---------------------------------------------------------------------------

struct RunFailure {
    std::string case_id;
    std::string error;

    friend bool operator==(const RunFailure&, const RunFailure&) = default;
};

struct RunManifest {
    static constexpr int kSchemaVersion = 1;

    std::string run_id;
    std::string method;
    std::string config_digest;
    std::string task;
    std::string split_name;
    int shot_set_version = 0;
    size_t case_count = 0;
    size_t record_count = 0;
    uint64_t backend_calls = 0;
    std::map<std::string, uint64_t> stage_calls;
    uint64_t rule_checks = 0;
    std::vector<RunFailure> failures;
    std::string started_at;
    std::string finished_at;

    json to_json() const {
        json fails = json::array();
        for (const RunFailure& f : failures) {
            fails.push_back({{"case_id", f.case_id}, {"error", f.error}});
        }
        return json{{"schema_version", kSchemaVersion},
                    {"run_id", run_id},
                    {"method", method},
                    {"config_digest", config_digest},
                    {"task", task},
                    {"split_name", split_name},
                    {"shot_set_version", shot_set_version},
                    {"case_count", case_count},
                    {"record_count", record_count},
                    {"backend_calls", backend_calls},
                    {"stage_calls", json(stage_calls)},
                    {"rule_checks", rule_checks},
                    {"failures", std::move(fails)},
                    {"started_at", started_at},
                    {"finished_at", finished_at}};
    }

    static RunManifest from_json(const json& doc, const std::string& where) {
        require_schema_version(doc, kSchemaVersion, where);
        RunManifest m;
        m.run_id = require_string(doc, "run_id", where);
        m.method = require_string(doc, "method", where);
        m.config_digest = require_string(doc, "config_digest", where);
        m.task = require_string(doc, "task", where);
        m.split_name = require_string(doc, "split_name", where);
        m.shot_set_version = require_field(doc, "shot_set_version", where).get<int>();
        m.case_count = require_field(doc, "case_count", where).get<size_t>();
        m.record_count = require_field(doc, "record_count", where).get<size_t>();
        m.backend_calls = require_field(doc, "backend_calls", where).get<uint64_t>();
        for (const auto& [stage, count] : require_field(doc, "stage_calls", where).items()) {
            m.stage_calls[stage] = count.get<uint64_t>();
        }
        m.rule_checks = require_field(doc, "rule_checks", where).get<uint64_t>();
        for (const json& f : require_field(doc, "failures", where)) {
            m.failures.push_back({require_string(f, "case_id", where), require_string(f, "error", where)});
        }
        m.started_at = doc.value("started_at", "");
        m.finished_at = doc.value("finished_at", "");
        return m;
    }
};

struct RunResult {
    std::vector<ScoreRecord> records;
    RunManifest manifest;
};

/// Binds a run to everything that determines its output, so identical inputs
/// are recognizable as identical runs.
inline std::string compute_config_digest(const CriteriaSet& criteria, int shot_set_version,
                                         const PromptConfig& prompt_cfg, const json& backend_cfg) {
    json doc{{"criteria", criteria.to_json()},
             {"shot_set_version", shot_set_version},
             {"prompt", prompt_cfg.to_json()},
             {"backend", backend_cfg}};
    return to_hex(fnv1a64(doc.dump()));
}

/// Backend calls the configured mode will make for `n_cases` cases: 3 per
/// model-judged multi-turn label, 1 per single-turn or zero-shot-only label,
/// 1 per case when undivided.
inline uint64_t expected_backend_calls(const CriteriaSet& criteria, const PromptConfig& cfg,
                                       size_t n_cases) {
    if (!cfg.division) return n_cases;
    uint64_t per_case = 0;
    for (const LabelSpec& label : criteria.labels()) {
        if (label.rule_based) continue;
        switch (pipedetail::protocol_for(cfg, label.name)) {
            case LabelProtocol::multi_turn: per_case += 3; break;
            default: per_case += 1; break;
        }
    }
    return per_case * n_cases;
}

inline std::string method_name(const PromptConfig& cfg) {
    if (!cfg.division) return "non-division";
    return cfg.multi_turn ? "division+multiturn" : "division+single";
}

namespace pipedetail {

inline std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Per-stage call counter wrapped around the real backend for the duration of
/// one run. Manifests tally exactly what was sent, including calls made for
/// cases that later failed.
class TallyBackend final : public Backend {
public:
    explicit TallyBackend(Backend& inner) : Backend(1 << 20), inner_(inner) {}

    uint64_t stage_count(Stage s) const {
        return per_stage_[static_cast<size_t>(s)].load(std::memory_order_relaxed);
    }

protected:
    std::string do_complete(const MessageSeq& ctx, const RequestTag& tag) override {
        per_stage_[static_cast<size_t>(tag.stage)].fetch_add(1, std::memory_order_relaxed);
        return inner_.complete(ctx, tag);
    }

private:
    Backend& inner_;
    std::array<std::atomic<uint64_t>, 4> per_stage_{};
};

}  // namespace pipedetail

/// Runs the configured protocol over a split with bounded parallelism.
/// Output is sorted by case id regardless of completion order; failed cases
/// are listed in the manifest rather than silently scored. With a scripted
/// backend the whole run is a pure function of its inputs.
inline RunResult run_experiment(const std::vector<Case>& split, const CriteriaSet& criteria,
                                const ShotSet& shot_set, const PromptTemplate& tmpl,
                                const PromptConfig& cfg, Backend& backend,
                                const std::string& split_name,
                                const json& backend_cfg_json = json::object()) {
    cfg.validate();
    shot_set.validate_against(criteria);
    for (const Case& c : split) {
        if (c.task != criteria.task())
            throw SchemaError("case \"" + c.id + "\" does not belong to task \"" + criteria.task() +
                              "\"");
    }

    RunManifest manifest;
    manifest.method = method_name(cfg);
    manifest.config_digest =
        compute_config_digest(criteria, shot_set.version, cfg, backend_cfg_json);
    manifest.task = criteria.task();
    manifest.split_name = split_name;
    manifest.shot_set_version = shot_set.version;
    manifest.case_count = split.size();
    manifest.started_at = pipedetail::iso8601_utc_now();

    pipedetail::TallyBackend tally(backend);

    std::vector<std::optional<ScoreRecord>> slots(split.size());
    std::vector<std::optional<RunFailure>> failures(split.size());
    std::atomic<size_t> next{0};
    size_t workers =
        std::min(split.size(), static_cast<size_t>(backend.parallelism_limit()));
    auto work = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= split.size()) return;
            try {
                slots[i] = judge_case(split[i], criteria, shot_set, tmpl, cfg, tally,
                                      manifest.config_digest);
            } catch (const Error& e) {
                failures[i] = RunFailure{split[i].id, e.what()};
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    RunResult result;
    for (size_t i = 0; i < split.size(); ++i) {
        if (slots[i]) result.records.push_back(std::move(*slots[i]));
        if (failures[i]) manifest.failures.push_back(std::move(*failures[i]));
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) { return a.case_id < b.case_id; });
    std::sort(manifest.failures.begin(), manifest.failures.end(),
              [](const RunFailure& a, const RunFailure& b) { return a.case_id < b.case_id; });

    manifest.record_count = result.records.size();
    manifest.backend_calls = tally.total_calls();
    for (Stage s : {Stage::zero_shot, Stage::few_shot, Stage::synthesis}) {
        if (uint64_t n = tally.stage_count(s); n > 0) manifest.stage_calls[stage_name(s)] = n;
    }
    for (const ScoreRecord& r : result.records) {
        for (const auto& [label, verdicts] : r.stage_verdicts) {
            for (const JudgeVerdict& v : verdicts) {
                if (v.stage == Stage::rule_based) ++manifest.rule_checks;
            }
        }
    }

    std::string id_basis = manifest.config_digest + "|" + split_name;
    for (const Case& c : split) id_basis += "|" + c.id;
    manifest.run_id = to_hex(fnv1a64(id_basis));
    manifest.finished_at = pipedetail::iso8601_utc_now();
    result.manifest = std::move(manifest);
    return result;
}

// ---------------------------------------------------------------------------
// Record persistence: one ScoreRecord per line plus a manifest document.
// ---------------------------------------------------------------------------

inline void save_records(const std::filesystem::path& path, const std::vector<ScoreRecord>& records) {
    std::string out;
    for (const ScoreRecord& r : records) {
        out += r.to_json().dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

inline std::vector<ScoreRecord> load_records(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::vector<ScoreRecord> records;
    size_t pos = 0, line_no = 0;
    while (pos <= content.size()) {
        size_t end = content.find('\n', pos);
        std::string line = content.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = end == std::string::npos ? content.size() + 1 : end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string where = path.string() + ":" + std::to_string(line_no);
        records.push_back(ScoreRecord::from_json(parse_json(line, where), where));
    }
    return records;
}

inline void save_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    write_file_atomic(path, manifest.to_json().dump(2) + "\n");
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
    return RunManifest::from_json(read_json_file(path), path.string());
}

}  // namespace judgekit
