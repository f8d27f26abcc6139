#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include <judgekit/judgekit.hpp>

using namespace judgekit;

namespace {

const std::string kDataDir = JUDGEKIT_DATA_DIR;

struct Fixture {
    CriteriaSet criteria = CriteriaSet::load(kDataDir + "/criteria_sentiment.json");
    ShotSet shots = ShotSet::load(kDataDir + "/shots_sentiment_v1.json");
    PromptTemplate tmpl = PromptTemplate::load(kDataDir + "/template_sentiment.json");
    std::vector<Case> cases;

    Fixture() { cases = load_dataset(kDataDir + "/dataset_sentiment.jsonl", &criteria); }

    std::unique_ptr<ScriptedBackend> script() const {
        return ScriptedBackend::load(kDataDir + "/script_sentiment.json");
    }
};

LabelSpec drift_label() {
    return LabelSpec{"Drift", "The answer wanders off the topic.", Polarity::unacceptable, "demo",
                     false, {}};
}

}  // namespace

TEST_CASE("parse_verdict extracts marker and reason") {
    LabelSpec label = drift_label();
    JudgeVerdict v = parse_verdict("The answer wanders off. It never returns.\nVERDICT: PRESENT",
                                   label, Stage::zero_shot);
    CHECK(v.present);
    CHECK(v.label == "Drift");
    CHECK(v.stage == Stage::zero_shot);
    CHECK(v.reason == "The answer wanders off. It never returns.");

    CHECK_FALSE(parse_verdict("Stays on topic.\nVERDICT: ABSENT", label).present);
    CHECK(parse_verdict("reason text\nverdict: present\n\n", label).present);  // case-insensitive
}

TEST_CASE("parse_verdict fails closed") {
    LabelSpec label = drift_label();
    SECTION("no marker at all") {
        try {
            parse_verdict("I think the answer is fine.", label);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.raw_text() == "I think the answer is fine.");
        }
    }
    SECTION("marker not on the final line") {
        CHECK_THROWS_AS(parse_verdict("VERDICT: PRESENT\nbut then more prose", label), ParseError);
    }
    SECTION("marker with no reasoning") {
        CHECK_THROWS_AS(parse_verdict("VERDICT: PRESENT", label), ParseError);
    }
    SECTION("empty completion") {
        CHECK_THROWS_AS(parse_verdict("", label), ParseError);
    }
    SECTION("unknown verdict word") {
        CHECK_THROWS_AS(parse_verdict("reason\nVERDICT: MAYBE", label), ParseError);
    }
}

TEST_CASE("multi-label parse requires one line per label") {
    CriteriaSet criteria = CriteriaSet::load(kDataDir + "/criteria_sentiment.json");
    std::vector<const LabelSpec*> labels = criteria.model_judged();
    std::string good = "Overall review.\n";
    for (const LabelSpec* l : labels) good += "LABEL " + l->name + " VERDICT: ABSENT\n";
    good += "FINAL SCORE: 2\n";
    auto verdicts = parse_multi_label_verdicts(good, labels);
    CHECK(verdicts.size() == labels.size());
    for (const auto& [name, present] : verdicts) CHECK_FALSE(present);

    SECTION("a missing label fails the parse") {
        std::string missing = "Review.\n";
        for (size_t i = 0; i + 1 < labels.size(); ++i) {
            missing += "LABEL " + labels[i]->name + " VERDICT: ABSENT\n";
        }
        CHECK_THROWS_AS(parse_multi_label_verdicts(missing, labels), ParseError);
    }
    SECTION("duplicate label lines fail") {
        std::string dup = good + "LABEL " + labels[0]->name + " VERDICT: PRESENT\n";
        CHECK_THROWS_AS(parse_multi_label_verdicts(dup, labels), ParseError);
    }
    SECTION("unknown label lines fail") {
        std::string unknown = good + "LABEL Mystery VERDICT: ABSENT\n";
        CHECK_THROWS_AS(parse_multi_label_verdicts(unknown, labels), ParseError);
    }
}

TEST_CASE("word_count_check measures the configured unit") {
    SECTION("over the maximum") {
        std::string answer(120, 'x');
        JudgeVerdict v = word_count_check(answer, {0, 100, CountUnit::characters}, "Length");
        CHECK(v.present);
        CHECK(v.stage == Stage::rule_based);
        CHECK(v.reason.find("120") != std::string::npos);
    }
    SECTION("inside the range") {
        std::string answer(80, 'x');
        CHECK_FALSE(word_count_check(answer, {50, 100, CountUnit::characters}, "Length").present);
    }
    SECTION("mixed-script counting, hand-counted fixture") {
        // "EV 很好 super!" -> code points: E,V,space,很,好,space,s,u,p,e,r,!  = 12
        // excluding whitespace = 10; whitespace tokens = 3.
        std::string answer = "EV 很好 super!";
        JudgeVerdict chars = word_count_check(answer, {0, 1000, CountUnit::characters}, "L");
        CHECK(chars.reason.find("counted 12 ") != std::string::npos);
        JudgeVerdict tight =
            word_count_check(answer, {11, 1000, CountUnit::characters_excluding_whitespace}, "L");
        CHECK(tight.present);  // 10 < 11
        CHECK(tight.reason.find("counted 10 ") != std::string::npos);
        JudgeVerdict tokens = word_count_check(answer, {3, 3, CountUnit::whitespace_tokens}, "L");
        CHECK_FALSE(tokens.present);
    }
}

TEST_CASE("single-turn judging makes exactly one call") {
    Fixture f;
    auto backend = f.script();
    const LabelSpec& stiffness = *f.criteria.find("Stiffness");
    const std::vector<Shot>& shots = *f.shots.shots_for("Stiffness");
    PromptConfig cfg;

    JudgeVerdict v = judge_label_single(f.cases[1], stiffness, {shots.data(), shots.size()}, f.tmpl,
                                        cfg, *backend);
    CHECK(backend->total_calls() == 1);
    CHECK(v.stage == Stage::few_shot);
    CHECK(v.present);  // c02 is annotated Stiffness

    SECTION("judging with no shots still works") {
        auto fresh = f.script();
        JudgeVerdict zero_shots =
            judge_label_single(f.cases[1], stiffness, {}, f.tmpl, cfg, *fresh);
        CHECK(fresh->total_calls() == 1);
        CHECK(zero_shots.present);
    }
}

TEST_CASE("multi-turn judging makes three calls and the synthesis decides") {
    LabelSpec label = drift_label();
    Case c;
    c.id = "x1";
    c.task = "demo";
    c.instruction = "judge";
    c.answer = "answer body";
    PromptTemplate tmpl = PromptTemplate::defaults("demo");
    PromptConfig cfg;

    SECTION("disagreement resolved by synthesis") {
        ScriptedBackend backend;
        backend.add_response("x1", "Drift", Stage::zero_shot, "looks off topic\nVERDICT: PRESENT");
        backend.add_response("x1", "Drift", Stage::few_shot, "examples say fine\nVERDICT: ABSENT");
        backend.add_response("x1", "Drift", Stage::synthesis, "on balance fine\nVERDICT: ABSENT");
        std::vector<JudgeVerdict> audit;
        JudgeVerdict v = judge_label_multiturn(c, label, {}, tmpl, cfg, backend, &audit);
        CHECK(backend.total_calls() == 3);
        CHECK_FALSE(v.present);
        CHECK(v.stage == Stage::synthesis);
        REQUIRE(audit.size() == 3);
        CHECK(audit[0].stage == Stage::zero_shot);
        CHECK(audit[1].stage == Stage::few_shot);
        CHECK(audit[2].stage == Stage::synthesis);
    }
    SECTION("synthesis overrides even unanimous candidates") {
        ScriptedBackend backend;
        backend.add_response("x1", "Drift", Stage::zero_shot, "fine\nVERDICT: ABSENT");
        backend.add_response("x1", "Drift", Stage::few_shot, "fine too\nVERDICT: ABSENT");
        backend.add_response("x1", "Drift", Stage::synthesis, "second look: bad\nVERDICT: PRESENT");
        JudgeVerdict v = judge_label_multiturn(c, label, {}, tmpl, cfg, backend);
        CHECK(v.present);
    }
    SECTION("a parse failure aborts the label with context") {
        ScriptedBackend backend;
        backend.add_response("x1", "Drift", Stage::zero_shot, "no marker here at all");
        CHECK_THROWS_AS(judge_label_multiturn(c, label, {}, tmpl, cfg, backend), ParseError);
    }
}

TEST_CASE("judge_case call counts follow the configured mode") {
    Fixture f;
    PromptConfig cfg;

    SECTION("division + multiturn: 3 calls per label") {
        auto backend = f.script();
        ScoreRecord r = judge_case(f.cases[0], f.criteria, f.shots, f.tmpl, cfg, *backend);
        CHECK(backend->total_calls() == 24);
        CHECK(r.verdicts.size() == 8);
        CHECK(r.final == 2);  // c01 is clean
    }
    SECTION("division + single: 1 call per label") {
        cfg.multi_turn = false;
        auto backend = f.script();
        ScoreRecord r = judge_case(f.cases[2], f.criteria, f.shots, f.tmpl, cfg, *backend);
        CHECK(backend->total_calls() == 8);
        CHECK(r.final == 0);  // c03 refuses
        CHECK(r.present_labels == std::set<std::string>{"Refusal to Answer"});
    }
    SECTION("non-division: a single undivided call") {
        cfg.division = false;
        auto backend = f.script();
        ScoreRecord r = judge_case(f.cases[8], f.criteria, f.shots, f.tmpl, cfg, *backend);
        CHECK(backend->total_calls() == 1);
        CHECK(r.present_labels == std::set<std::string>{"Stiffness", "Untranslated Text"});
        CHECK(r.final == 0);
    }
    SECTION("per-label zero-shot override trims the call count") {
        cfg.label_protocol_overrides["Stiffness"] = LabelProtocol::zero_shot_only;
        auto backend = f.script();
        ScoreRecord r = judge_case(f.cases[0], f.criteria, f.shots, f.tmpl, cfg, *backend);
        CHECK(backend->total_calls() == 22);  // 7 labels x 3 + 1
        CHECK(r.verdicts.at("Stiffness").stage == Stage::zero_shot);
        CHECK(expected_backend_calls(f.criteria, cfg, 1) == 22);
    }
}

TEST_CASE("rule-based labels bypass the judge model") {
    CriteriaSet criteria(
        "demo", {{"Drift", "The answer wanders off the topic.", Polarity::unacceptable, "demo",
                  false, {}},
                 {"Too Long", "The answer exceeds the word budget.", Polarity::unacceptable, "demo",
                  true, WordCountRule{0, 10, CountUnit::characters}}});
    ShotSet shots;
    shots.task = "demo";
    shots.version = 1;
    Case c;
    c.id = "x1";
    c.task = "demo";
    c.instruction = "judge";
    c.answer = "twelve chars!";  // 13 characters, over the 10-char budget
    PromptTemplate tmpl = PromptTemplate::defaults("demo");
    PromptConfig cfg;

    ScriptedBackend backend;
    backend.add_response("x1", "Drift", Stage::zero_shot, "fine\nVERDICT: ABSENT");
    backend.add_response("x1", "Drift", Stage::few_shot, "fine\nVERDICT: ABSENT");
    backend.add_response("x1", "Drift", Stage::synthesis, "fine\nVERDICT: ABSENT");

    ScoreRecord r = judge_case(c, criteria, shots, tmpl, cfg, backend);
    CHECK(backend.total_calls() == 3);  // only Drift is model-judged
    CHECK(r.verdicts.at("Too Long").stage == Stage::rule_based);
    CHECK(r.present_labels == std::set<std::string>{"Too Long"});
    CHECK(r.final == 0);
    CHECK(expected_backend_calls(criteria, cfg, 1) == 3);

    SECTION("judging a rule-based label with the model is rejected") {
        CHECK_THROWS_AS(
            judge_label_single(c, criteria.labels()[1], {}, tmpl, cfg, backend),
            SchemaError);
    }
}

TEST_CASE("run_experiment produces sorted, consistent, replayable records") {
    Fixture f;
    PromptConfig cfg;
    auto backend = f.script();
    RunResult first = run_experiment(f.cases, f.criteria, f.shots, f.tmpl, cfg, *backend, "all");

    REQUIRE(first.records.size() == 10);
    for (size_t i = 1; i < first.records.size(); ++i) {
        CHECK(first.records[i - 1].case_id < first.records[i].case_id);
    }
    for (const ScoreRecord& r : first.records) {
        CHECK(r.final == final_score(r.present_labels, f.criteria));
        std::set<std::string> derived;
        for (const auto& [label, v] : r.verdicts) {
            if (v.present) derived.insert(label);
        }
        CHECK(derived == r.present_labels);
        CHECK(r.config_digest == first.manifest.config_digest);
    }
    CHECK(first.manifest.backend_calls == 240);
    CHECK(first.manifest.stage_calls.at("zero_shot") == 80);
    CHECK(first.manifest.stage_calls.at("few_shot") == 80);
    CHECK(first.manifest.stage_calls.at("synthesis") == 80);
    CHECK(first.manifest.failures.empty());
    CHECK(first.manifest.shot_set_version == 1);
    CHECK(expected_backend_calls(f.criteria, cfg, 10) == 240);

    SECTION("two runs are byte-identical") {
        auto backend2 = f.script();
        RunResult second =
            run_experiment(f.cases, f.criteria, f.shots, f.tmpl, cfg, *backend2, "all");
        REQUIRE(second.records.size() == first.records.size());
        for (size_t i = 0; i < first.records.size(); ++i) {
            CHECK(first.records[i].to_json().dump() == second.records[i].to_json().dump());
        }
        CHECK(first.manifest.run_id == second.manifest.run_id);
        CHECK(first.manifest.config_digest == second.manifest.config_digest);
    }
}

TEST_CASE("failures are collected per case, not fabricated") {
    Fixture f;
    PromptConfig cfg;
    cfg.multi_turn = false;

    // Script only 4 of 5 cases: the fifth fails as unscripted.
    auto five = std::vector<Case>(f.cases.begin(), f.cases.begin() + 5);
    ScriptedBackend backend;
    for (size_t i = 0; i + 1 < five.size(); ++i) {
        for (const LabelSpec& l : f.criteria.labels()) {
            bool present = five[i].human_labels->count(l.name) > 0;
            backend.add_response(five[i].id, l.name, Stage::few_shot,
                                 "replayed note\nVERDICT: " +
                                     std::string(present ? "PRESENT" : "ABSENT"));
        }
    }
    RunResult result = run_experiment(five, f.criteria, f.shots, f.tmpl, cfg, backend, "eval");
    CHECK(result.records.size() == 4);
    REQUIRE(result.manifest.failures.size() == 1);
    CHECK(result.manifest.failures[0].case_id == "c05");
    CHECK(result.manifest.failures[0].error.find("unscripted") != std::string::npos);
    CHECK(result.manifest.record_count == 4);
    CHECK(result.manifest.case_count == 5);
}

TEST_CASE("empty split yields an empty but valid run") {
    Fixture f;
    ScriptedBackend backend;
    RunResult result =
        run_experiment({}, f.criteria, f.shots, f.tmpl, PromptConfig{}, backend, "empty");
    CHECK(result.records.empty());
    CHECK(result.manifest.backend_calls == 0);
    CHECK(result.manifest.case_count == 0);
    CHECK_FALSE(result.manifest.run_id.empty());
}

TEST_CASE("config digest pins everything that shapes a run") {
    Fixture f;
    PromptConfig cfg;
    std::string base = compute_config_digest(f.criteria, 1, cfg, json::object());
    CHECK(base == compute_config_digest(f.criteria, 1, cfg, json::object()));
    CHECK(base != compute_config_digest(f.criteria, 2, cfg, json::object()));
    PromptConfig other = cfg;
    other.shot_limit_per_label = 1;
    CHECK(base != compute_config_digest(f.criteria, 1, other, json::object()));
}

TEST_CASE("records and manifests round-trip through files") {
    Fixture f;
    PromptConfig cfg;
    cfg.multi_turn = false;
    auto backend = f.script();
    RunResult result = run_experiment(f.cases, f.criteria, f.shots, f.tmpl, cfg, *backend, "all");

    auto dir = std::filesystem::temp_directory_path() / "judgekit_records_roundtrip";
    std::filesystem::create_directories(dir);
    save_records(dir / "records.jsonl", result.records);
    save_manifest(dir / "manifest.json", result.manifest);

    std::vector<ScoreRecord> loaded = load_records(dir / "records.jsonl");
    REQUIRE(loaded.size() == result.records.size());
    for (size_t i = 0; i < loaded.size(); ++i) CHECK(loaded[i] == result.records[i]);

    RunManifest manifest = load_manifest(dir / "manifest.json");
    CHECK(manifest.run_id == result.manifest.run_id);
    CHECK(manifest.backend_calls == result.manifest.backend_calls);
    CHECK(manifest.stage_calls == result.manifest.stage_calls);
    std::filesystem::remove_all(dir);
}

TEST_CASE("zero-shot and few-shot contexts stay mutually independent") {
    Fixture f;
    PromptConfig cfg;
    auto inner = std::shared_ptr<Backend>(f.script().release());
    RecordingBackend recorder(inner);
    run_experiment(f.cases, f.criteria, f.shots, f.tmpl, cfg, recorder, "all");

    std::map<std::string, const RecordingBackend::CallRecord*> zero, few;
    auto calls = recorder.records();
    for (const auto& call : calls) {
        std::string key = call.tag.case_id + "\x1f" + call.tag.label;
        if (call.tag.stage == Stage::zero_shot) zero[key] = &call;
        if (call.tag.stage == Stage::few_shot) few[key] = &call;
    }
    REQUIRE(zero.size() == 80);
    REQUIRE(few.size() == 80);
    for (const auto& [key, zero_call] : zero) {
        const auto* few_call = few.at(key);
        CHECK(zero_call->context_text.find(few_call->completion) == std::string::npos);
        CHECK(few_call->context_text.find(zero_call->completion) == std::string::npos);
    }
}
