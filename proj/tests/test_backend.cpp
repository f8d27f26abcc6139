#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <set>
#include <thread>

#include <judgekit/backend.hpp>

using namespace judgekit;

namespace {

const std::string kDataDir = JUDGEKIT_DATA_DIR;

MessageSeq simple_ctx(const std::string& user_text = "judge this") {
    MessageSeq seq;
    seq.messages = {{Role::system, "system prompt"}, {Role::user, user_text}};
    return seq;
}

json completion_body(const std::string& content) {
    return json{{"choices", json::array({json{{"message", json{{"content", content}}}}})}};
}

/// Scriptable transport double: a queue of responses, with bookkeeping for
/// retry and concurrency assertions.
class FakeTransport : public HttpTransport {
public:
    std::vector<HttpResponse> queue;
    std::vector<std::string> bodies_seen;
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};
    int hold_ms = 0;

    HttpResponse post(const std::string&,
                      const std::vector<std::pair<std::string, std::string>>&,
                      const std::string& body) override {
        int now = in_flight.fetch_add(1) + 1;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
        }
        if (hold_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(hold_ms));
        HttpResponse res;
        {
            static std::mutex m;
            std::lock_guard<std::mutex> lock(m);
            bodies_seen.push_back(body);
            res = queue.empty() ? HttpResponse{true, 200, completion_body("ok\nVERDICT: ABSENT").dump(), ""}
                                : queue.front();
            if (!queue.empty()) queue.erase(queue.begin());
        }
        in_flight.fetch_sub(1);
        return res;
    }
};

BackendConfig fast_config() {
    BackendConfig cfg;
    cfg.endpoint_url = "http://judge.internal:8000/v1/chat/completions";
    cfg.initial_backoff_ms = 1;
    cfg.api_key_env = "";  // no credential needed against the fake transport
    return cfg;
}

}  // namespace

TEST_CASE("fingerprint is stable and injective") {
    CHECK(fingerprint("c1", "Stiffness", Stage::zero_shot) ==
          fingerprint("c1", "Stiffness", Stage::zero_shot));
    CHECK(fingerprint("c1", "Stiffness", Stage::zero_shot) !=
          fingerprint("c1", "Stiffness", Stage::few_shot));
    // Separator characters inside ids cannot cause collisions.
    CHECK(fingerprint("a|b", "c", Stage::few_shot) != fingerprint("a", "b|c", Stage::few_shot));

    std::set<std::string> keys;
    for (int c = 0; c < 10; ++c) {
        for (int l = 0; l < 8; ++l) {
            for (Stage s : {Stage::zero_shot, Stage::few_shot, Stage::synthesis}) {
                keys.insert(fingerprint("case" + std::to_string(c), "label" + std::to_string(l), s));
            }
        }
    }
    CHECK(keys.size() == 240);
}

TEST_CASE("scripted backend replays and fails closed") {
    ScriptedBackend backend(4);
    backend.add_response("c1", "Stiffness", Stage::zero_shot, "scripted reason\nVERDICT: PRESENT");
    CHECK(backend.complete(simple_ctx(), {"c1", "Stiffness", Stage::zero_shot}) ==
          "scripted reason\nVERDICT: PRESENT");
    CHECK(backend.total_calls() == 1);

    CHECK_THROWS_WITH(backend.complete(simple_ctx(), {"c1", "Stiffness", Stage::few_shot}),
                      Catch::Matchers::ContainsSubstring("unscripted request"));
    CHECK_THROWS_AS(
        backend.add_response("c1", "Stiffness", Stage::zero_shot, "duplicate"),
        SchemaError);
}

TEST_CASE("scripted backend can pin a context hash") {
    MessageSeq ctx = simple_ctx();
    uint64_t good_hash = fnv1a64(ctx.render_text());
    ScriptedBackend backend;
    backend.add_response("c1", "L", Stage::few_shot, "pinned\nVERDICT: ABSENT", good_hash);
    CHECK(backend.complete(ctx, {"c1", "L", Stage::few_shot}) == "pinned\nVERDICT: ABSENT");

    ScriptedBackend strict;
    strict.add_response("c1", "L", Stage::few_shot, "pinned\nVERDICT: ABSENT", good_hash + 1);
    CHECK_THROWS_WITH(strict.complete(ctx, {"c1", "L", Stage::few_shot}),
                      Catch::Matchers::ContainsSubstring("context hash mismatch"));
}

TEST_CASE("bundled script file loads and round-trips") {
    auto backend = ScriptedBackend::load(kDataDir + "/script_sentiment.json");
    CHECK(backend->size() == 250);  // 10 cases x (8 labels x 3 stages + 1 undivided)
    CHECK(backend->complete(simple_ctx(), {"c03", "Refusal to Answer", Stage::synthesis})
              .find("VERDICT: PRESENT") != std::string::npos);

    auto path = std::filesystem::temp_directory_path() / "judgekit_script_roundtrip.json";
    backend->save(path);
    auto reloaded = ScriptedBackend::load(path);
    CHECK(reloaded->size() == backend->size());
    CHECK(reloaded->complete(simple_ctx(), {"c01", "Stiffness", Stage::zero_shot}) ==
          backend->complete(simple_ctx(), {"c01", "Stiffness", Stage::zero_shot}));
    std::filesystem::remove(path);
}

TEST_CASE("backends validate the context shape") {
    ScriptedBackend backend;
    MessageSeq bad;
    bad.messages = {{Role::user, "no system message"}};
    CHECK_THROWS_AS(backend.complete(bad, {"c", "l", Stage::few_shot}), PromptError);
}

TEST_CASE("remote backend parses a completion") {
    auto transport = std::make_shared<FakeTransport>();
    transport->queue.push_back({true, 200, completion_body("fine\nVERDICT: ABSENT").dump(), ""});
    RemoteBackend backend(fast_config(), transport);
    CHECK(backend.complete(simple_ctx(), {"c1", "L", Stage::few_shot}) == "fine\nVERDICT: ABSENT");
    CHECK(backend.total_attempts() == 1);
}

TEST_CASE("transient failures are retried with identical bodies") {
    auto transport = std::make_shared<FakeTransport>();
    transport->queue.push_back({false, 0, "", "connection reset"});
    transport->queue.push_back({true, 503, "overloaded", ""});
    transport->queue.push_back({true, 200, completion_body("done\nVERDICT: PRESENT").dump(), ""});
    BackendConfig cfg = fast_config();
    cfg.max_retries = 3;
    RemoteBackend backend(cfg, transport);

    CHECK(backend.complete(simple_ctx(), {"c1", "L", Stage::few_shot}) == "done\nVERDICT: PRESENT");
    CHECK(backend.total_attempts() == 3);
    CHECK(backend.total_calls() == 1);
    REQUIRE(transport->bodies_seen.size() == 3);
    CHECK(transport->bodies_seen[0] == transport->bodies_seen[1]);
    CHECK(transport->bodies_seen[1] == transport->bodies_seen[2]);
}

TEST_CASE("retry budget is exhausted after max_retries") {
    auto transport = std::make_shared<FakeTransport>();
    for (int i = 0; i < 10; ++i) transport->queue.push_back({true, 429, "slow down", ""});
    BackendConfig cfg = fast_config();
    cfg.max_retries = 2;
    RemoteBackend backend(cfg, transport);
    CHECK_THROWS_WITH(backend.complete(simple_ctx(), {"c1", "L", Stage::few_shot}),
                      Catch::Matchers::ContainsSubstring("after 3 attempts"));
    CHECK(backend.total_attempts() == 3);
}

TEST_CASE("malformed requests are never retried") {
    auto transport = std::make_shared<FakeTransport>();
    transport->queue.push_back({true, 400, "bad request", ""});
    RemoteBackend backend(fast_config(), transport);
    CHECK_THROWS_WITH(backend.complete(simple_ctx(), {"c1", "L", Stage::few_shot}),
                      Catch::Matchers::ContainsSubstring("non-retryable"));
    CHECK(backend.total_attempts() == 1);
}

TEST_CASE("empty and malformed completions are errors") {
    auto transport = std::make_shared<FakeTransport>();
    transport->queue.push_back({true, 200, completion_body("").dump(), ""});
    RemoteBackend backend(fast_config(), transport);
    CHECK_THROWS_WITH(backend.complete(simple_ctx(), {"c1", "L", Stage::few_shot}),
                      Catch::Matchers::ContainsSubstring("empty completion"));

    auto transport2 = std::make_shared<FakeTransport>();
    transport2->queue.push_back({true, 200, "{\"weird\": true}", ""});
    RemoteBackend backend2(fast_config(), transport2);
    CHECK_THROWS_WITH(backend2.complete(simple_ctx(), {"c1", "L", Stage::few_shot}),
                      Catch::Matchers::ContainsSubstring("malformed completion"));
}

TEST_CASE("missing API credential is a configuration error") {
    BackendConfig cfg = fast_config();
    cfg.api_key_env = "JUDGEKIT_TEST_MISSING_KEY";
    unsetenv("JUDGEKIT_TEST_MISSING_KEY");
    RemoteBackend backend(cfg, std::make_shared<FakeTransport>());
    CHECK_THROWS_WITH(backend.complete(simple_ctx(), {"c1", "L", Stage::few_shot}),
                      Catch::Matchers::ContainsSubstring("JUDGEKIT_TEST_MISSING_KEY"));
}

TEST_CASE("request body carries model, temperature, and messages") {
    auto transport = std::make_shared<FakeTransport>();
    BackendConfig cfg = fast_config();
    cfg.model_name = "judge-large";
    cfg.temperature = 0.0;
    cfg.model_rules = {{100, "judge-small"}, {100000, "judge-large-ctx"}};
    RemoteBackend backend(cfg, transport);
    backend.complete(simple_ctx(), {"c1", "L", Stage::few_shot});
    REQUIRE(transport->bodies_seen.size() == 1);
    json body = json::parse(transport->bodies_seen[0]);
    CHECK(body["model"] == "judge-small");  // short context picks the first rule
    CHECK(body["temperature"] == 0.0);
    CHECK(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");

    SECTION("model rules fall through by context size") {
        CHECK(cfg.pick_model(50) == "judge-small");
        CHECK(cfg.pick_model(5000) == "judge-large-ctx");
        CHECK(cfg.pick_model(200000) == "judge-large");
    }
}

TEST_CASE("at most parallelism_limit requests are in flight") {
    auto transport = std::make_shared<FakeTransport>();
    transport->hold_ms = 15;
    BackendConfig cfg = fast_config();
    cfg.parallelism_limit = 2;
    RemoteBackend backend(cfg, transport);

    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&backend, i] {
            backend.complete(simple_ctx("request " + std::to_string(i)),
                             {"c" + std::to_string(i), "L", Stage::few_shot});
        });
    }
    for (auto& t : threads) t.join();
    CHECK(transport->max_in_flight.load() <= 2);
    CHECK(backend.total_calls() == 8);
}

TEST_CASE("recording backend captures the full exchange") {
    auto inner = std::make_shared<ScriptedBackend>();
    inner->add_response("c1", "L", Stage::zero_shot, "why\nVERDICT: ABSENT");
    RecordingBackend recorder(inner);
    recorder.complete(simple_ctx("please judge"), {"c1", "L", Stage::zero_shot});
    auto records = recorder.records();
    REQUIRE(records.size() == 1);
    CHECK(records[0].tag.case_id == "c1");
    CHECK(records[0].context_text.find("please judge") != std::string::npos);
    CHECK(records[0].completion == "why\nVERDICT: ABSENT");
}

TEST_CASE("backend config invariants") {
    BackendConfig cfg;
    cfg.temperature = -0.1;
    CHECK_THROWS_AS(cfg.validate(), SchemaError);
    cfg = BackendConfig{};
    cfg.parallelism_limit = 0;
    CHECK_THROWS_AS(cfg.validate(), SchemaError);
    cfg = BackendConfig{};
    cfg.max_retries = -1;
    CHECK_THROWS_AS(cfg.validate(), SchemaError);
}
