#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "judgekit/io.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/verdict.hpp"

namespace judgekit {

/// Identifies one judge request: which case, which label (empty for
/// undivided requests), which protocol stage.
struct RequestTag {
    std::string case_id;
    std::string label;
    Stage stage = Stage::few_shot;
};

/// Injective, stable key over (case, label, stage). Length prefixes keep the
/// key injective even when ids contain the separator.
inline std::string fingerprint(const std::string& case_id, const std::string& label, Stage stage) {
    return std::to_string(case_id.size()) + ":" + case_id + "|" + std::to_string(label.size()) +
           ":" + label + "|" + stage_name(stage);
}

inline std::string fingerprint(const RequestTag& tag) {
    return fingerprint(tag.case_id, tag.label, tag.stage);
}

/// Rule selecting a model by rendered context size; the first rule whose
/// threshold is not exceeded wins, falling back to the default model.
struct ModelRule {
    size_t max_chars = 0;
    std::string model;

    friend bool operator==(const ModelRule&, const ModelRule&) = default;
};

struct BackendConfig {
    std::string endpoint_url;  // scheme://host[:port][/base/path]
    std::string model_name = "gpt-4";
    double temperature = 0.0;
    size_t max_output_chars = 0;  // 0 = unlimited
    int timeout_ms = 30000;
    int max_retries = 3;
    int parallelism_limit = 4;
    int initial_backoff_ms = 250;
    std::string api_key_env = "OPENAI_API_KEY";
    std::vector<ModelRule> model_rules;

    void validate() const {
        if (temperature < 0) throw SchemaError("temperature must be >= 0");
        if (parallelism_limit < 1) throw SchemaError("parallelism_limit must be >= 1");
        if (max_retries < 0) throw SchemaError("max_retries must be >= 0");
        if (timeout_ms <= 0) throw SchemaError("timeout must be positive");
    }

    json to_json() const {
        json rules = json::array();
        for (const ModelRule& r : model_rules) {
            rules.push_back({{"max_chars", r.max_chars}, {"model", r.model}});
        }
        return json{{"endpoint_url", endpoint_url},
                    {"model_name", model_name},
                    {"temperature", temperature},
                    {"max_output_chars", max_output_chars},
                    {"timeout_ms", timeout_ms},
                    {"max_retries", max_retries},
                    {"parallelism_limit", parallelism_limit},
                    {"initial_backoff_ms", initial_backoff_ms},
                    {"api_key_env", api_key_env},
                    {"model_rules", std::move(rules)}};
    }

    std::string pick_model(size_t rendered_chars) const {
        for (const ModelRule& r : model_rules) {
            if (rendered_chars <= r.max_chars) return r.model;
        }
        return model_name;
    }
};

/// Uniform judge interface. complete() validates the context, enforces the
/// in-flight admission limit, and tracks call/attempt counts; subclasses
/// provide the transport.
class Backend {
public:
    virtual ~Backend() = default;

    std::string complete(const MessageSeq& ctx, const RequestTag& tag) {
        ctx.validate();
        gate_.acquire();
        struct Release {
            std::counting_semaphore<>& g;
            ~Release() { g.release(); }
        } release{gate_};
        calls_.fetch_add(1, std::memory_order_relaxed);
        return do_complete(ctx, tag);
    }

    uint64_t total_calls() const { return calls_.load(std::memory_order_relaxed); }
    uint64_t total_attempts() const { return attempts_.load(std::memory_order_relaxed); }
    int parallelism_limit() const { return parallelism_limit_; }

protected:
    explicit Backend(int parallelism_limit)
        : gate_(parallelism_limit < 1 ? 1 : parallelism_limit),
          parallelism_limit_(parallelism_limit < 1 ? 1 : parallelism_limit) {}

    virtual std::string do_complete(const MessageSeq& ctx, const RequestTag& tag) = 0;

    void record_attempt() { attempts_.fetch_add(1, std::memory_order_relaxed); }

private:
    std::counting_semaphore<> gate_;
    int parallelism_limit_;
    std::atomic<uint64_t> calls_{0};
    std::atomic<uint64_t> attempts_{0};
};

/// Deterministic stand-in judge keyed by (case, label, stage). Requests with
/// no scripted answer fail closed. Entries may pin a context hash for
/// regression use; the pinned hash must then match the context actually
/// built.
class ScriptedBackend : public Backend {
public:
    static constexpr int kSchemaVersion = 1;

    explicit ScriptedBackend(int parallelism_limit = 8) : Backend(parallelism_limit) {}

    void add_response(const std::string& case_id, const std::string& label, Stage stage,
                      std::string response_text, std::optional<uint64_t> context_hash = {}) {
        std::string key = fingerprint(case_id, label, stage);
        if (responses_.count(key))
            throw SchemaError("duplicate scripted response for " + describe(case_id, label, stage));
        responses_[key] = std::move(response_text);
        if (context_hash) pinned_context_hash_[key] = *context_hash;
    }

    size_t size() const { return responses_.size(); }

    static std::unique_ptr<ScriptedBackend> from_json(const json& doc, const std::string& where,
                                                      int parallelism_limit = 8) {
        if (!doc.is_object()) throw SchemaError("script must be an object in " + where);
        require_schema_version(doc, kSchemaVersion, where);
        check_known_fields(doc, {"schema_version", "responses"}, where);
        const json& arr = require_field(doc, "responses", where);
        if (!arr.is_array()) throw SchemaError("\"responses\" must be an array in " + where);
        auto backend = std::make_unique<ScriptedBackend>(parallelism_limit);
        size_t i = 0;
        for (const json& r : arr) {
            std::string rw = where + ", response #" + std::to_string(i++);
            check_known_fields(r, {"case_id", "label", "stage", "response", "context_fnv1a"}, rw);
            std::optional<uint64_t> hash;
            if (r.contains("context_fnv1a")) {
                hash = std::stoull(require_string(r, "context_fnv1a", rw), nullptr, 16);
            }
            backend->add_response(require_string(r, "case_id", rw),
                                  r.contains("label") ? require_string(r, "label", rw) : "",
                                  stage_from_name(require_string(r, "stage", rw), rw),
                                  require_string(r, "response", rw), hash);
        }
        return backend;
    }

    static std::unique_ptr<ScriptedBackend> load(const std::filesystem::path& path,
                                                 int parallelism_limit = 8) {
        return from_json(read_json_file(path), path.string(), parallelism_limit);
    }

    /// Writes the script back out in loadable form.
    json to_json() const {
        json arr = json::array();
        for (const auto& [key, response] : responses_) {
            const ParsedKey k = parse_key(key);
            json entry{{"case_id", k.case_id},
                       {"label", k.label},
                       {"stage", stage_name(k.stage)},
                       {"response", response}};
            auto pinned = pinned_context_hash_.find(key);
            if (pinned != pinned_context_hash_.end()) entry["context_fnv1a"] = to_hex(pinned->second);
            arr.push_back(std::move(entry));
        }
        return json{{"schema_version", kSchemaVersion}, {"responses", std::move(arr)}};
    }

    void save(const std::filesystem::path& path) const {
        write_file_atomic(path, to_json().dump(2) + "\n");
    }

protected:
    std::string do_complete(const MessageSeq& ctx, const RequestTag& tag) override {
        record_attempt();
        std::string key = fingerprint(tag);
        auto it = responses_.find(key);
        if (it == responses_.end())
            throw BackendError("unscripted request: " + describe(tag.case_id, tag.label, tag.stage));
        auto pinned = pinned_context_hash_.find(key);
        if (pinned != pinned_context_hash_.end()) {
            uint64_t actual = fnv1a64(ctx.render_text());
            if (actual != pinned->second)
                throw BackendError("context hash mismatch for " +
                                   describe(tag.case_id, tag.label, tag.stage) + " (expected " +
                                   to_hex(pinned->second) + ", got " + to_hex(actual) + ")");
        }
        return it->second;
    }

private:
    static std::string describe(const std::string& case_id, const std::string& label, Stage stage) {
        return "case \"" + case_id + "\", label \"" + label + "\", stage " + stage_name(stage);
    }

    struct ParsedKey {
        std::string case_id;
        std::string label;
        Stage stage = Stage::few_shot;
    };

    static ParsedKey parse_key(const std::string& key) {
        ParsedKey out;
        size_t pos = 0;
        auto read_segment = [&](std::string& into) {
            size_t colon = key.find(':', pos);
            size_t len = std::stoull(key.substr(pos, colon - pos));
            into = key.substr(colon + 1, len);
            pos = colon + 1 + len + 1;  // skip '|'
        };
        read_segment(out.case_id);
        read_segment(out.label);
        out.stage = stage_from_name(key.substr(pos), "script key");
        return out;
    }

    std::map<std::string, std::string> responses_;
    std::map<std::string, uint64_t> pinned_context_hash_;
};

struct HttpResponse {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string error;
};

/// Seam between the remote backend and the network, so retry and concurrency
/// behavior is testable without sockets.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& headers,
                              const std::string& body) = 0;
};

class HttplibTransport final : public HttpTransport {
public:
    HttplibTransport(const std::string& origin, int timeout_ms) : client_(origin) {
        client_.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
        client_.set_read_timeout(std::chrono::milliseconds(timeout_ms));
        client_.set_write_timeout(std::chrono::milliseconds(timeout_ms));
    }

    HttpResponse post(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& headers,
                      const std::string& body) override {
        httplib::Headers h(headers.begin(), headers.end());
        auto res = client_.Post(path, h, body, "application/json");
        if (!res) return {false, 0, "", httplib::to_string(res.error())};
        return {true, res->status, res->body, ""};
    }

private:
    httplib::Client client_;
};

/// OpenAI-compatible chat-completions client. Transient failures (transport
/// errors, 408/429/5xx) are retried with exponential backoff and a
/// byte-identical request body; malformed-request responses are never
/// retried.
class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(BackendConfig cfg, std::shared_ptr<HttpTransport> transport = nullptr)
        : Backend(cfg.parallelism_limit), cfg_(std::move(cfg)), transport_(std::move(transport)) {
        cfg_.validate();
        split_endpoint();
    }

    const BackendConfig& config() const { return cfg_; }

protected:
    std::string do_complete(const MessageSeq& ctx, const RequestTag& tag) override {
        json body_json{{"model", cfg_.pick_model(ctx.rendered_chars())},
                       {"temperature", cfg_.temperature},
                       {"messages", ctx.to_json()}};
        const std::string body = body_json.dump();

        std::vector<std::pair<std::string, std::string>> headers;
        if (!cfg_.api_key_env.empty()) {
            const char* key = std::getenv(cfg_.api_key_env.c_str());
            if (!key || !*key)
                throw BackendError("API credential environment variable " + cfg_.api_key_env +
                                   " is not set");
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }

        HttpTransport& transport = ensure_transport();
        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                auto delay = std::chrono::milliseconds(cfg_.initial_backoff_ms) * (1 << (attempt - 1));
                std::this_thread::sleep_for(std::min(delay, std::chrono::milliseconds(8000)));
            }
            record_attempt();
            HttpResponse res = transport.post(path_, headers, body);
            if (!res.transport_ok) {
                last_error = "transport error: " + res.error;
                continue;
            }
            if (res.status == 200) return extract_completion(res.body, tag);
            if (res.status == 408 || res.status == 429 || res.status >= 500) {
                last_error = "HTTP " + std::to_string(res.status);
                continue;
            }
            throw BackendError("non-retryable HTTP " + std::to_string(res.status) +
                               " from judge endpoint for case \"" + tag.case_id + "\": " + res.body);
        }
        throw BackendError("judge request failed after " + std::to_string(cfg_.max_retries + 1) +
                           " attempts (" + last_error + ") for case \"" + tag.case_id + "\"");
    }

private:
    std::string extract_completion(const std::string& body, const RequestTag& tag) const {
        json doc = json::parse(body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
            doc["choices"].empty() || !doc["choices"][0].contains("message")) {
            throw BackendError("malformed completion response for case \"" + tag.case_id + "\"");
        }
        std::string content = doc["choices"][0]["message"].value("content", "");
        if (content.empty())
            throw BackendError("empty completion for case \"" + tag.case_id + "\", label \"" +
                               tag.label + "\"");
        if (cfg_.max_output_chars > 0 && content.size() > cfg_.max_output_chars)
            throw BackendError("completion exceeds max_output_chars for case \"" + tag.case_id +
                               "\"");
        return content;
    }

    void split_endpoint() {
        if (cfg_.endpoint_url.empty()) {
            if (!transport_) throw SchemaError("remote backend requires an endpoint_url");
            path_ = "/v1/chat/completions";
            return;
        }
        size_t scheme = cfg_.endpoint_url.find("://");
        size_t path_start = scheme == std::string::npos
                                ? cfg_.endpoint_url.find('/')
                                : cfg_.endpoint_url.find('/', scheme + 3);
        if (path_start == std::string::npos) {
            origin_ = cfg_.endpoint_url;
            path_ = "/v1/chat/completions";
        } else {
            origin_ = cfg_.endpoint_url.substr(0, path_start);
            path_ = cfg_.endpoint_url.substr(path_start);
        }
    }

    HttpTransport& ensure_transport() {
        std::lock_guard<std::mutex> lock(transport_mutex_);
        if (!transport_) {
            transport_ = std::make_shared<HttplibTransport>(origin_, cfg_.timeout_ms);
        }
        return *transport_;
    }

    BackendConfig cfg_;
    std::string origin_;
    std::string path_;
    std::shared_ptr<HttpTransport> transport_;
    std::mutex transport_mutex_;
};

/// Decorator that captures every (tag, context, completion) triple flowing
/// through a backend; used for protocol audits and replay checks.
class RecordingBackend : public Backend {
public:
    struct CallRecord {
        RequestTag tag;
        std::string context_text;
        std::string completion;
    };

    explicit RecordingBackend(std::shared_ptr<Backend> inner)
        : Backend(1 << 20), inner_(std::move(inner)) {}

    std::vector<CallRecord> records() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return records_;
    }

protected:
    std::string do_complete(const MessageSeq& ctx, const RequestTag& tag) override {
        std::string completion = inner_->complete(ctx, tag);
        std::lock_guard<std::mutex> lock(mutex_);
        records_.push_back({tag, ctx.render_text(), completion});
        return completion;
    }

private:
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
};

}  // namespace judgekit
