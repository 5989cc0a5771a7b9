#pragma once
// Chat-completion gateway: named prompt templates with few-shot blocks, a
// deterministic scripted backend keyed on (template, slot digest) for tests
// and replay, and an HTTP chat backend with retry, rate limiting and a
// concurrency cap.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace graphqa {

struct DecodingParams {
    double temperature = 0.7;
    int max_tokens = 256;
    std::vector<std::string> stop;
};

struct PromptTemplate {
    std::string name;
    std::string instruction;         // fixed header, ends with the examples lead-in
    std::vector<std::string> shots;  // exemplar blocks, joined between header and live block
    std::string live;                // slot-bearing tail, e.g. "Question: {Question}\n..."

    // Deterministic assembly; throws TemplateError naming any unfilled slot.
    std::string render(const std::map<std::string, std::string>& slots) const;
};

using TemplateSet = std::map<std::string, PromptTemplate>;

// The five built-in templates: gog_instruction, filter_relations,
// generate_triples, verify_triples, link_entity.
TemplateSet default_templates();

// Overrides from a directory of <name>.json files ({"instruction", "shots",
// "live"}); templates without a file keep their defaults.
TemplateSet load_templates(const std::filesystem::path& dir);

struct LlmRequest {
    std::string template_name;
    std::map<std::string, std::string> slots;
    std::string prompt;
    DecodingParams params;
};

struct CompletionResult {
    std::string text;
    std::int64_t prompt_tokens = -1;
    std::int64_t completion_tokens = -1;
};

struct LlmExchange {
    std::string template_name;
    std::map<std::string, std::string> slots;
    std::string prompt;
    DecodingParams params;
    std::string completion;
    std::string backend;
    std::int64_t latency_ms = 0;
    std::int64_t prompt_tokens = -1;
    std::int64_t completion_tokens = -1;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual CompletionResult complete(const LlmRequest& request) = 0;
    virtual std::string id() const = 0;
    virtual bool deterministic() const { return false; }
};

// Stable key for scripted lookup: template name plus a digest of the slot map.
std::string slot_digest(const std::string& template_name,
                        const std::map<std::string, std::string>& slots);

class ScriptedBackend : public LlmBackend {
public:
    struct Entry {
        std::string template_name;
        std::map<std::string, std::string> slots;
        std::string completion;
    };

    ScriptedBackend() = default;
    static ScriptedBackend load(const std::filesystem::path& path);
    static void save(const std::filesystem::path& path, const std::vector<Entry>& entries);

    void prime(const std::string& template_name, const std::map<std::string, std::string>& slots,
               const std::string& completion);

    CompletionResult complete(const LlmRequest& request) override;
    std::string id() const override { return "scripted"; }
    bool deterministic() const override { return true; }
    std::size_t size() const { return completions_.size(); }

private:
    std::map<std::string, std::string> completions_;       // digest -> completion
    std::map<std::string, std::vector<std::string>> keys_;  // template -> slot previews, for miss messages
};

// Sliding-window request limiter: acquire() blocks until another request may
// start within the window. limit <= 0 disables it.
class RateLimiter {
public:
    RateLimiter(int limit, std::chrono::milliseconds window);
    ~RateLimiter();
    void acquire();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct HttpBackendConfig {
    std::string endpoint;  // e.g. http://localhost:8080/v1/chat/completions
    std::string model;
    std::string api_key;
    std::string system_prompt;  // optional leading system message
    int timeout_ms = 60000;
    int max_retries = 3;
    int backoff_ms = 250;
    int rpm_limit = 0;        // 0 = unlimited
    int max_concurrency = 4;  // in-flight request cap
};

class HttpBackend : public LlmBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    CompletionResult complete(const LlmRequest& request) override;
    std::string id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct GatewayConfig {
    std::size_t max_prompt_chars = 32768;
};

// Renders, budget-checks, dispatches and packages each call as an
// LlmExchange. Holds no per-conversation state, so one gateway serves
// concurrent questions.
class LlmGateway {
public:
    LlmGateway(std::shared_ptr<LlmBackend> backend, TemplateSet templates, GatewayConfig config = {});

    LlmExchange complete(const std::string& template_name,
                         const std::map<std::string, std::string>& slots, const DecodingParams& params);

    const PromptTemplate& prompt_template(const std::string& name) const;
    bool deterministic() const { return backend_->deterministic(); }
    const std::string& backend_id() const { return backend_id_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    TemplateSet templates_;
    GatewayConfig config_;
    std::string backend_id_;
};

}  // namespace graphqa
