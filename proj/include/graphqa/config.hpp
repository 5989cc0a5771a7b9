#pragma once
// Run configuration shared by the CLI and tests. Every artifact embeds
// config_digest(), a hash of the semantic knobs (budgets, decoding, eval
// mode, seed, backend identity, prompt overrides and input basenames).
// Parallelism and absolute paths stay out of the digest: scheduling must not
// change output bytes, and artifacts should survive checkout relocation.

#include <cstdint>
#include <filesystem>
#include <string>

#include "graphqa/agent.hpp"
#include "graphqa/llm.hpp"

namespace graphqa {

struct BackendChoice {
    std::string kind = "scripted";  // scripted | http
    std::string script_path;
    std::string endpoint;
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_ms = 60000;
    int max_retries = 3;
    int backoff_ms = 250;
    int rpm_limit = 0;
    int max_concurrency = 4;
};

struct RunConfig {
    std::string graph_path;
    std::string dataset_path;
    std::string droplist_path;  // empty = complete KG
    BackendChoice backend;
    AgentConfig agent;
    DecodingParams decoding;
    std::string eval_mode = "any";
    bool use_aliases = true;
    std::uint64_t seed = 42;
    int parallelism = 1;
    std::string prompts_dir;
    std::size_t max_prompt_chars = 32768;
    std::string label;
};

std::string config_digest(const RunConfig& config);

// JSON config file mirroring the CLI flags; unknown keys are rejected.
RunConfig load_config_file(const std::filesystem::path& path);

}  // namespace graphqa
