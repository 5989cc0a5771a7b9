#include "graphqa/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "graphqa/errors.hpp"
#include "graphqa/text.hpp"

namespace graphqa {

using nlohmann::json;

std::string config_digest(const RunConfig& config) {
    json j;
    j["agent"] = {{"max_steps", config.agent.max_steps},
                  {"max_rollbacks", config.agent.max_rollbacks},
                  {"top_relations", config.agent.top_relations},
                  {"related_triples", config.agent.related_triples},
                  {"generate_draws", config.agent.generate_draws},
                  {"link_candidates", config.agent.link_candidates},
                  {"rollback_triple_cap", config.agent.rollback_triple_cap}};
    j["decoding"] = {{"temperature", config.decoding.temperature},
                     {"max_tokens", config.decoding.max_tokens},
                     {"stop", config.decoding.stop}};
    j["backend"] = {{"kind", config.backend.kind},
                    {"model", config.backend.model},
                    {"script", std::filesystem::path(config.backend.script_path).filename().string()}};
    j["eval_mode"] = config.eval_mode;
    j["use_aliases"] = config.use_aliases;
    j["seed"] = config.seed;
    j["graph"] = std::filesystem::path(config.graph_path).filename().string();
    j["dataset"] = std::filesystem::path(config.dataset_path).filename().string();
    j["droplists"] = std::filesystem::path(config.droplist_path).filename().string();
    j["prompts"] = std::filesystem::path(config.prompts_dir).filename().string();
    j["max_prompt_chars"] = config.max_prompt_chars;
    return to_hex(fnv1a64(j.dump()));
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    static const std::set<std::string> known = {
        "graph", "dataset", "droplists", "backend", "script", "endpoint", "model",
        "api_key_env", "timeout_ms", "max_retries", "backoff_ms", "rpm_limit",
        "max_concurrency", "max_steps", "max_rollbacks", "top_relations",
        "related_triples", "generate_draws", "link_candidates", "rollback_triple_cap",
        "temperature", "max_tokens", "stop", "eval_mode", "use_aliases", "seed",
        "parallelism", "prompts_dir", "max_prompt_chars", "label",
    };
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError(path.string() + ": unknown config key '" + key + "'");

    RunConfig c;
    c.graph_path = j.value("graph", c.graph_path);
    c.dataset_path = j.value("dataset", c.dataset_path);
    c.droplist_path = j.value("droplists", c.droplist_path);
    c.backend.kind = j.value("backend", c.backend.kind);
    c.backend.script_path = j.value("script", c.backend.script_path);
    c.backend.endpoint = j.value("endpoint", c.backend.endpoint);
    c.backend.model = j.value("model", c.backend.model);
    c.backend.api_key_env = j.value("api_key_env", c.backend.api_key_env);
    c.backend.timeout_ms = j.value("timeout_ms", c.backend.timeout_ms);
    c.backend.max_retries = j.value("max_retries", c.backend.max_retries);
    c.backend.backoff_ms = j.value("backoff_ms", c.backend.backoff_ms);
    c.backend.rpm_limit = j.value("rpm_limit", c.backend.rpm_limit);
    c.backend.max_concurrency = j.value("max_concurrency", c.backend.max_concurrency);
    c.agent.max_steps = j.value("max_steps", c.agent.max_steps);
    c.agent.max_rollbacks = j.value("max_rollbacks", c.agent.max_rollbacks);
    c.agent.top_relations = j.value("top_relations", c.agent.top_relations);
    c.agent.related_triples = j.value("related_triples", c.agent.related_triples);
    c.agent.generate_draws = j.value("generate_draws", c.agent.generate_draws);
    c.agent.link_candidates = j.value("link_candidates", c.agent.link_candidates);
    c.agent.rollback_triple_cap = j.value("rollback_triple_cap", c.agent.rollback_triple_cap);
    c.decoding.temperature = j.value("temperature", c.decoding.temperature);
    c.decoding.max_tokens = j.value("max_tokens", c.decoding.max_tokens);
    if (j.contains("stop"))
        for (const auto& s : j["stop"]) c.decoding.stop.push_back(s.get<std::string>());
    c.eval_mode = j.value("eval_mode", c.eval_mode);
    c.use_aliases = j.value("use_aliases", c.use_aliases);
    c.seed = j.value("seed", c.seed);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.prompts_dir = j.value("prompts_dir", c.prompts_dir);
    c.max_prompt_chars = j.value("max_prompt_chars", c.max_prompt_chars);
    c.label = j.value("label", c.label);
    return c;
}

}  // namespace graphqa
