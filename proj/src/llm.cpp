#include "graphqa/llm.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "graphqa/errors.hpp"
#include "graphqa/text.hpp"

namespace graphqa {

using nlohmann::json;

// ----------------------------------------------------------- templates ----

std::string PromptTemplate::render(const std::map<std::string, std::string>& slots) const {
    std::string out = instruction;
    out += "\n";
    for (const auto& shot : shots) {
        out += shot;
        out += "\n\n";
    }
    // Fill {Slot} placeholders in the live block.
    std::size_t i = 0;
    while (i < live.size()) {
        if (live[i] == '{') {
            auto close = live.find('}', i);
            if (close == std::string::npos) throw TemplateError(name + ": unterminated '{' in template");
            std::string slot = live.substr(i + 1, close - i - 1);
            auto it = slots.find(slot);
            if (it == slots.end()) throw TemplateError(name + ": missing slot: " + slot);
            out += it->second;
            i = close + 1;
        } else {
            out += live[i];
            ++i;
        }
    }
    return out;
}

namespace {

const char* kGogInstruction =
    "Solve a question answering task with interleaving Thought, Action, Observation steps. "
    "Thought can reason about the current situation, and Action can be three types:\n"
    "(1) Search[entity1 | entity2 | ...], which searches the exact entities on Freebase and "
    "returns their one-hop subgraphs. You should extract the all concrete entities appeared in "
    "your last thought without redundant words, and you should always select entities from topic "
    "entities in the first search.\n"
    "(2) Generate[thought], which generate some new triples related to your last thought. These "
    "new triples may come from your inherent knowledge directly or reasoning from the given "
    "triples.\n"
    "(3) Finish[answer1 | answer2 | ...], which returns the answer and finishes the task. The "
    "answers should be complete entity label appeared in the triples. If you don't know the "
    "answer, please output Finish[unknown].\n"
    "Entities and answers should be separated by \"|\".\n"
    "Attention please, entities begin with \"m.\" (e.g., m.01041p3) represent CVT (compound "
    "value type) node, and they shouldn't be selected as the final answers. To find out those "
    "entities involved in these event, you could select them as the entities to be searched. You "
    "should generate each step without redundant words.\n"
    "Here are some examples.";

const char* kGogShot1 =
    "Question: Where did the \"Country Nation World Tour\" concert artist go to college?\n"
    "Topic Entity: Country Nation World Tour\n"
    "Thought 1: I need to find the artist who performed the \"Country Nation World Tour\" and "
    "then find out where they went to college.\n"
    "Action 1: Search[Country Nation World Tour]\n"
    "Observation 1: Country Nation World Tour, concert_tour.artist, Brad Paisley\n"
    "Thought 2: Brad Paisley performed the \"Country Nation World Tour\", so I need to find out "
    "where Brad Paisley went to college.\n"
    "Action 2: Search[Brad Paisley]\n"
    "Observation 2: Brad Paisley, person.education, m.0h3d7qb\n"
    "Brad Paisley, person.education, m.0h3d7qj\n"
    "Brad Paisley, person.education, m.0n1dd_6\n"
    "Thought 3: m.0h3d7qb, m.0h3d7qj and m.0n1dd_6 could be CVT nodes, I need to further search "
    "them.\n"
    "Action 3: Search[m.0h3d7qb | m.0h3d7qj | m.0n1dd_6]\n"
    "Observation 3: m.0h3d7qb, education.institution, John Marshall High School\n"
    "m.0h3d7qj, education.institution, Belmont University\n"
    "m.0h3d7qj, education.major_field_of_study, Music\n"
    "m.0n1dd_6, education.institution, West Liberty University\n"
    "Thought 4: Based on the given observations, Brad Paisley went to Belmont University. This "
    "is where the \"Country Nation World Tour\" concert artist went to college.\n"
    "Action 4: Finish[Belmont University]";

const char* kGogShot2 =
    "Question: Which Canadian province was the location for the TV show The Lottery?\n"
    "Topic Entity: The Lottery\n"
    "Thought 1: I need to find the location of the TV show 'The Lottery'.\n"
    "Action 1: Search[The Lottery]\n"
    "Observation 1: The Lottery, tv_program.country_of_origin, United States of America\n"
    "The Lottery, tv_program.filming_locations, Montreal\n"
    "Thought 2: The Lottery was filmed in Montreal, but I need to identify the Canadian province "
    "that Montreal is in.\n"
    "Action 2: Search[Montreal]\n"
    "Observation 2: Hochelaga-Maisonneuve, location.containedby, Montreal\n"
    "Montreal, travel_destination.tourist_attractions, Montreal Museum of Fine Arts\n"
    "Thought 3: Montreal is a city, so I need to find the province it belongs to, but there is "
    "no such information in the observations. I need to generate new triples based on my "
    "inherent knowledge.\n"
    "Action 3: Generate[which Canadian province is Montreal in]\n"
    "Observation 3: Montreal, location.located_in, Quebec\n"
    "Quebec, country_part, Canada\n"
    "Thought 4: The answer is the province of Quebec in Canada.\n"
    "Action 4: Finish[Quebec]";

const char* kGogShot3 =
    "Question: Which nation has the Alta Verapaz Department and is in Central America?\n"
    "Topic Entity: Alta Verapaz Department | Central America\n"
    "Thought 1: I need to find the nation that contains the Alta Verapaz Department.\n"
    "Action 1: Search[Alta Verapaz Department]\n"
    "Observation 1: Alta Verapaz Department, administrative_area.administrative_area_type, "
    "Guatemalan department\n"
    "Raxruha, location.containedby, Alta Verapaz Department\n"
    "Thought 2: I found that Alta Verapaz Department is a Guatemalan department, now I need to "
    "confirm if Guatemala is in Central America.\n"
    "Action 2: Search[Guatemala]\n"
    "Observation 2: Guatemala, countries.continent, North America\n"
    "Guatemala, country.languages_spoken, Spanish Language\n"
    "Thought 3: The information says Guatemala is in North America, not Central America. Central "
    "America may be a region of North America, so I need to verify if Guatemala is considered a "
    "part of Central America.\n"
    "Action 3: Generate[Central America includes Guatemala]\n"
    "Observation 3: Central America, region.includes, Guatemala\n"
    "Guatemala, country.geographic_region, Central America\n"
    "North America, continent.includes, Central America\n"
    "Thought 4: Based on the new triples, I can confirm that Guatemala, which contains the Alta "
    "Verapaz Department, is indeed in Central America.\n"
    "Action 4: Finish[Guatemala]";

const char* kFilterInstruction =
    "Please select 3 relations that most relevant to the question and rank them. You should "
    "answer these relations in list format directly without redundant words.\n"
    "Here are some examples.";

const char* kFilterShot =
    "Thought: I need to find the artist who performed the \"Country Nation World Tour\" and "
    "then find out where they went to college.\n"
    "Entity: Country Nation World Tour\n"
    "Relation: [concert_tour.artist, concert_tour.start_date, concert_tour.venues]\n"
    "Answer: [concert_tour.artist]";

const char* kGenerateInstruction =
    "Given the existing triples, please generate some new triples related to your current "
    "thought. These new triples may come from your inherent knowledge directly or reasoning "
    "from the given triples.\n"
    "Here are some examples.";

const char* kGenerateShot =
    "Thought: which Canadian province is Montreal in\n"
    "Known Triples: (The Lottery, filming locations, Montreal)\n"
    "(Montreal, tourist attractions, Montreal Museum of Fine Arts)\n"
    "Generated Triples: (Montreal, location.located_in, Quebec)\n"
    "(Quebec, country_part, Canada)";

const char* kVerifyInstruction =
    "Given the existing triples please select relevant triples to the question from "
    "LLM-generated triples based on your inherent knowledge.\n"
    "Here are some examples.";

const char* kVerifyShot =
    "Question: Which Canadian province was the location for the TV show The Lottery?\n"
    "Generated triples: (Montreal, location.located_in, Quebec)\n"
    "(Montreal, location.located_in, Ontario)\n"
    "Answers: (Montreal, location.located_in, Quebec)";

const char* kLinkInstruction =
    "Please select the entity that best matches the mention, based on the entity labels and "
    "their relation types. You should answer with a single entity id directly without redundant "
    "words. If no candidate matches, answer none.\n"
    "Here are some examples.";

const char* kLinkShot =
    "Mention: Quebec\n"
    "Candidates: m.0qbc (Quebec) [location.located_in, country_part, "
    "administrative_division.country]\n"
    "m.0qbcc (Quebec City) [location.containedby, location.citytown]\n"
    "Answer: m.0qbc";

}  // namespace

TemplateSet default_templates() {
    TemplateSet set;
    set["gog_instruction"] = PromptTemplate{
        "gog_instruction",
        kGogInstruction,
        {kGogShot1, kGogShot2, kGogShot3},
        "Question: {Question}\nTopic Entity: {Topic Entities}\n{Steps}Thought {Step}:",
    };
    set["filter_relations"] = PromptTemplate{
        "filter_relations",
        kFilterInstruction,
        {kFilterShot},
        "Thought: {Thought}\nEntity: {Entity}\nRelation: {Relations}\nAnswer:",
    };
    set["generate_triples"] = PromptTemplate{
        "generate_triples",
        kGenerateInstruction,
        {kGenerateShot},
        "Thought: {Thought}\nKnown Triples: {Known Triples}\nGenerated Triples:",
    };
    set["verify_triples"] = PromptTemplate{
        "verify_triples",
        kVerifyInstruction,
        {kVerifyShot},
        "Question: {Question}\nGenerated triples: {Generated Triples}\nAnswers:",
    };
    set["link_entity"] = PromptTemplate{
        "link_entity",
        kLinkInstruction,
        {kLinkShot},
        "Mention: {Mention}\nCandidates: {Candidates}\nAnswer:",
    };
    return set;
}

TemplateSet load_templates(const std::filesystem::path& dir) {
    TemplateSet set = default_templates();
    for (auto& [name, tmpl] : set) {
        auto file = dir / (name + ".json");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file);
        if (!in) throw IoError("cannot open template file: " + file.string());
        try {
            json j = json::parse(in);
            tmpl.instruction = j.at("instruction").get<std::string>();
            tmpl.live = j.at("live").get<std::string>();
            tmpl.shots.clear();
            for (const auto& shot : j.at("shots")) tmpl.shots.push_back(shot.get<std::string>());
        } catch (const json::exception& e) {
            throw ParseError(file.string() + ": " + e.what());
        }
    }
    return set;
}

// ------------------------------------------------------ scripted backend ----

std::string slot_digest(const std::string& template_name,
                        const std::map<std::string, std::string>& slots) {
    std::uint64_t h = fnv1a64(template_name);
    h = fnv1a64(std::string_view("\x1e", 1), h);
    for (const auto& [key, value] : slots) {
        h = fnv1a64(key, h);
        h = fnv1a64(std::string_view("=", 1), h);
        h = fnv1a64(value, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
    }
    return template_name + "#" + to_hex(h);
}

void ScriptedBackend::prime(const std::string& template_name,
                            const std::map<std::string, std::string>& slots,
                            const std::string& completion) {
    completions_[slot_digest(template_name, slots)] = completion;
    std::string preview;
    for (const auto& [key, value] : slots) {
        if (!preview.empty()) preview += ", ";
        preview += key + "=" + (value.size() > 40 ? value.substr(0, 40) + "..." : value);
    }
    keys_[template_name].push_back(slot_digest(template_name, slots) + " {" + preview + "}");
}

CompletionResult ScriptedBackend::complete(const LlmRequest& request) {
    auto key = slot_digest(request.template_name, request.slots);
    auto it = completions_.find(key);
    if (it == completions_.end()) {
        std::string message = "scripted backend: no completion for key " + key;
        auto nearest = keys_.find(request.template_name);
        if (nearest == keys_.end()) {
            message += "; no entries for template '" + request.template_name + "'";
        } else {
            message += "; nearest keys:";
            std::size_t shown = 0;
            for (const auto& candidate : nearest->second) {
                message += "\n  " + candidate;
                if (++shown == 5) break;
            }
        }
        throw BackendError("scripted_key_miss", message);
    }
    return {it->second, -1, -1};
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script file: " + path.string());
    ScriptedBackend backend;
    try {
        json j = json::parse(in);
        for (const auto& entry : j.at("entries")) {
            std::map<std::string, std::string> slots;
            for (const auto& [key, value] : entry.at("slots").items())
                slots[key] = value.get<std::string>();
            backend.prime(entry.at("template").get<std::string>(), slots,
                          entry.at("completion").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return backend;
}

void ScriptedBackend::save(const std::filesystem::path& path, const std::vector<Entry>& entries) {
    json j;
    j["entries"] = json::array();
    for (const auto& entry : entries) {
        json e;
        e["template"] = entry.template_name;
        e["slots"] = json::object();
        for (const auto& [key, value] : entry.slots) e["slots"][key] = value;
        e["completion"] = entry.completion;
        j["entries"].push_back(std::move(e));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write script file: " + path.string());
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------- http backend ----

struct RateLimiter::Impl {
    int limit;
    std::chrono::milliseconds window;
    std::mutex mutex;
    std::deque<std::chrono::steady_clock::time_point> recent;
};

RateLimiter::RateLimiter(int limit, std::chrono::milliseconds window)
    : impl_(std::make_unique<Impl>()) {
    impl_->limit = limit;
    impl_->window = window;
}

RateLimiter::~RateLimiter() = default;

void RateLimiter::acquire() {
    if (impl_->limit <= 0) return;
    std::unique_lock lock(impl_->mutex);
    while (true) {
        auto now = std::chrono::steady_clock::now();
        while (!impl_->recent.empty() && now - impl_->recent.front() > impl_->window)
            impl_->recent.pop_front();
        if (static_cast<int>(impl_->recent.size()) < impl_->limit) break;
        auto wake = impl_->recent.front() + impl_->window;
        lock.unlock();
        std::this_thread::sleep_until(wake);
        lock.lock();
    }
    impl_->recent.push_back(std::chrono::steady_clock::now());
}

struct HttpBackend::Impl {
    HttpBackendConfig config;
    std::string host;  // scheme://host:port
    std::string path;

    std::mutex mutex;
    std::condition_variable slot_free;
    int in_flight = 0;
    std::unique_ptr<RateLimiter> limiter;

    void acquire() {
        {
            std::unique_lock lock(mutex);
            slot_free.wait(lock, [&] { return in_flight < config.max_concurrency; });
            ++in_flight;
        }
        limiter->acquire();
    }

    void release() {
        std::lock_guard lock(mutex);
        --in_flight;
        slot_free.notify_one();
    }
};

HttpBackend::HttpBackend(HttpBackendConfig config) : impl_(std::make_unique<Impl>()) {
    impl_->config = std::move(config);
    impl_->limiter =
        std::make_unique<RateLimiter>(impl_->config.rpm_limit, std::chrono::seconds(60));
    const std::string& endpoint = impl_->config.endpoint;
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        impl_->host = endpoint;
        impl_->path = "/v1/chat/completions";
    } else {
        impl_->host = endpoint.substr(0, path_start);
        impl_->path = endpoint.substr(path_start);
    }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const {
    return "http:" + impl_->config.model;
}

CompletionResult HttpBackend::complete(const LlmRequest& request) {
    json body;
    body["model"] = impl_->config.model;
    body["messages"] = json::array();
    if (!impl_->config.system_prompt.empty())
        body["messages"].push_back({{"role", "system"}, {"content", impl_->config.system_prompt}});
    body["messages"].push_back({{"role", "user"}, {"content", request.prompt}});
    body["temperature"] = request.params.temperature;
    body["max_tokens"] = request.params.max_tokens;
    if (!request.params.stop.empty()) body["stop"] = request.params.stop;
    std::string payload = body.dump();

    impl_->acquire();
    struct Release {
        Impl* impl;
        ~Release() { impl->release(); }
    } release{impl_.get()};

    std::string last_error;
    for (int attempt = 0; attempt <= impl_->config.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(impl_->config.backoff_ms << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }

        httplib::Client client(impl_->host);
        client.set_connection_timeout(0, impl_->config.timeout_ms * 1000LL);
        client.set_read_timeout(impl_->config.timeout_ms / 1000, (impl_->config.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!impl_->config.api_key.empty())
            headers.emplace("Authorization", "Bearer " + impl_->config.api_key);

        auto result = client.Post(impl_->path, headers, payload, "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200)
            throw BackendError("http", "HTTP " + std::to_string(result->status) + ": " + result->body);

        try {
            json response = json::parse(result->body);
            CompletionResult out;
            out.text = response.at("choices").at(0).at("message").at("content").get<std::string>();
            if (response.contains("usage")) {
                out.prompt_tokens = response["usage"].value("prompt_tokens", -1);
                out.completion_tokens = response["usage"].value("completion_tokens", -1);
            }
            return out;
        } catch (const json::exception& e) {
            throw BackendError("http", std::string("malformed completion response: ") + e.what());
        }
    }
    throw BackendError("http", "retries exhausted (" + std::to_string(impl_->config.max_retries + 1) +
                                   " attempts): " + last_error);
}

// --------------------------------------------------------------- gateway ----

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend, TemplateSet templates, GatewayConfig config)
    : backend_(std::move(backend)), templates_(std::move(templates)), config_(config),
      backend_id_(backend_->id()) {}

const PromptTemplate& LlmGateway::prompt_template(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw TemplateError("unknown template: " + name);
    return it->second;
}

LlmExchange LlmGateway::complete(const std::string& template_name,
                                 const std::map<std::string, std::string>& slots,
                                 const DecodingParams& params) {
    if (params.temperature < 0.0)
        throw ConfigError("temperature must be >= 0, got " + std::to_string(params.temperature));
    if (params.max_tokens < 1)
        throw ConfigError("max_tokens must be >= 1, got " + std::to_string(params.max_tokens));

    LlmRequest request;
    request.template_name = template_name;
    request.slots = slots;
    request.prompt = prompt_template(template_name).render(slots);
    request.params = params;

    if (request.prompt.size() > config_.max_prompt_chars)
        throw TemplateError(template_name + ": prompt of " + std::to_string(request.prompt.size()) +
                            " chars exceeds budget of " + std::to_string(config_.max_prompt_chars));

    auto start = std::chrono::steady_clock::now();
    CompletionResult result = backend_->complete(request);
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);

    LlmExchange exchange;
    exchange.template_name = template_name;
    exchange.slots = slots;
    exchange.prompt = std::move(request.prompt);
    exchange.params = params;
    exchange.completion = std::move(result.text);
    exchange.backend = backend_id_;
    // Scripted replays report zero latency so artifacts stay byte-stable.
    exchange.latency_ms = backend_->deterministic() ? 0 : elapsed.count();
    exchange.prompt_tokens = result.prompt_tokens;
    exchange.completion_tokens = result.completion_tokens;
    return exchange;
}

}  // namespace graphqa
