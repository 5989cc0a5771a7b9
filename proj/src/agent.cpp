#include "graphqa/agent.hpp"

#include <algorithm>
#include <chrono>
#include <regex>

#include <json.hpp>

#include "graphqa/errors.hpp"
#include "graphqa/text.hpp"

namespace graphqa {

using nlohmann::json;

// ------------------------------------------------------- action parsing ----

std::string action_surface(const Action& action) {
    if (const auto* search = std::get_if<SearchAction>(&action)) {
        std::string joined;
        for (const auto& e : search->entities) {
            if (!joined.empty()) joined += " | ";
            joined += e;
        }
        return "Search[" + joined + "]";
    }
    if (const auto* generate = std::get_if<GenerateAction>(&action))
        return "Generate[" + generate->thought + "]";
    const auto& finish = std::get<FinishAction>(action);
    if (finish.unknown) return "Finish[unknown]";
    std::string joined;
    for (const auto& a : finish.answers) {
        if (!joined.empty()) joined += " | ";
        joined += a;
    }
    return "Finish[" + joined + "]";
}

ParsedAction parse_action(const std::string& completion) {
    static const std::regex action_re(R"((Search|Generate|Finish)\s*\[([^\]\n]*)\])");

    std::smatch last;
    for (auto it = std::sregex_iterator(completion.begin(), completion.end(), action_re);
         it != std::sregex_iterator(); ++it)
        last = *it;
    if (last.empty()) throw ActionParseError("no recognizable action in completion");

    std::string kind = last[1].str();
    std::string arg = last[2].str();

    // Thought text: everything before the action, minus the trailing
    // "Action i:" marker and any leading "Thought i:" marker.
    std::string prefix = completion.substr(0, static_cast<std::size_t>(last.position(0)));
    static const std::regex action_marker(R"(Action\s*\d*\s*:\s*$)");
    prefix = std::regex_replace(prefix, action_marker, "");
    static const std::regex thought_marker(R"(Thought\s*\d*\s*:)");
    std::smatch tm;
    std::string thought = prefix;
    for (auto it = std::sregex_iterator(prefix.begin(), prefix.end(), thought_marker);
         it != std::sregex_iterator(); ++it)
        tm = *it;
    if (!tm.empty()) thought = prefix.substr(static_cast<std::size_t>(tm.position(0) + tm.length(0)));
    thought = std::string(trim(thought));

    if (kind == "Search") {
        auto entities = split_trimmed(arg, '|');
        if (entities.empty()) throw ActionParseError("Search with no entities");
        return {thought, SearchAction{std::move(entities)}};
    }
    if (kind == "Generate") {
        std::string sub(trim(arg));
        if (sub.empty()) throw ActionParseError("Generate with no thought");
        return {thought, GenerateAction{std::move(sub)}};
    }
    auto answers = split_trimmed(arg, '|');
    if (answers.size() == 1 && to_lower(answers[0]) == "unknown")
        return {thought, FinishAction{{}, true}};
    if (answers.empty()) throw ActionParseError("Finish with no answers");
    return {thought, FinishAction{std::move(answers), false}};
}

std::string termination_name(Termination t) {
    switch (t) {
        case Termination::Finished: return "finished";
        case Termination::StepBudget: return "step_budget";
        case Termination::RollbackExhausted: return "rollback_exhausted";
        case Termination::Error: return "error";
    }
    return "error";
}

namespace {

Termination termination_from_name(const std::string& name) {
    if (name == "finished") return Termination::Finished;
    if (name == "step_budget") return Termination::StepBudget;
    if (name == "rollback_exhausted") return Termination::RollbackExhausted;
    return Termination::Error;
}

// Triple lines emitted by the model: "(h, r, t)" or bare "h, r, t", one per
// line. The relation never contains ", ", so the first and last separators
// bound it even when entity labels contain commas.
std::vector<Triple> parse_triples(const std::string& text) {
    std::vector<Triple> out;
    for (const auto& raw : split(text, '\n')) {
        std::string line(trim(raw));
        for (const char* prefix : {"Generated Triples:", "Generated triples:", "Answers:", "Answer:"})
            if (starts_with(line, prefix)) line = std::string(trim(line.substr(std::string(prefix).size())));
        while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = std::string(trim(line.substr(1)));
        if (line.size() >= 2 && line.front() == '(' && line.back() == ')')
            line = std::string(trim(line.substr(1, line.size() - 2)));
        if (line.empty()) continue;

        auto first = line.find(", ");
        auto last = line.rfind(", ");
        if (first == std::string::npos || last == first) continue;

        Triple t;
        t.head = std::string(trim(line.substr(0, first)));
        t.relation = std::string(trim(line.substr(first + 2, last - first - 2)));
        t.tail = std::string(trim(line.substr(last + 2)));
        std::replace(t.head.begin(), t.head.end(), '\t', ' ');
        std::replace(t.tail.begin(), t.tail.end(), '\t', ' ');
        std::replace(t.relation.begin(), t.relation.end(), ' ', '_');
        std::replace(t.relation.begin(), t.relation.end(), '\t', '_');
        if (t.head.empty() || t.relation.empty() || t.tail.empty()) continue;
        out.push_back(std::move(t));
    }
    return out;
}

std::optional<std::vector<std::string>> parse_bracket_list(const std::string& text) {
    auto open = text.find('[');
    if (open == std::string::npos) return std::nullopt;
    auto close = text.find(']', open);
    if (close == std::string::npos) return std::nullopt;
    return split_trimmed(text.substr(open + 1, close - open - 1), ',');
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

}  // namespace

// -------------------------------------------------- trace serialization ----

namespace {

json observed_to_json(const ObservedTriple& ot) {
    return json{{"head", ot.triple.head},
                {"relation", ot.triple.relation},
                {"source", ot.source == TripleSource::Kg ? "kg" : "generated"},
                {"tail", ot.triple.tail}};
}

ObservedTriple observed_from_json(const json& j) {
    ObservedTriple ot;
    ot.triple = Triple{j.at("head"), j.at("relation"), j.at("tail")};
    ot.source = j.at("source") == "kg" ? TripleSource::Kg : TripleSource::Generated;
    return ot;
}

json exchange_to_json(const LlmExchange& e) {
    json p{{"max_tokens", e.params.max_tokens},
           {"stop", e.params.stop},
           {"temperature", e.params.temperature}};
    return json{{"backend", e.backend},
                {"completion", e.completion},
                {"completion_tokens", e.completion_tokens},
                {"latency_ms", e.latency_ms},
                {"params", std::move(p)},
                {"prompt", e.prompt},
                {"prompt_tokens", e.prompt_tokens},
                {"slots", e.slots},
                {"template", e.template_name}};
}

LlmExchange exchange_from_json(const json& j) {
    LlmExchange e;
    e.template_name = j.at("template");
    for (const auto& [k, v] : j.at("slots").items()) e.slots[k] = v.get<std::string>();
    e.prompt = j.at("prompt");
    e.params.max_tokens = j.at("params").at("max_tokens");
    e.params.temperature = j.at("params").at("temperature");
    for (const auto& s : j.at("params").at("stop")) e.params.stop.push_back(s.get<std::string>());
    e.completion = j.at("completion");
    e.backend = j.at("backend");
    e.latency_ms = j.at("latency_ms");
    e.prompt_tokens = j.at("prompt_tokens");
    e.completion_tokens = j.at("completion_tokens");
    return e;
}

json step_to_json(const AgentStep& s) {
    json obs{{"messages", s.observation.messages}, {"triples", json::array()}};
    for (const auto& ot : s.observation.triples) obs["triples"].push_back(observed_to_json(ot));
    return json{{"action", s.action},
                {"action_kind", s.action_kind},
                {"index", s.index},
                {"observation", std::move(obs)},
                {"observation_text", s.observation_text},
                {"rollback", s.rollback},
                {"thought", s.thought}};
}

AgentStep step_from_json(const json& j) {
    AgentStep s;
    s.index = j.at("index");
    s.thought = j.at("thought");
    s.action = j.at("action");
    s.action_kind = j.at("action_kind");
    s.rollback = j.at("rollback");
    s.observation_text = j.at("observation_text");
    for (const auto& m : j.at("observation").at("messages"))
        s.observation.messages.push_back(m.get<std::string>());
    for (const auto& t : j.at("observation").at("triples"))
        s.observation.triples.push_back(observed_from_json(t));
    return s;
}

}  // namespace

std::string trace_to_json_line(const AgentResult& r) {
    json j;
    j["answers"] = r.answers;
    j["answer_provenance"] = json::array();
    for (const auto& ap : r.answer_provenance) {
        json support = json::array();
        for (const auto& ot : ap.supported_by) support.push_back(observed_to_json(ot));
        j["answer_provenance"].push_back(json{{"answer", ap.answer}, {"supported_by", std::move(support)}});
    }
    j["error_category"] = r.error_category;
    j["exchanges"] = json::array();
    for (const auto& e : r.exchanges) j["exchanges"].push_back(exchange_to_json(e));
    j["id"] = r.id;
    j["llm_steps"] = r.llm_steps;
    j["question"] = r.question;
    j["rollbacks"] = r.rollbacks;
    j["steps"] = json::array();
    for (const auto& s : r.steps) j["steps"].push_back(step_to_json(s));
    j["termination"] = termination_name(r.termination);
    j["termination_detail"] = r.termination_detail;
    j["topic_entities"] = r.topic_entities;
    j["wall_ms"] = r.wall_ms;
    j["warnings"] = r.warnings;
    return j.dump();
}

AgentResult trace_from_json_line(const std::string& line) {
    json j = json::parse(line);
    AgentResult r;
    for (const auto& a : j.at("answers")) r.answers.push_back(a.get<std::string>());
    for (const auto& ap : j.at("answer_provenance")) {
        AnswerSupport support;
        support.answer = ap.at("answer");
        for (const auto& ot : ap.at("supported_by")) support.supported_by.push_back(observed_from_json(ot));
        r.answer_provenance.push_back(std::move(support));
    }
    r.error_category = j.at("error_category");
    for (const auto& e : j.at("exchanges")) r.exchanges.push_back(exchange_from_json(e));
    r.id = j.at("id");
    r.llm_steps = j.at("llm_steps");
    r.question = j.at("question");
    r.rollbacks = j.at("rollbacks");
    for (const auto& s : j.at("steps")) r.steps.push_back(step_from_json(s));
    r.termination = termination_from_name(j.at("termination"));
    r.termination_detail = j.at("termination_detail");
    for (const auto& [k, v] : j.at("topic_entities").items()) r.topic_entities[k] = v.get<std::string>();
    r.wall_ms = j.at("wall_ms");
    for (const auto& w : j.at("warnings")) r.warnings.push_back(w.get<std::string>());
    return r;
}

std::vector<ScriptedBackend::Entry> script_entries_from_trace(const AgentResult& result) {
    std::vector<ScriptedBackend::Entry> entries;
    for (const auto& e : result.exchanges)
        entries.push_back({e.template_name, e.slots, e.completion});
    return entries;
}

AgentResult normalize_trace_for_replay(AgentResult trace) {
    trace.wall_ms = 0;
    for (auto& e : trace.exchanges) {
        e.latency_ms = 0;
        e.prompt_tokens = -1;
        e.completion_tokens = -1;
        e.backend = "scripted";
    }
    return trace;
}

// ----------------------------------------------------------------- agent ----

Agent::Agent(const GraphView& view, LlmGateway& gateway, AgentConfig config, DecodingParams decoding,
             std::string question, std::map<std::string, std::string> topic_entities)
    : view_(view), gateway_(gateway), config_(config), decoding_(std::move(decoding)) {
    result_.question = std::move(question);
    result_.topic_entities = std::move(topic_entities);
    for (const auto& [id, label] : result_.topic_entities)
        extra_label_index_[label].push_back(id);
    for (auto& [label, ids] : extra_label_index_) std::sort(ids.begin(), ids.end());
}

std::optional<EntityId> Agent::label_lookup(const std::string& label) const {
    const EntityId* best = nullptr;
    if (const auto* ids = view_.base().ids_for_label(label); ids != nullptr && !ids->empty())
        best = &ids->front();
    if (auto it = extra_label_index_.find(label); it != extra_label_index_.end() && !it->second.empty())
        if (best == nullptr || it->second.front() < *best) best = &it->second.front();
    if (best == nullptr) return std::nullopt;
    return *best;
}

std::string Agent::display(const std::string& term) const {
    if (auto it = minted_labels_.find(term); it != minted_labels_.end()) return it->second;
    auto label = view_.label_of(term);
    return label.empty() ? term : label;
}

std::string Agent::verbalize_triple(const Triple& t) const {
    std::map<std::string, std::string> local{{t.head, display(t.head)}, {t.tail, display(t.tail)}};
    return verbalize(t, local);
}

std::string Agent::render_observation(const Observation& obs) const {
    std::vector<std::string> lines = obs.messages;
    for (const auto& ot : obs.triples) lines.push_back(verbalize_triple(ot.triple));
    if (lines.empty()) return "no triples found";
    return join(lines, "\n");
}

LlmExchange Agent::call(const std::string& template_name, std::map<std::string, std::string> slots) {
    LlmExchange exchange = gateway_.complete(template_name, slots, decoding_);
    result_.exchanges.push_back(exchange);
    return exchange;
}

std::vector<std::string> Agent::relation_names_of(const EntityId& entity) const {
    std::set<std::string> names;
    for (const auto& ref : view_.relations_of(entity)) names.insert(ref.relation);
    for (const auto& t : overlay_)
        if (t.head == entity || t.tail == entity) names.insert(t.relation);
    return {names.begin(), names.end()};
}

std::vector<Triple> Agent::overlay_neighbors(const EntityId& entity,
                                             const std::vector<std::string>& relations) const {
    std::vector<Triple> out;
    for (const auto& t : overlay_) {
        if (t.head != entity && t.tail != entity) continue;
        if (std::find(relations.begin(), relations.end(), t.relation) != relations.end())
            out.push_back(t);
    }
    return out;
}

std::optional<EntityId> Agent::resolve_entity(const std::string& surface) {
    std::string s(trim(surface));
    if (s.empty()) return std::nullopt;

    bool known = !view_.base().out_slots(s).empty() || !view_.base().in_slots(s).empty() ||
                 view_.base().has_label(s) || result_.topic_entities.count(s) != 0 ||
                 minted_labels_.count(s) != 0;
    if (!known)
        for (const auto& t : overlay_)
            if (t.head == s || t.tail == s) {
                known = true;
                break;
            }
    if (known) return s;

    if (auto by_label = label_lookup(s)) return by_label;

    return select_candidate(s);
}

std::optional<EntityId> Agent::select_candidate(const std::string& label) {
    auto candidates = candidate_entities(label, view_, static_cast<std::size_t>(config_.link_candidates));
    if (candidates.empty()) return std::nullopt;

    // Relation names stand in for entity types in the selection prompt.
    std::vector<std::string> lines;
    for (const auto& [id, lbl] : candidates) {
        auto rels = relation_names_of(id);
        if (rels.size() > 3) rels.resize(3);
        lines.push_back(id + " (" + lbl + ") [" + join(rels, ", ") + "]");
    }

    auto exchange = call("link_entity", {{"Mention", label}, {"Candidates", join(lines, "\n")}});
    std::string answer;
    for (const auto& raw : split(exchange.completion, '\n')) {
        answer = std::string(trim(raw));
        if (!answer.empty()) break;
    }
    while (!answer.empty() && (answer.front() == '[' || answer.front() == '"')) answer.erase(0, 1);
    while (!answer.empty() && (answer.back() == ']' || answer.back() == '"' || answer.back() == '.'))
        answer.pop_back();
    answer = std::string(trim(answer));

    if (answer.empty() || to_lower(answer) == "none") return std::nullopt;
    for (const auto& [id, lbl] : candidates)
        if (id == answer) return id;
    for (const auto& [id, lbl] : candidates)
        if (to_lower(lbl) == to_lower(answer)) return id;
    return std::nullopt;
}

EntityId Agent::link_entity(const std::string& label) {
    std::string s(trim(label));
    if (auto resolved = resolve_entity(s)) return *resolved;
    // Mint a surrogate id equal to the label itself.
    minted_labels_[s] = s;
    auto& ids = extra_label_index_[s];
    if (std::find(ids.begin(), ids.end(), s) == ids.end()) {
        ids.push_back(s);
        std::sort(ids.begin(), ids.end());
    }
    return s;
}

std::vector<std::string> Agent::filter_relations(const std::string& thought, const EntityId& entity,
                                                 const std::vector<std::string>& relations) {
    if (relations.empty()) return {};
    if (relations.size() == 1) return relations;  // forced choice, no call needed
    auto n = static_cast<std::size_t>(config_.top_relations);

    std::map<std::string, std::string> slots{
        {"Thought", thought},
        {"Entity", display(entity)},
        {"Relations", "[" + join(relations, ", ") + "]"},
    };
    auto exchange = call("filter_relations", slots);
    auto parsed = parse_bracket_list(exchange.completion);
    if (!parsed) {
        slots["Attempt"] = "2";
        exchange = call("filter_relations", slots);
        parsed = parse_bracket_list(exchange.completion);
    }
    if (!parsed) {
        // Lenient fallback after the strict retry: split on commas/newlines.
        std::vector<std::string> pieces;
        for (const auto& chunk : split(exchange.completion, '\n'))
            for (const auto& piece : split_trimmed(chunk, ','))
                pieces.push_back(piece);
        parsed = std::move(pieces);
    }

    // An explicit empty list is a valid choice (the model filtered everything
    // away); only invalid-only answers trigger the stable-order fallback.
    if (parsed->empty()) return {};

    std::vector<std::string> selected;
    for (const auto& name : *parsed) {
        if (std::find(relations.begin(), relations.end(), name) == relations.end()) continue;
        if (std::find(selected.begin(), selected.end(), name) != selected.end()) continue;
        selected.push_back(name);
        if (selected.size() == n) break;
    }
    if (selected.empty()) {
        result_.warnings.push_back("relation filter for '" + display(entity) +
                                   "' named no valid relation; falling back to stable order");
        for (const auto& name : relations) {
            selected.push_back(name);
            if (selected.size() == n) break;
        }
    }
    return selected;
}

Observation Agent::do_search(const std::vector<std::string>& entities, const std::string& thought) {
    Observation obs;
    std::map<Triple, TripleSource> collected;
    std::vector<std::pair<EntityId, std::vector<std::string>>> targets;

    for (const auto& surface : entities) {
        auto id = resolve_entity(surface);
        if (!id) {
            obs.messages.push_back("no such entity: " + std::string(trim(surface)));
            continue;
        }
        auto relations = relation_names_of(*id);
        std::vector<std::string> selected;
        if (!relations.empty()) {
            selected = filter_relations(thought, *id, relations);
            for (const auto& t : view_.neighbors(*id, selected)) collected.emplace(t, TripleSource::Kg);
            for (const auto& t : overlay_neighbors(*id, selected))
                collected.emplace(t, view_.contains(t) ? TripleSource::Kg : TripleSource::Generated);
        }
        targets.emplace_back(*id, std::move(selected));
    }

    if (!targets.empty()) last_search_targets_ = std::move(targets);
    for (const auto& [t, src] : collected) obs.triples.push_back({t, src});
    return obs;
}

Observation Agent::do_generate(const std::string& thought) {
    Observation obs;

    // Choosing: rank the trace's accumulated observations against the thought.
    std::vector<Triple> pool;
    std::set<Triple> seen;
    for (const auto& step : result_.steps)
        for (const auto& ot : step.observation.triples)
            if (seen.insert(ot.triple).second) pool.push_back(ot.triple);

    Corpus corpus;
    for (std::size_t i = 0; i < pool.size(); ++i) corpus.add(std::to_string(i), verbalize_triple(pool[i]));
    auto ranked = bm25_rank(thought, corpus, static_cast<std::size_t>(config_.related_triples));

    std::vector<std::string> known_lines;
    for (const auto& r : ranked)
        known_lines.push_back("(" + verbalize_triple(pool[std::stoul(r.doc_id)]) + ")");
    std::string known = known_lines.empty() ? "(none)" : join(known_lines, "\n");

    // Generating: n independent draws, parsed and deduplicated.
    std::vector<Triple> drafts;
    std::set<Triple> draft_seen;
    for (int draw = 1; draw <= config_.generate_draws; ++draw) {
        auto exchange = call("generate_triples", {{"Thought", thought},
                                                  {"Known Triples", known},
                                                  {"Draw", std::to_string(draw)}});
        for (auto& t : parse_triples(exchange.completion))
            if (draft_seen.insert(t).second) drafts.push_back(std::move(t));
    }
    if (drafts.empty()) {
        obs.messages.push_back("no new knowledge generated");
        return obs;
    }

    // Verifying: keep the subset the model stands behind.
    std::vector<std::string> draft_lines;
    for (const auto& t : drafts)
        draft_lines.push_back("(" + t.head + ", " + t.relation + ", " + t.tail + ")");
    std::map<std::string, std::string> slots{{"Question", result_.question},
                                             {"Generated Triples", join(draft_lines, "\n")}};
    auto exchange = call("verify_triples", slots);
    auto kept = parse_triples(exchange.completion);
    if (kept.empty() && to_lower(exchange.completion).find("none") == std::string::npos) {
        slots["Attempt"] = "2";
        exchange = call("verify_triples", slots);
        kept = parse_triples(exchange.completion);
    }
    std::set<Triple> kept_set(kept.begin(), kept.end());

    std::map<Triple, TripleSource> retained;
    for (const auto& draft : drafts) {
        if (!kept_set.count(draft)) continue;
        Triple linked;
        linked.head = link_entity(draft.head);
        linked.relation = draft.relation;
        linked.tail = is_literal_term(draft.tail) ? draft.tail : link_entity(draft.tail);
        if (view_.contains(linked)) {
            retained.emplace(linked, TripleSource::Kg);
        } else {
            overlay_.insert(linked);
            retained.emplace(linked, TripleSource::Generated);
        }
    }
    if (retained.empty()) {
        obs.messages.push_back("no new knowledge generated");
        return obs;
    }
    for (const auto& [t, src] : retained) obs.triples.push_back({t, src});
    return obs;
}

Observation Agent::rollback_search(const std::string& thought) {
    Observation obs;
    std::map<Triple, TripleSource> collected;
    auto add = [&](const Triple& t, bool from_overlay) {
        collected.emplace(t, from_overlay && !view_.contains(t) ? TripleSource::Generated
                                                                : TripleSource::Kg);
    };

    for (const auto& [target, relations] : last_search_targets_) {
        if (relations.empty()) continue;
        std::set<std::string> frontier;
        for (const auto& t : view_.neighbors(target, relations)) {
            add(t, false);
            frontier.insert(t.head == target ? t.tail : t.head);
        }
        for (const auto& t : overlay_neighbors(target, relations)) {
            add(t, true);
            frontier.insert(t.head == target ? t.tail : t.head);
        }
        frontier.erase(target);

        // Second hop, re-filtered per node; stop expanding once the cap is
        // reached (frontier is iterated in sorted order, so this stays
        // deterministic).
        for (const auto& node : frontier) {
            if (collected.size() >= config_.rollback_triple_cap) break;
            if (is_literal_term(node)) continue;
            auto relations_here = relation_names_of(node);
            if (relations_here.empty()) continue;
            auto selected = filter_relations(thought, node, relations_here);
            for (const auto& t : view_.neighbors(node, selected)) add(t, false);
            for (const auto& t : overlay_neighbors(node, selected)) add(t, true);
        }
    }

    for (const auto& [t, src] : collected) {
        if (obs.triples.size() >= config_.rollback_triple_cap) break;
        obs.triples.push_back({t, src});
    }
    if (obs.triples.empty()) obs.messages.push_back("no further neighbors found");
    return obs;
}

void Agent::append_step(AgentStep step) {
    // Finish steps carry an observation only when rejected or rolled back.
    bool empty = step.observation.messages.empty() && step.observation.triples.empty();
    step.observation_text =
        step.action_kind == "finish" && !step.rollback && empty ? "" : render_observation(step.observation);
    result_.steps.push_back(std::move(step));
}

std::string Agent::steps_block() const {
    std::string out;
    for (const auto& s : result_.steps) {
        out += "Thought " + std::to_string(s.index) + ": " + s.thought + "\n";
        out += "Action " + std::to_string(s.index) + ": " + s.action + "\n";
        if (!s.observation_text.empty())
            out += "Observation " + std::to_string(s.index) + ": " + s.observation_text + "\n";
    }
    return out;
}

bool Agent::is_cvt_answer(const std::string& answer) const {
    return view_.is_cvt(answer);
}

AgentResult Agent::run(const std::string& sample_id) {
    auto start = std::chrono::steady_clock::now();
    result_.id = sample_id;

    std::string topic_line;
    for (const auto& [id, label] : result_.topic_entities) {
        if (!topic_line.empty()) topic_line += " | ";
        topic_line += label.empty() ? id : label;
    }

    bool parse_retry = false;
    bool cvt_retried = false;

    try {
        while (true) {
            if (result_.llm_steps >= config_.max_steps) {
                result_.termination = Termination::StepBudget;
                result_.termination_detail =
                    "step budget of " + std::to_string(config_.max_steps) + " exhausted";
                result_.answers.clear();
                break;
            }

            std::map<std::string, std::string> slots{
                {"Question", result_.question},
                {"Topic Entities", topic_line},
                {"Steps", steps_block()},
                {"Step", std::to_string(result_.steps.size() + 1)},
            };
            if (parse_retry) slots["Attempt"] = "2";
            auto exchange = call("gog_instruction", std::move(slots));
            ++result_.llm_steps;

            ParsedAction parsed;
            try {
                parsed = parse_action(exchange.completion);
            } catch (const ActionParseError& e) {
                if (!parse_retry) {
                    parse_retry = true;
                    continue;
                }
                result_.termination = Termination::Error;
                result_.termination_detail = std::string("action_parse: ") + e.what();
                break;
            }
            parse_retry = false;

            AgentStep step;
            step.index = static_cast<int>(result_.steps.size()) + 1;
            step.thought = parsed.thought;
            step.action = action_surface(parsed.action);

            if (const auto* search = std::get_if<SearchAction>(&parsed.action)) {
                step.action_kind = "search";
                step.observation = do_search(search->entities, parsed.thought);
                append_step(std::move(step));
                continue;
            }
            if (const auto* generate = std::get_if<GenerateAction>(&parsed.action)) {
                step.action_kind = "generate";
                step.observation = do_generate(generate->thought);
                append_step(std::move(step));
                continue;
            }

            auto finish = std::get<FinishAction>(parsed.action);
            step.action_kind = "finish";

            if (!finish.unknown) {
                std::vector<std::string> cvt, clean;
                for (const auto& a : finish.answers)
                    (is_cvt_answer(a) ? cvt : clean).push_back(a);
                if (!cvt.empty() && !cvt_retried) {
                    cvt_retried = true;
                    step.observation.messages.push_back(
                        "invalid answer: CVT nodes cannot be final answers");
                    append_step(std::move(step));
                    continue;
                }
                if (!cvt.empty()) {
                    result_.warnings.push_back("stripped CVT answers after retry: " + join(cvt, ", "));
                    finish.answers = clean;
                    if (clean.empty()) finish.unknown = true;
                }
                if (!finish.unknown) {
                    append_step(std::move(step));
                    result_.answers = finish.answers;
                    result_.termination = Termination::Finished;
                    break;
                }
                step.action = action_surface(Action{finish});
            }

            // Finish[unknown]: roll back one extra hop while budget remains.
            if (result_.rollbacks >= config_.max_rollbacks || last_search_targets_.empty()) {
                result_.termination = Termination::RollbackExhausted;
                result_.termination_detail = last_search_targets_.empty()
                                                 ? "no search targets to roll back"
                                                 : "rollback budget of " +
                                                       std::to_string(config_.max_rollbacks) +
                                                       " exhausted";
                result_.answers = {"unknown"};
                append_step(std::move(step));
                break;
            }
            ++result_.rollbacks;
            step.rollback = true;
            step.observation = rollback_search(parsed.thought);
            append_step(std::move(step));
        }
    } catch (const BackendError& e) {
        result_.termination = Termination::Error;
        result_.termination_detail = e.kind + ": " + e.what();
    } catch (const Error& e) {
        result_.termination = Termination::Error;
        result_.termination_detail = e.what();
    }

    if (result_.termination == Termination::Finished) {
        for (const auto& answer : result_.answers) {
            AnswerSupport support{answer, {}};
            auto norm = normalize_answer(answer);
            std::set<ObservedTriple> seen;
            for (const auto& step : result_.steps)
                for (const auto& ot : step.observation.triples) {
                    bool matches = normalize_answer(display(ot.triple.head)) == norm ||
                                   (!ot.triple.tail_is_literal() &&
                                    normalize_answer(display(ot.triple.tail)) == norm) ||
                                   ot.triple.tail == answer;
                    if (matches && seen.insert(ot).second) support.supported_by.push_back(ot);
                }
            result_.answer_provenance.push_back(std::move(support));
        }
    }

    result_.wall_ms = gateway_.deterministic()
                          ? 0
                          : std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
    return result_;
}

}  // namespace graphqa
