#pragma once
// The Thinking-Searching-Generating loop: the model produces Thought/Action
// pairs; Search explores the view (relation filtering via LLM), Generate
// drafts new triples (BM25 choosing, n generation draws, verification,
// entity linking) into a provenance-tagged overlay, Finish ends the episode.
// Finish[unknown] rolls the search back one extra hop around the last
// targets until the rollback budget runs out.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "graphqa/bm25.hpp"
#include "graphqa/kg.hpp"
#include "graphqa/llm.hpp"

namespace graphqa {

struct SearchAction {
    std::vector<std::string> entities;  // ids or labels, "|"-separated in surface form
};

struct GenerateAction {
    std::string thought;
};

struct FinishAction {
    std::vector<std::string> answers;
    bool unknown = false;
};

using Action = std::variant<SearchAction, GenerateAction, FinishAction>;

std::string action_surface(const Action& action);

struct ParsedAction {
    std::string thought;
    Action action;
};

// Extracts the final Thought/Action pair from a completion, tolerating
// surrounding prose. Throws ActionParseError when no action is recognizable.
ParsedAction parse_action(const std::string& completion);

enum class TripleSource { Kg, Generated };

struct ObservedTriple {
    Triple triple;
    TripleSource source = TripleSource::Kg;
    friend auto operator<=>(const ObservedTriple&, const ObservedTriple&) = default;
};

struct Observation {
    std::vector<std::string> messages;
    std::vector<ObservedTriple> triples;
};

struct AgentStep {
    int index = 0;
    std::string thought;
    std::string action;       // surface form, e.g. "Search[Apple Inc]"
    std::string action_kind;  // search | generate | finish
    bool rollback = false;    // observation came from a rollback re-search
    Observation observation;
    std::string observation_text;  // rendered block as shown to the model
};

enum class Termination { Finished, StepBudget, RollbackExhausted, Error };

std::string termination_name(Termination t);

struct AnswerSupport {
    std::string answer;
    std::vector<ObservedTriple> supported_by;
};

struct AgentConfig {
    int max_steps = 8;
    int max_rollbacks = 2;
    int top_relations = 3;            // N, relation-filter width
    int related_triples = 5;          // k, BM25-chosen triples per Generate
    int generate_draws = 3;           // n, generation repetitions
    int link_candidates = 5;          // BM25 candidates offered to the linker
    std::size_t rollback_triple_cap = 50;
};

struct AgentResult {
    std::string id;
    std::string question;
    std::map<std::string, std::string> topic_entities;
    std::vector<AgentStep> steps;
    std::vector<std::string> answers;
    std::vector<AnswerSupport> answer_provenance;
    Termination termination = Termination::Error;
    std::string termination_detail;
    int llm_steps = 0;  // thought/action completions consumed
    int rollbacks = 0;
    std::vector<LlmExchange> exchanges;
    std::vector<std::string> warnings;
    std::int64_t wall_ms = 0;
    // Manual error taxonomy slot, left empty by the runner:
    // generate_error | decompose_error | hallucination | false_negative.
    std::string error_category;
};

std::string trace_to_json_line(const AgentResult& result);
AgentResult trace_from_json_line(const std::string& line);

// Recorded exchanges as scripted-backend entries; replaying them reproduces
// the trace byte for byte.
std::vector<ScriptedBackend::Entry> script_entries_from_trace(const AgentResult& result);

// Strips what a scripted replay cannot reproduce (measured latencies, wall
// time, token counts, the live backend id) so a trace recorded over HTTP
// byte-compares with its replay.
AgentResult normalize_trace_for_replay(AgentResult trace);

class Agent {
public:
    Agent(const GraphView& view, LlmGateway& gateway, AgentConfig config, DecodingParams decoding,
          std::string question, std::map<std::string, std::string> topic_entities);

    AgentResult run(const std::string& sample_id);

    // Step primitives, exposed for direct testing.
    Observation do_search(const std::vector<std::string>& entities, const std::string& thought);
    Observation do_generate(const std::string& thought);
    std::vector<std::string> filter_relations(const std::string& thought, const EntityId& entity,
                                              const std::vector<std::string>& relations);
    EntityId link_entity(const std::string& label);

    const AgentResult& partial_result() const { return result_; }

private:
    std::string display(const std::string& term) const;
    std::string verbalize_triple(const Triple& t) const;
    std::string render_observation(const Observation& obs) const;
    LlmExchange call(const std::string& template_name, std::map<std::string, std::string> slots);
    std::optional<EntityId> resolve_entity(const std::string& surface);
    std::optional<EntityId> select_candidate(const std::string& label);
    std::vector<std::string> relation_names_of(const EntityId& entity) const;
    std::vector<Triple> overlay_neighbors(const EntityId& entity,
                                          const std::vector<std::string>& relations) const;
    Observation rollback_search(const std::string& thought);
    void append_step(AgentStep step);
    std::string steps_block() const;
    bool is_cvt_answer(const std::string& answer) const;

    const GraphView& view_;
    LlmGateway& gateway_;
    AgentConfig config_;
    DecodingParams decoding_;

    std::optional<EntityId> label_lookup(const std::string& label) const;

    AgentResult result_;
    std::set<Triple> overlay_;                          // generated triples, linked ids
    std::map<std::string, std::string> minted_labels_;  // surrogate id -> label
    std::vector<std::pair<EntityId, std::vector<std::string>>> last_search_targets_;
    // Labels beyond the graph's own: topic entities and minted surrogates.
    std::map<std::string, std::vector<EntityId>> extra_label_index_;
};

}  // namespace graphqa
