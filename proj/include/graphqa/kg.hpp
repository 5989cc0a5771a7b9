#pragma once
// In-memory triple store with bidirectional adjacency indices, plus GraphView,
// a read-only overlay that hides a removal set without copying the base graph.
//
// Graph file format (UTF-8, tab-separated):
//   head \t relation \t tail
//   @label \t <id> \t <display label>
//   # comment
//
// Entities whose id begins with "m." or "g." are machine identifiers; an
// unlabeled machine id is treated as a CVT node.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace graphqa {

using EntityId = std::string;

bool is_machine_id(std::string_view id);

// Literal = double-quoted string (optionally "..."@lang), number, or ISO date.
bool is_literal_term(std::string_view term);

// Language tag of a quoted literal ("" when untagged or not a literal).
std::string literal_language(std::string_view term);

enum class Direction { Out, In };

struct Triple {
    std::string head;
    std::string relation;
    std::string tail;

    bool tail_is_literal() const { return is_literal_term(tail); }
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct RelationRef {
    std::string relation;
    Direction direction;
    friend auto operator<=>(const RelationRef&, const RelationRef&) = default;
};

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;
    KnowledgeGraph(std::vector<Triple> triples, std::map<std::string, std::string> labels);

    // Triples sorted by (head, relation, tail), deduplicated.
    const std::vector<Triple>& triples() const { return triples_; }
    const std::map<std::string, std::string>& labels() const { return labels_; }

    std::string label_of(const EntityId& id) const;
    bool has_label(const EntityId& id) const { return labels_.count(id) != 0; }

    // Ids carrying this exact label, sorted; null when none.
    const std::vector<EntityId>* ids_for_label(const std::string& label) const;

    std::span<const std::uint32_t> out_slots(const EntityId& id) const;
    std::span<const std::uint32_t> in_slots(const EntityId& id) const;
    const Triple& triple_at(std::uint32_t slot) const { return triples_[slot]; }

    bool contains(const Triple& t) const;
    std::size_t size() const { return triples_.size(); }

private:
    std::vector<Triple> triples_;
    std::map<std::string, std::string> labels_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> out_index_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> in_index_;
    std::unordered_map<std::string, std::vector<EntityId>> label_index_;
};

KnowledgeGraph load_graph(const std::filesystem::path& path);

// Read-only view of a KnowledgeGraph with a removal set applied. All reads
// behave as if the removed triples never existed. The base graph must outlive
// the view.
class GraphView {
public:
    explicit GraphView(const KnowledgeGraph& base);
    GraphView(const KnowledgeGraph& base, std::vector<Triple> removed);

    const KnowledgeGraph& base() const { return *base_; }
    const std::vector<Triple>& removed() const { return removed_; }

    bool contains(const Triple& t) const;
    bool is_removed(const Triple& t) const;

    // Distinct (relation, direction) pairs incident to `id`, sorted.
    std::vector<RelationRef> relations_of(const EntityId& id) const;

    // Incident triples (both directions) whose relation is in `relations`,
    // sorted by (head, relation, tail).
    std::vector<Triple> neighbors(const EntityId& id, const std::vector<std::string>& relations) const;

    // Incident triple count, |out| + |in| (a self-loop counts twice).
    std::size_t degree(const EntityId& id) const;

    // Distinct adjacent terms, excluding `id` itself.
    std::size_t neighbor_node_count(const EntityId& id) const;

    bool is_cvt(const EntityId& id) const;

    std::vector<Triple> out_of(const EntityId& id) const;
    std::vector<Triple> in_of(const EntityId& id) const;

    // Materialized view triples, sorted.
    std::vector<Triple> triples() const;

    std::string label_of(const EntityId& id) const { return base_->label_of(id); }

private:
    const KnowledgeGraph* base_;
    std::vector<Triple> removed_;  // sorted; subset of base triples
};

}  // namespace graphqa
