#include "graphqa/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "graphqa/errors.hpp"
#include "graphqa/text.hpp"

namespace graphqa {

bool is_machine_id(std::string_view id) {
    return starts_with(id, "m.") || starts_with(id, "g.");
}

namespace {

bool looks_like_number(std::string_view s) {
    if (s.empty()) return false;
    std::size_t i = 0;
    if (s[0] == '+' || s[0] == '-') i = 1;
    bool digits = false, dot = false, exponent = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c >= '0' && c <= '9') {
            digits = true;
        } else if (c == '.' && !dot && !exponent) {
            dot = true;
        } else if ((c == 'e' || c == 'E') && digits && !exponent && i + 1 < s.size()) {
            exponent = true;
            if (s[i + 1] == '+' || s[i + 1] == '-') ++i;
            digits = false;
        } else {
            return false;
        }
    }
    return digits;
}

bool looks_like_iso_date(std::string_view s) {
    // YYYY-MM-DD with an optional THH:MM:SS... suffix.
    if (s.size() < 10) return false;
    for (std::size_t i = 0; i < 10; ++i) {
        if (i == 4 || i == 7) {
            if (s[i] != '-') return false;
        } else if (s[i] < '0' || s[i] > '9') {
            return false;
        }
    }
    return s.size() == 10 || s[10] == 'T';
}

}  // namespace

bool is_literal_term(std::string_view term) {
    if (term.empty()) return false;
    if (term.front() == '"') return true;
    return looks_like_number(term) || looks_like_iso_date(term);
}

std::string literal_language(std::string_view term) {
    if (term.empty() || term.front() != '"') return "";
    auto close = term.rfind('"');
    if (close == 0 || close + 1 >= term.size()) return "";
    auto suffix = term.substr(close + 1);
    if (suffix.size() >= 2 && suffix[0] == '@') return std::string(suffix.substr(1));
    return "";
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples, std::map<std::string, std::string> labels)
    : triples_(std::move(triples)), labels_(std::move(labels)) {
    std::sort(triples_.begin(), triples_.end());
    triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
    for (std::uint32_t i = 0; i < triples_.size(); ++i) {
        out_index_[triples_[i].head].push_back(i);
        in_index_[triples_[i].tail].push_back(i);
    }
    for (const auto& [id, label] : labels_) label_index_[label].push_back(id);
}

const std::vector<EntityId>* KnowledgeGraph::ids_for_label(const std::string& label) const {
    auto it = label_index_.find(label);
    return it == label_index_.end() ? nullptr : &it->second;
}

std::string KnowledgeGraph::label_of(const EntityId& id) const {
    auto it = labels_.find(id);
    return it == labels_.end() ? std::string() : it->second;
}

std::span<const std::uint32_t> KnowledgeGraph::out_slots(const EntityId& id) const {
    auto it = out_index_.find(id);
    return it == out_index_.end() ? std::span<const std::uint32_t>() : std::span(it->second);
}

std::span<const std::uint32_t> KnowledgeGraph::in_slots(const EntityId& id) const {
    auto it = in_index_.find(id);
    return it == in_index_.end() ? std::span<const std::uint32_t>() : std::span(it->second);
}

bool KnowledgeGraph::contains(const Triple& t) const {
    return std::binary_search(triples_.begin(), triples_.end(), t);
}

KnowledgeGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open graph file: " + path.string());

    std::vector<Triple> triples;
    std::map<std::string, std::string> labels;
    std::string line;
    std::size_t lineno = 0;

    auto fail = [&](const std::string& why) {
        throw ParseError(path.filename().string() + ":" + std::to_string(lineno) + ": " + why);
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;

        auto fields = split(line, '\t');
        if (fields.size() != 3) fail("expected 3 tab-separated fields, got " + std::to_string(fields.size()));

        if (fields[0] == "@label") {
            if (fields[1].empty()) fail("label line with empty id");
            if (fields[2].empty()) fail("label line with empty label");
            auto [it, inserted] = labels.emplace(fields[1], fields[2]);
            if (!inserted && it->second != fields[2])
                fail("conflicting label for '" + fields[1] + "': '" + it->second + "' vs '" + fields[2] + "'");
            continue;
        }

        if (fields[0].empty()) fail("empty head");
        if (fields[2].empty()) fail("empty tail");
        if (fields[1].empty() || fields[1].find_first_of(" \t") != std::string::npos)
            fail("relation must be non-empty without whitespace: '" + fields[1] + "'");

        triples.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2])});
    }

    return KnowledgeGraph(std::move(triples), std::move(labels));
}

GraphView::GraphView(const KnowledgeGraph& base) : base_(&base) {}

GraphView::GraphView(const KnowledgeGraph& base, std::vector<Triple> removed) : base_(&base) {
    std::sort(removed.begin(), removed.end());
    removed.erase(std::unique(removed.begin(), removed.end()), removed.end());
    removed_.reserve(removed.size());
    for (auto& t : removed)
        if (base_->contains(t)) removed_.push_back(std::move(t));
}

bool GraphView::is_removed(const Triple& t) const {
    return std::binary_search(removed_.begin(), removed_.end(), t);
}

bool GraphView::contains(const Triple& t) const {
    return base_->contains(t) && !is_removed(t);
}

std::vector<RelationRef> GraphView::relations_of(const EntityId& id) const {
    std::set<RelationRef> refs;
    for (auto slot : base_->out_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t)) refs.insert({t.relation, Direction::Out});
    }
    for (auto slot : base_->in_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t)) refs.insert({t.relation, Direction::In});
    }
    return {refs.begin(), refs.end()};
}

std::vector<Triple> GraphView::neighbors(const EntityId& id, const std::vector<std::string>& relations) const {
    std::set<Triple> out;
    auto wanted = [&](const std::string& r) {
        return std::find(relations.begin(), relations.end(), r) != relations.end();
    };
    for (auto slot : base_->out_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t) && wanted(t.relation)) out.insert(t);
    }
    for (auto slot : base_->in_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t) && wanted(t.relation)) out.insert(t);
    }
    return {out.begin(), out.end()};
}

std::size_t GraphView::degree(const EntityId& id) const {
    std::size_t n = 0;
    for (auto slot : base_->out_slots(id))
        if (!is_removed(base_->triple_at(slot))) ++n;
    for (auto slot : base_->in_slots(id))
        if (!is_removed(base_->triple_at(slot))) ++n;
    return n;
}

std::size_t GraphView::neighbor_node_count(const EntityId& id) const {
    std::set<std::string> nodes;
    for (auto slot : base_->out_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t) && t.tail != id) nodes.insert(t.tail);
    }
    for (auto slot : base_->in_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t) && t.head != id) nodes.insert(t.head);
    }
    return nodes.size();
}

bool GraphView::is_cvt(const EntityId& id) const {
    return is_machine_id(id) && base_->label_of(id).empty();
}

std::vector<Triple> GraphView::out_of(const EntityId& id) const {
    std::vector<Triple> out;
    for (auto slot : base_->out_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t)) out.push_back(t);
    }
    return out;
}

std::vector<Triple> GraphView::in_of(const EntityId& id) const {
    std::vector<Triple> out;
    for (auto slot : base_->in_slots(id)) {
        const Triple& t = base_->triple_at(slot);
        if (!is_removed(t)) out.push_back(t);
    }
    return out;
}

std::vector<Triple> GraphView::triples() const {
    std::vector<Triple> out;
    out.reserve(base_->size() - removed_.size());
    for (const Triple& t : base_->triples())
        if (!is_removed(t)) out.push_back(t);
    return out;
}

}  // namespace graphqa
