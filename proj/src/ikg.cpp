#include "graphqa/ikg.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "graphqa/errors.hpp"
#include "graphqa/sparql.hpp"
#include "graphqa/text.hpp"

namespace graphqa {

std::mt19937_64 sample_rng(std::uint64_t dataset_seed, const std::string& sample_id) {
    char seed_bytes[8];
    for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>((dataset_seed >> (8 * i)) & 0xff);
    std::uint64_t h = fnv1a64(std::string_view(seed_bytes, 8));
    h = fnv1a64(sample_id, h);
    return std::mt19937_64(h);
}

std::vector<double> per_triple_draws(std::size_t count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> draws(count);
    for (auto& r : draws) r = 1.0 - uniform(rng);  // (0, 1]
    return draws;
}

std::vector<Triple> crucial_triples(const BenchmarkSample& sample, const KnowledgeGraph& graph) {
    QueryAst query = parse_query(sample.gold_query);
    GraphView full(graph);
    auto bindings = evaluate(query, full);
    return filter_property_triples(bindings_to_triples(query, bindings));
}

std::vector<Triple> select_drops(const std::vector<Triple>& crucial, const std::vector<double>& draws,
                                 double drop_prob) {
    std::vector<Triple> dropped;
    for (std::size_t i = 0; i < crucial.size(); ++i)
        if (draws[i] <= drop_prob) dropped.push_back(crucial[i]);
    return dropped;
}

std::vector<Triple> sample_drops(const std::vector<Triple>& crucial, double drop_prob,
                                 std::mt19937_64& rng) {
    return select_drops(crucial, per_triple_draws(crucial.size(), rng), drop_prob);
}

std::vector<Triple> expand_drops(const std::vector<Triple>& dropped, const KnowledgeGraph& graph) {
    std::set<Triple> drop_set(dropped.begin(), dropped.end());
    std::set<std::pair<std::string, std::string>> pairs;
    for (const Triple& t : dropped) {
        auto ends = std::minmax(t.head, t.tail);
        pairs.insert({ends.first, ends.second});
    }

    std::set<Triple> expanded;
    for (const auto& [a, b] : pairs) {
        auto connects = [&](const Triple& t) {
            auto ends = std::minmax(t.head, t.tail);
            return ends.first == a && ends.second == b;
        };
        for (auto slot : graph.out_slots(a)) {
            const Triple& t = graph.triple_at(slot);
            if (connects(t) && !drop_set.count(t)) expanded.insert(t);
        }
        for (auto slot : graph.in_slots(a)) {
            const Triple& t = graph.triple_at(slot);
            if (connects(t) && !drop_set.count(t)) expanded.insert(t);
        }
    }
    return {expanded.begin(), expanded.end()};
}

namespace {

bool any_topic_isolated(const BenchmarkSample& sample, const GraphView& view) {
    for (const auto& [id, label] : sample.topic_entities)
        if (view.degree(id) == 0) return true;
    return false;
}

std::size_t topic_neighbor_count(const BenchmarkSample& sample, const GraphView& view) {
    std::set<std::string> nodes;
    for (const auto& [id, label] : sample.topic_entities) {
        for (const Triple& t : view.out_of(id))
            if (t.tail != id) nodes.insert(t.tail);
        for (const Triple& t : view.in_of(id))
            if (t.head != id) nodes.insert(t.head);
    }
    return nodes.size();
}

}  // namespace

IkgBuild build_ikg(const std::vector<BenchmarkSample>& dataset, const KnowledgeGraph& graph,
                   double drop_prob, std::uint64_t seed) {
    IkgBuild build;
    IkgStats& stats = build.stats;

    std::vector<std::size_t> neighbor_counts;
    double total_removed = 0.0;

    std::vector<const BenchmarkSample*> ordered;
    for (const auto& s : dataset) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const BenchmarkSample* a, const BenchmarkSample* b) { return a->id < b->id; });

    for (const BenchmarkSample* sample : ordered) {
        std::vector<Triple> crucial;
        try {
            crucial = crucial_triples(*sample, graph);
        } catch (const UnsupportedFeature&) {
            ++stats.skipped_unparseable;
            continue;
        } catch (const ParseError&) {
            ++stats.skipped_unparseable;
            continue;
        }

        auto rng = sample_rng(seed, sample->id);
        DropList list;
        list.sample_id = sample->id;
        list.drop_prob = drop_prob;
        list.seed = seed;
        list.dropped = select_drops(crucial, per_triple_draws(crucial.size(), rng), drop_prob);
        list.expanded = expand_drops(list.dropped, graph);

        GraphView view(graph, list.removal_set());
        if (any_topic_isolated(*sample, view)) {
            ++stats.isolated_topic_samples;
            continue;
        }

        total_removed += static_cast<double>(list.dropped.size() + list.expanded.size());
        neighbor_counts.push_back(topic_neighbor_count(*sample, view));
        build.droplists.push_back(std::move(list));
    }

    stats.retained_samples = build.droplists.size();
    if (stats.retained_samples > 0) {
        stats.mean_dropped_per_question = total_removed / static_cast<double>(stats.retained_samples);
        std::sort(neighbor_counts.begin(), neighbor_counts.end());
        stats.median_topic_neighbor_count = neighbor_counts[(neighbor_counts.size() - 1) / 2];
    }
    return build;
}

IkgStats compute_stats(const std::vector<DropList>& droplists,
                       const std::vector<BenchmarkSample>& dataset, const KnowledgeGraph& graph) {
    IkgStats stats;
    std::map<std::string, const BenchmarkSample*> by_id;
    for (const auto& s : dataset) by_id[s.id] = &s;

    std::set<std::string> retained_ids;
    for (const auto& d : droplists) retained_ids.insert(d.sample_id);

    // Samples absent from the droplists either failed to parse or were
    // excluded as isolated.
    for (const auto& s : dataset) {
        if (retained_ids.count(s.id)) continue;
        try {
            crucial_triples(s, graph);
            ++stats.isolated_topic_samples;
        } catch (const Error&) {
            ++stats.skipped_unparseable;
        }
    }

    std::vector<std::size_t> neighbor_counts;
    double total_removed = 0.0;
    for (const auto& d : droplists) {
        auto it = by_id.find(d.sample_id);
        if (it == by_id.end()) throw ParseError("droplist for unknown sample '" + d.sample_id + "'");
        total_removed += static_cast<double>(d.dropped.size() + d.expanded.size());
        GraphView view(graph, d.removal_set());
        neighbor_counts.push_back(topic_neighbor_count(*it->second, view));
    }

    stats.retained_samples = droplists.size();
    if (!droplists.empty()) {
        stats.mean_dropped_per_question = total_removed / static_cast<double>(droplists.size());
        std::sort(neighbor_counts.begin(), neighbor_counts.end());
        stats.median_topic_neighbor_count = neighbor_counts[(neighbor_counts.size() - 1) / 2];
    }
    return stats;
}

}  // namespace graphqa
