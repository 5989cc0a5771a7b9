#pragma once
// Incomplete-KG benchmark construction: instantiate each sample's gold query
// to get its crucial triples, Bernoulli-drop them, expand the drops to every
// co-endpoint relation, and exclude samples whose topic entity ends up
// isolated. Per-sample randomness is keyed on (dataset seed, sample id) so
// builds are order- and parallelism-independent, and the per-triple draw is
// taken once so drop sets nest across probability levels.

#include <cstdint>
#include <random>
#include <vector>

#include "graphqa/dataset.hpp"
#include "graphqa/kg.hpp"

namespace graphqa {

struct IkgStats {
    double mean_dropped_per_question = 0.0;  // |dropped| + |expanded| over retained samples
    std::size_t median_topic_neighbor_count = 0;
    std::size_t isolated_topic_samples = 0;
    std::size_t skipped_unparseable = 0;
    std::size_t retained_samples = 0;

    friend bool operator==(const IkgStats&, const IkgStats&) = default;
};

// Deterministic per-sample stream; independent of sample order in the file.
std::mt19937_64 sample_rng(std::uint64_t dataset_seed, const std::string& sample_id);

// One r in (0, 1] per crucial triple, in order. "r <= p" decides the drop, so
// p=0 never drops and p=1 always does.
std::vector<double> per_triple_draws(std::size_t count, std::mt19937_64& rng);

// Gold-query instantiation with property tails filtered out.  Propagates
// ParseError / UnsupportedFeature for queries outside the subset.
std::vector<Triple> crucial_triples(const BenchmarkSample& sample, const KnowledgeGraph& graph);

std::vector<Triple> select_drops(const std::vector<Triple>& crucial, const std::vector<double>& draws,
                                 double drop_prob);

std::vector<Triple> sample_drops(const std::vector<Triple>& crucial, double drop_prob,
                                 std::mt19937_64& rng);

// Every other triple of `graph` connecting the unordered endpoint pair of a
// dropped triple (any relation, either direction), minus the drops themselves.
std::vector<Triple> expand_drops(const std::vector<Triple>& dropped, const KnowledgeGraph& graph);

struct IkgBuild {
    std::vector<DropList> droplists;  // retained samples only, ordered by sample id
    IkgStats stats;
};

IkgBuild build_ikg(const std::vector<BenchmarkSample>& dataset, const KnowledgeGraph& graph,
                   double drop_prob, std::uint64_t seed);

IkgStats compute_stats(const std::vector<DropList>& droplists,
                       const std::vector<BenchmarkSample>& dataset, const KnowledgeGraph& graph);

}  // namespace graphqa
