#pragma once
// JSONL record formats shared by the builder, the runner and the CLI.
//
// Dataset record:
//   {"id":..., "question":..., "topic_entities":{id:label,...},
//    "answers":[{"id":...,"label":...,"aliases":[...]},...], "gold_query":...}
// DropList record:
//   {"sample_id":..., "drop_prob":..., "seed":..., "dropped":[[h,r,t],...],
//    "expanded":[[h,r,t],...]}

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "graphqa/kg.hpp"

namespace graphqa {

struct GoldAnswer {
    std::string id;  // entity id or literal
    std::string label;
    std::vector<std::string> aliases;

    friend bool operator==(const GoldAnswer&, const GoldAnswer&) = default;
};

struct BenchmarkSample {
    std::string id;
    std::string question;
    std::map<EntityId, std::string> topic_entities;
    std::vector<GoldAnswer> answers;
    std::string gold_query;

    friend bool operator==(const BenchmarkSample&, const BenchmarkSample&) = default;
};

struct DropList {
    std::string sample_id;
    double drop_prob = 0.0;
    std::uint64_t seed = 0;
    std::vector<Triple> dropped;   // crucial triples selected by the Bernoulli pass
    std::vector<Triple> expanded;  // co-endpoint relations removed alongside them

    // Everything the sample's view must hide.
    std::vector<Triple> removal_set() const;

    friend bool operator==(const DropList&, const DropList&) = default;
};

std::vector<BenchmarkSample> load_dataset(const std::filesystem::path& path);

// Droplist files open with a {"header": {...}} line embedding the seed and a
// digest of the build inputs; the loader skips it.
std::vector<DropList> load_droplists(const std::filesystem::path& path);
void save_droplists(const std::filesystem::path& path, const std::vector<DropList>& lists,
                    const std::string& config_digest = "", std::uint64_t seed = 0);
std::string droplist_to_json_line(const DropList& list);

}  // namespace graphqa
