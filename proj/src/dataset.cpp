#include "graphqa/dataset.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "graphqa/errors.hpp"

namespace graphqa {

using nlohmann::json;

namespace {

json triple_to_json(const Triple& t) {
    return json::array({t.head, t.relation, t.tail});
}

Triple triple_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3)
        throw ParseError("triple must be a 3-element array, got: " + j.dump());
    return Triple{j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::vector<json> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            records.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace

std::vector<Triple> DropList::removal_set() const {
    std::vector<Triple> all = dropped;
    all.insert(all.end(), expanded.begin(), expanded.end());
    return all;
}

std::vector<BenchmarkSample> load_dataset(const std::filesystem::path& path) {
    std::vector<BenchmarkSample> samples;
    std::set<std::string> ids;
    std::size_t record_no = 0;
    for (const auto& j : read_jsonl(path)) {
        ++record_no;
        auto fail = [&](const std::string& why) {
            throw ParseError(path.filename().string() + ": record " + std::to_string(record_no) + ": " + why);
        };
        try {
            BenchmarkSample s;
            s.id = j.at("id").get<std::string>();
            s.question = j.at("question").get<std::string>();
            for (const auto& [id, label] : j.at("topic_entities").items())
                s.topic_entities[id] = label.get<std::string>();
            for (const auto& a : j.at("answers")) {
                GoldAnswer g;
                g.id = a.value("id", "");
                g.label = a.at("label").get<std::string>();
                if (a.contains("aliases"))
                    for (const auto& alias : a.at("aliases")) g.aliases.push_back(alias.get<std::string>());
                s.answers.push_back(std::move(g));
            }
            s.gold_query = j.value("gold_query", "");

            if (s.id.empty()) fail("empty id");
            if (s.topic_entities.empty()) fail("sample needs at least one topic entity");
            if (s.answers.empty()) fail("sample needs at least one answer");
            if (!ids.insert(s.id).second) fail("duplicate sample id '" + s.id + "'");
            samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            fail(e.what());
        }
    }
    return samples;
}

std::string droplist_to_json_line(const DropList& list) {
    json j;
    j["sample_id"] = list.sample_id;
    j["drop_prob"] = list.drop_prob;
    j["seed"] = list.seed;
    j["dropped"] = json::array();
    for (const auto& t : list.dropped) j["dropped"].push_back(triple_to_json(t));
    j["expanded"] = json::array();
    for (const auto& t : list.expanded) j["expanded"].push_back(triple_to_json(t));
    return j.dump();
}

void save_droplists(const std::filesystem::path& path, const std::vector<DropList>& lists,
                    const std::string& config_digest, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path.string());
    json header;
    header["header"] = json{{"config_digest", config_digest}, {"seed", seed}};
    out << header.dump() << "\n";
    for (const auto& list : lists) out << droplist_to_json_line(list) << "\n";
}

std::vector<DropList> load_droplists(const std::filesystem::path& path) {
    std::vector<DropList> lists;
    for (const auto& j : read_jsonl(path)) {
        if (j.contains("header")) continue;
        try {
            DropList d;
            d.sample_id = j.at("sample_id").get<std::string>();
            d.drop_prob = j.at("drop_prob").get<double>();
            d.seed = j.at("seed").get<std::uint64_t>();
            for (const auto& t : j.at("dropped")) d.dropped.push_back(triple_from_json(t));
            for (const auto& t : j.at("expanded")) d.expanded.push_back(triple_from_json(t));
            lists.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw ParseError(path.filename().string() + ": " + e.what());
        }
    }
    return lists;
}

}  // namespace graphqa
