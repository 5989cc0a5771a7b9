#pragma once
// Okapi BM25 over verbalized triples and entity labels. Scores use the
// non-negative idf variant max(0, ln((N - df + 0.5) / (df + 0.5))); ties
// break by corpus insertion order.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "graphqa/kg.hpp"

namespace graphqa {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Lowercase, split on non-alphanumeric ASCII (bytes >= 0x80 kept so UTF-8
// labels survive), empties dropped.
std::vector<std::string> tokenize(std::string_view text);

class Corpus {
public:
    void add(std::string doc_id, std::string_view text);

    std::size_t size() const { return docs_.size(); }
    const std::string& doc_id(std::size_t i) const { return docs_[i].id; }
    const std::vector<std::string>& doc_tokens(std::size_t i) const { return docs_[i].tokens; }
    std::size_t doc_frequency(const std::string& token) const;
    double average_length() const;

private:
    struct Doc {
        std::string id;
        std::vector<std::string> tokens;
    };
    std::vector<Doc> docs_;
    std::map<std::string, std::size_t> df_;
    std::size_t total_tokens_ = 0;
};

// `<head label>, <last relation segment with underscores as spaces>, <tail label>`;
// unlabeled ids pass through raw.
std::string verbalize(const Triple& t, const std::map<std::string, std::string>& labels);

struct RankedDoc {
    std::string doc_id;
    double score;
};

std::vector<RankedDoc> bm25_rank(std::string_view query, const Corpus& corpus, std::size_t k,
                                 const Bm25Params& params = {});

// Top-k labeled entities of the view's base graph ranked against `label`.
std::vector<std::pair<EntityId, std::string>> candidate_entities(std::string_view label,
                                                                 const GraphView& view, std::size_t k,
                                                                 const Bm25Params& params = {});

}  // namespace graphqa
