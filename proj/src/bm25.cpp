#include "graphqa/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "graphqa/text.hpp"

namespace graphqa {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    static_cast<unsigned char>(c) >= 0x80;
        if (c >= 'A' && c <= 'Z') {
            current += static_cast<char>(c - 'A' + 'a');
        } else if (keep) {
            current += c;
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

void Corpus::add(std::string doc_id, std::string_view text) {
    Doc doc{std::move(doc_id), tokenize(text)};
    std::set<std::string> unique(doc.tokens.begin(), doc.tokens.end());
    for (const auto& tok : unique) df_[tok] += 1;
    total_tokens_ += doc.tokens.size();
    docs_.push_back(std::move(doc));
}

std::size_t Corpus::doc_frequency(const std::string& token) const {
    auto it = df_.find(token);
    return it == df_.end() ? 0 : it->second;
}

double Corpus::average_length() const {
    return docs_.empty() ? 0.0 : static_cast<double>(total_tokens_) / static_cast<double>(docs_.size());
}

std::string verbalize(const Triple& t, const std::map<std::string, std::string>& labels) {
    auto name = [&](const std::string& id) {
        auto it = labels.find(id);
        return it == labels.end() || it->second.empty() ? id : it->second;
    };
    std::string relation = t.relation;
    if (auto dot = relation.find_last_of('.'); dot != std::string::npos)
        relation = relation.substr(dot + 1);
    std::replace(relation.begin(), relation.end(), '_', ' ');
    return name(t.head) + ", " + relation + ", " + name(t.tail);
}

std::vector<RankedDoc> bm25_rank(std::string_view query, const Corpus& corpus, std::size_t k,
                                 const Bm25Params& params) {
    if (k == 0 || corpus.size() == 0) return {};

    const auto n_docs = static_cast<double>(corpus.size());
    const double avgdl = corpus.average_length();

    // Postings on the fly: term -> (doc, tf). The corpus is small enough that
    // building them per query is cheaper than keeping a second index in sync.
    std::vector<double> scores(corpus.size(), 0.0);
    for (const auto& term : tokenize(query)) {
        auto df = static_cast<double>(corpus.doc_frequency(term));
        if (df == 0) continue;
        double idf = std::max(0.0, std::log((n_docs - df + 0.5) / (df + 0.5)));
        for (std::size_t d = 0; d < corpus.size(); ++d) {
            const auto& tokens = corpus.doc_tokens(d);
            auto tf = static_cast<double>(std::count(tokens.begin(), tokens.end(), term));
            if (tf == 0.0) continue;
            double dl = static_cast<double>(tokens.size());
            double norm = params.k1 * (1.0 - params.b + params.b * (avgdl > 0.0 ? dl / avgdl : 0.0));
            scores[d] += idf * (tf * (params.k1 + 1.0)) / (tf + norm);
        }
    }

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RankedDoc> out;
    for (std::size_t i = 0; i < order.size() && i < k; ++i)
        out.push_back({corpus.doc_id(order[i]), scores[order[i]]});
    return out;
}

std::vector<std::pair<EntityId, std::string>> candidate_entities(std::string_view label,
                                                                 const GraphView& view, std::size_t k,
                                                                 const Bm25Params& params) {
    Corpus corpus;
    for (const auto& [id, text] : view.base().labels()) corpus.add(id, text);

    // Keep only candidates sharing a token with the query (the idf variant can
    // zero out scores for common tokens, so score > 0 is too strict a test),
    // and rank exact label matches first regardless of score.
    std::set<std::string> query_tokens;
    for (auto& tok : tokenize(label)) query_tokens.insert(std::move(tok));
    std::map<std::string, std::size_t> doc_index;
    for (std::size_t i = 0; i < corpus.size(); ++i) doc_index[corpus.doc_id(i)] = i;

    std::vector<std::pair<EntityId, std::string>> exact, rest;
    for (const auto& ranked : bm25_rank(label, corpus, corpus.size(), params)) {
        const auto& tokens = corpus.doc_tokens(doc_index[ranked.doc_id]);
        bool overlaps = std::any_of(tokens.begin(), tokens.end(),
                                    [&](const std::string& t) { return query_tokens.count(t); });
        if (!overlaps) continue;
        auto entity_label = view.base().label_of(ranked.doc_id);
        auto& bucket = to_lower(entity_label) == to_lower(label) ? exact : rest;
        bucket.emplace_back(ranked.doc_id, std::move(entity_label));
    }
    std::vector<std::pair<EntityId, std::string>> out = std::move(exact);
    for (auto& candidate : rest) {
        if (out.size() >= k) break;
        out.push_back(std::move(candidate));
    }
    if (out.size() > k) out.resize(k);
    return out;
}

}  // namespace graphqa
