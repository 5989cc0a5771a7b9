#pragma once
// Parser and evaluator for the SPARQL subset used by WebQSP/CWQ gold queries:
// PREFIX declarations, SELECT DISTINCT of a single variable, basic graph
// patterns, FILTER(?a != ?b) and the non-literal-or-English lang filter.
// Anything else raises UnsupportedFeature naming the construct.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "graphqa/kg.hpp"

namespace graphqa {

struct PatternTerm {
    bool is_var = false;
    std::string text;  // variable name without '?', or the constant (prefix stripped)

    friend auto operator<=>(const PatternTerm&, const PatternTerm&) = default;
};

struct TriplePattern {
    PatternTerm subject, predicate, object;
    friend auto operator<=>(const TriplePattern&, const TriplePattern&) = default;
};

struct QueryFilter {
    enum class Kind { NotEqual, NonLiteralOrEnglish };
    Kind kind = Kind::NotEqual;
    PatternTerm lhs;  // always a variable
    PatternTerm rhs;  // NotEqual only: variable or constant
    friend auto operator<=>(const QueryFilter&, const QueryFilter&) = default;
};

struct QueryAst {
    std::map<std::string, std::string> prefixes;
    std::string select_var;
    bool distinct = false;
    std::vector<TriplePattern> patterns;
    std::vector<QueryFilter> filters;

    // Canonical text; parse_query(to_string()) reproduces this AST.
    std::string to_string() const;

    friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

QueryAst parse_query(std::string_view text);

// Total variable assignment; map ordering gives the lexicographic order the
// evaluator sorts by.
using Binding = std::map<std::string, std::string>;

// All assignments satisfying every pattern and filter, deduplicated, sorted.
std::vector<Binding> evaluate(const QueryAst& query, const GraphView& view);

// Patterns instantiated under each binding, deduplicated, first-occurrence order.
std::vector<Triple> bindings_to_triples(const QueryAst& query, const std::vector<Binding>& bindings);

// Drops triples whose tail is a literal (property nodes), keeps order.
std::vector<Triple> filter_property_triples(const std::vector<Triple>& triples);

}  // namespace graphqa
