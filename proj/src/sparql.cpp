#include "graphqa/sparql.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>

#include "graphqa/errors.hpp"
#include "graphqa/text.hpp"

namespace graphqa {

namespace {

// ---------------------------------------------------------------- lexer ----

enum class Tok {
    Keyword,   // normalized lowercase: prefix select distinct where filter or ...
    Var,       // ?x / $x, text without the sigil
    Pname,     // prefix:local, possibly with empty local ("ns:")
    Iri,       // <...>
    Literal,   // canonicalized "..."(@lang)?
    Word,      // bare constant or number
    Punct,     // single char: { } ( ) . , ; ! = / | ^ + *
    NotEqualOp,
    End,
};

struct Token {
    Tok kind;
    std::string text;    // keyword name, var name, word, punct char
    std::string prefix;  // Pname only
    std::size_t line = 1, col = 1;
};

const std::set<std::string> kKeywords = {
    "prefix", "select", "distinct", "where", "filter", "or", "and",
    "isliteral", "lang", "langmatches",
};

// Constructs outside the subset, rejected by name.
const std::set<std::string> kUnsupported = {
    "optional", "union", "order", "group", "limit", "offset", "minus",
    "values", "bind", "service", "exists", "having", "describe", "construct",
    "ask", "from", "reduced", "count", "sum", "avg", "min", "max",
};

bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '+' || static_cast<unsigned char>(c) >= 0x80;
}

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }

    Token next() {
        Token t = current_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const Token& at, const std::string& why) const {
        throw ParseError("query:" + std::to_string(at.line) + ":" + std::to_string(at.col) + ": " + why);
    }

private:
    void skip_space_and_comments() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '\n') {
                ++line_;
                col_ = 1;
                ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r') {
                ++col_;
                ++pos_;
            } else if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    char take() {
        char c = text_[pos_++];
        ++col_;
        return c;
    }

    void advance() {
        skip_space_and_comments();
        current_ = Token{Tok::End, "", "", line_, col_};
        if (pos_ >= text_.size()) return;

        Token t;
        t.line = line_;
        t.col = col_;
        char c = text_[pos_];

        if (c == '?' || c == '$') {
            take();
            std::string name;
            while (pos_ < text_.size() && is_word_char(text_[pos_]) && text_[pos_] != '-' && text_[pos_] != '+')
                name += take();
            if (name.empty()) fail(t, "empty variable name");
            t.kind = Tok::Var;
            t.text = std::move(name);
        } else if (c == '<') {
            take();
            std::string iri;
            while (pos_ < text_.size() && text_[pos_] != '>') iri += take();
            if (pos_ >= text_.size()) fail(t, "unterminated IRI");
            take();
            t.kind = Tok::Iri;
            t.text = std::move(iri);
        } else if (c == '"' || c == '\'') {
            char quote = take();
            std::string value;
            while (pos_ < text_.size() && text_[pos_] != quote) {
                char d = take();
                if (d == '\\' && pos_ < text_.size()) value += take();
                else value += d;
            }
            if (pos_ >= text_.size()) fail(t, "unterminated string literal");
            take();
            std::string lang;
            if (pos_ < text_.size() && text_[pos_] == '@') {
                take();
                while (pos_ < text_.size() && is_word_char(text_[pos_])) lang += take();
            }
            t.kind = Tok::Literal;
            t.text = "\"" + value + "\"" + (lang.empty() ? "" : "@" + lang);
        } else if (c == '!' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '=') {
            take();
            take();
            t.kind = Tok::NotEqualOp;
            t.text = "!=";
        } else if (std::string_view("{}().,;!=/|^*").find(c) != std::string_view::npos) {
            t.kind = Tok::Punct;
            t.text = std::string(1, take());
        } else if (is_word_char(c) || c == '.') {
            // Bare word, prefixed name, or number. A '.' is consumed only when
            // followed by another word character, so a trailing pattern dot
            // stays a separate token.
            std::string word;
            while (pos_ < text_.size()) {
                char d = text_[pos_];
                if (is_word_char(d)) {
                    word += take();
                } else if (d == '.' && pos_ + 1 < text_.size() && is_word_char(text_[pos_ + 1])) {
                    word += take();
                } else {
                    break;
                }
            }
            if (word.empty()) {  // lone '.'
                t.kind = Tok::Punct;
                t.text = std::string(1, take());
            } else if (pos_ < text_.size() && text_[pos_] == ':') {
                take();
                std::string local;
                while (pos_ < text_.size()) {
                    char d = text_[pos_];
                    if (is_word_char(d)) {
                        local += take();
                    } else if (d == '.' && pos_ + 1 < text_.size() && is_word_char(text_[pos_ + 1])) {
                        local += take();
                    } else {
                        break;
                    }
                }
                t.kind = Tok::Pname;
                t.prefix = std::move(word);
                t.text = std::move(local);
            } else {
                std::string lowered = to_lower(word);
                if (kUnsupported.count(lowered)) {
                    // Report compound keywords the way people know them.
                    std::string name = lowered == "order" ? "ORDER BY" : lowered == "group" ? "GROUP BY" : word;
                    std::transform(name.begin(), name.end(), name.begin(), ::toupper);
                    throw UnsupportedFeature(name);
                }
                if (kKeywords.count(lowered)) {
                    t.kind = Tok::Keyword;
                    t.text = std::move(lowered);
                } else {
                    t.kind = Tok::Word;
                    t.text = std::move(word);
                }
            }
        } else {
            fail(t, std::string("unexpected character '") + c + "'");
        }
        current_ = std::move(t);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1, col_ = 1;
    Token current_;
};

// --------------------------------------------------------------- parser ----

class Parser {
public:
    explicit Parser(std::string_view text) : lex_(text) {}

    QueryAst parse() {
        while (at_keyword("prefix")) prefix_decl();
        expect_keyword("select");
        if (at_keyword("distinct")) {
            lex_.next();
            ast_.distinct = true;
        }
        select_var();
        expect_keyword("where");
        expect_punct("{");
        while (!at_punct("}")) {
            if (lex_.peek().kind == Tok::End) lex_.fail(lex_.peek(), "unterminated WHERE block");
            if (at_keyword("filter")) {
                lex_.next();
                filter();
            } else {
                pattern();
            }
        }
        lex_.next();  // '}'
        if (lex_.peek().kind != Tok::End) lex_.fail(lex_.peek(), "trailing content after query");
        validate();
        return std::move(ast_);
    }

private:
    bool at_keyword(std::string_view k) const {
        return lex_.peek().kind == Tok::Keyword && lex_.peek().text == k;
    }
    bool at_punct(std::string_view p) const {
        return lex_.peek().kind == Tok::Punct && lex_.peek().text == p;
    }
    void expect_keyword(const std::string& k) {
        if (!at_keyword(k)) lex_.fail(lex_.peek(), "expected " + k);
        lex_.next();
    }
    void expect_punct(const std::string& p) {
        if (!at_punct(p)) lex_.fail(lex_.peek(), "expected '" + p + "'");
        lex_.next();
    }

    void prefix_decl() {
        lex_.next();
        Token name = lex_.next();
        if (name.kind != Tok::Pname || !name.text.empty())
            lex_.fail(name, "expected prefix name like 'ns:'");
        Token iri = lex_.next();
        if (iri.kind != Tok::Iri) lex_.fail(iri, "expected IRI after prefix name");
        ast_.prefixes[name.prefix] = iri.text;
    }

    void select_var() {
        Token t = lex_.next();
        if (t.kind == Tok::Punct && t.text == "*") throw UnsupportedFeature("SELECT *");
        if (t.kind != Tok::Var) lex_.fail(t, "expected a single select variable");
        ast_.select_var = t.text;
        if (lex_.peek().kind == Tok::Var) throw UnsupportedFeature("multiple select variables");
    }

    PatternTerm term() {
        Token t = lex_.next();
        switch (t.kind) {
            case Tok::Var:
                return {true, t.text};
            case Tok::Pname: {
                if (!ast_.prefixes.count(t.prefix))
                    lex_.fail(t, "undeclared prefix '" + t.prefix + ":'");
                if (t.text.empty()) lex_.fail(t, "prefixed name with empty local part");
                return {false, t.text};  // resolve ns:x -> bare x
            }
            case Tok::Iri: {
                auto cut = t.text.find_last_of("/#");
                return {false, cut == std::string::npos ? t.text : t.text.substr(cut + 1)};
            }
            case Tok::Literal:
            case Tok::Word:
                return {false, t.text};
            case Tok::Punct:
                if (t.text == "/" || t.text == "|" || t.text == "^" || t.text == "*" || t.text == "+")
                    throw UnsupportedFeature("property path");
                if (t.text == ";") throw UnsupportedFeature("predicate list ';'");
                if (t.text == ",") throw UnsupportedFeature("object list ','");
                [[fallthrough]];
            default:
                lex_.fail(t, "expected a term, got '" + t.text + "'");
        }
    }

    void pattern() {
        TriplePattern p;
        p.subject = term();
        p.predicate = term();
        // Property paths show up as punctuation right after the predicate.
        if (at_punct("/") || at_punct("|") || at_punct("^") || at_punct("*") || at_punct("+"))
            throw UnsupportedFeature("property path");
        p.object = term();
        if (at_punct(";")) throw UnsupportedFeature("predicate list ';'");
        if (at_punct(",")) throw UnsupportedFeature("object list ','");
        if (at_punct(".")) lex_.next();
        ast_.patterns.push_back(std::move(p));
    }

    void filter() {
        expect_punct("(");
        if (at_punct("!")) {
            non_literal_or_english();
        } else {
            PatternTerm lhs = term();
            if (!lhs.is_var) throw UnsupportedFeature("FILTER on non-variable");
            Token op = lex_.next();
            if (op.kind != Tok::NotEqualOp) throw UnsupportedFeature("FILTER operator '" + op.text + "'");
            PatternTerm rhs = term();
            ast_.filters.push_back({QueryFilter::Kind::NotEqual, std::move(lhs), std::move(rhs)});
        }
        expect_punct(")");
    }

    // !isLiteral(?x) OR lang(?x) = '' OR langMatches(lang(?x), 'en')
    void non_literal_or_english() {
        expect_punct("!");
        expect_keyword("isliteral");
        expect_punct("(");
        Token v = lex_.next();
        if (v.kind != Tok::Var) lex_.fail(v, "expected variable in isLiteral()");
        std::string var = v.text;
        expect_punct(")");

        expect_keyword("or");
        expect_keyword("lang");
        expect_punct("(");
        same_var(var);
        expect_punct(")");
        expect_punct("=");
        Token empty = lex_.next();
        if (empty.kind != Tok::Literal || empty.text != "\"\"")
            lex_.fail(empty, "expected empty string in lang() = ''");

        expect_keyword("or");
        expect_keyword("langmatches");
        expect_punct("(");
        expect_keyword("lang");
        expect_punct("(");
        same_var(var);
        expect_punct(")");
        expect_punct(",");
        Token en = lex_.next();
        if (en.kind != Tok::Literal || to_lower(en.text) != "\"en\"")
            lex_.fail(en, "expected 'en' in langMatches");
        expect_punct(")");

        ast_.filters.push_back({QueryFilter::Kind::NonLiteralOrEnglish, {true, var}, {}});
    }

    void same_var(const std::string& var) {
        Token v = lex_.next();
        if (v.kind != Tok::Var || v.text != var)
            lex_.fail(v, "lang filter must reference ?" + var);
    }

    void validate() const {
        if (ast_.patterns.empty())
            throw ParseError("query has no triple patterns");
        auto in_pattern = [&](const std::string& var) {
            for (const auto& p : ast_.patterns)
                for (const auto* t : {&p.subject, &p.predicate, &p.object})
                    if (t->is_var && t->text == var) return true;
            return false;
        };
        if (!in_pattern(ast_.select_var))
            throw ParseError("select variable ?" + ast_.select_var + " does not appear in any pattern");
        for (const auto& f : ast_.filters) {
            for (const auto* t : {&f.lhs, &f.rhs})
                if (t->is_var && !t->text.empty() && !in_pattern(t->text))
                    throw ParseError("filter variable ?" + t->text + " does not appear in any pattern");
        }
    }

    Lexer lex_;
    QueryAst ast_;
};

std::string term_text(const PatternTerm& t) {
    return t.is_var ? "?" + t.text : t.text;
}

// ------------------------------------------------------------ evaluator ----

struct EvalContext {
    const QueryAst& query;
    const GraphView& view;
    std::set<Binding> results;

    std::optional<std::string> resolve(const PatternTerm& t, const Binding& b) const {
        if (!t.is_var) return t.text;
        auto it = b.find(t.text);
        if (it == b.end()) return std::nullopt;
        return it->second;
    }

    bool unify(const PatternTerm& t, const std::string& value, Binding& b) const {
        if (!t.is_var) return t.text == value;
        auto [it, inserted] = b.emplace(t.text, value);
        return inserted || it->second == value;
    }

    bool filters_pass(const Binding& b) const {
        for (const auto& f : query.filters) {
            if (f.kind == QueryFilter::Kind::NotEqual) {
                auto lhs = resolve(f.lhs, b);
                auto rhs = resolve(f.rhs, b);
                if (!lhs || !rhs || *lhs == *rhs) return false;
            } else {
                auto val = resolve(f.lhs, b);
                if (!val) return false;
                if (is_literal_term(*val)) {
                    auto lang = literal_language(*val);
                    if (!lang.empty() && to_lower(lang) != "en") return false;
                }
            }
        }
        return true;
    }

    void search(std::size_t pattern_index, const Binding& binding) {
        if (pattern_index == query.patterns.size()) {
            if (filters_pass(binding)) results.insert(binding);
            return;
        }
        const TriplePattern& p = query.patterns[pattern_index];
        Binding base = binding;

        auto try_triple = [&](const Triple& t) {
            Binding b = base;
            if (unify(p.subject, t.head, b) && unify(p.predicate, t.relation, b) && unify(p.object, t.tail, b))
                search(pattern_index + 1, b);
        };

        if (auto s = resolve(p.subject, base)) {
            for (const Triple& t : view.out_of(*s)) try_triple(t);
        } else if (auto o = resolve(p.object, base)) {
            for (const Triple& t : view.in_of(*o)) try_triple(t);
        } else {
            for (const Triple& t : view.triples()) try_triple(t);
        }
    }
};

}  // namespace

QueryAst parse_query(std::string_view text) {
    // Drain the lexer once up front so unsupported keywords are reported by
    // name even when they sit inside constructs the parser would reject first
    // (nested groups, solution modifiers after the block).
    Lexer probe(text);
    while (probe.peek().kind != Tok::End) probe.next();
    return Parser(text).parse();
}

std::string QueryAst::to_string() const {
    std::ostringstream out;
    for (const auto& [name, iri] : prefixes)
        out << "PREFIX " << name << ": <" << iri << ">\n";
    out << "SELECT " << (distinct ? "DISTINCT " : "") << "?" << select_var << " WHERE {\n";
    for (const auto& p : patterns)
        out << "  " << term_text(p.subject) << " " << term_text(p.predicate) << " "
            << term_text(p.object) << " .\n";
    for (const auto& f : filters) {
        if (f.kind == QueryFilter::Kind::NotEqual)
            out << "  FILTER (" << term_text(f.lhs) << " != " << term_text(f.rhs) << ")\n";
        else
            out << "  FILTER (!isLiteral(" << term_text(f.lhs) << ") OR lang(" << term_text(f.lhs)
                << ") = '' OR langMatches(lang(" << term_text(f.lhs) << "), 'en'))\n";
    }
    out << "}\n";
    return out.str();
}

std::vector<Binding> evaluate(const QueryAst& query, const GraphView& view) {
    EvalContext ctx{query, view, {}};
    ctx.search(0, Binding{});
    return {ctx.results.begin(), ctx.results.end()};
}

std::vector<Triple> bindings_to_triples(const QueryAst& query, const std::vector<Binding>& bindings) {
    std::vector<Triple> out;
    std::set<Triple> seen;
    auto instantiate = [](const PatternTerm& t, const Binding& b) {
        return t.is_var ? b.at(t.text) : t.text;
    };
    for (const Binding& b : bindings) {
        for (const TriplePattern& p : query.patterns) {
            Triple t{instantiate(p.subject, b), instantiate(p.predicate, b), instantiate(p.object, b)};
            if (seen.insert(t).second) out.push_back(std::move(t));
        }
    }
    return out;
}

std::vector<Triple> filter_property_triples(const std::vector<Triple>& triples) {
    std::vector<Triple> out;
    for (const Triple& t : triples)
        if (!t.tail_is_literal()) out.push_back(t);
    return out;
}

}  // namespace graphqa
