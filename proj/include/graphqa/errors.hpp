#pragma once

#include <stdexcept>
#include <string>

namespace graphqa {

// Base for every error this library raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};

// Malformed input (graph file, dataset record, SPARQL text). Messages carry
// the offending line/position.
struct ParseError : Error {
    using Error::Error;
};

// SPARQL construct outside the supported subset. `construct` names it.
struct UnsupportedFeature : Error {
    explicit UnsupportedFeature(const std::string& construct)
        : Error("unsupported SPARQL construct: " + construct), construct(construct) {}
    std::string construct;
};

struct ConfigError : Error {
    using Error::Error;
};

// Prompt template problems: missing slot, over-budget prompt.
struct TemplateError : Error {
    using Error::Error;
};

// Backend failures (HTTP exhausted retries, timeouts, scripted key misses).
struct BackendError : Error {
    BackendError(std::string kind, const std::string& message)
        : Error(message), kind(std::move(kind)) {}
    std::string kind;  // "scripted_key_miss", "http", "timeout"
};

// Completion did not contain a recognizable action.
struct ActionParseError : Error {
    using Error::Error;
};

}  // namespace graphqa
