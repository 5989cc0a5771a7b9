#pragma once
// Benchmark runner and Hits@1 scoring. Per-sample records are authoritative;
// aggregates are recomputable from them, and a (parallel) run emits records
// keyed and ordered by sample id so worker scheduling never changes output
// bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "graphqa/agent.hpp"
#include "graphqa/config.hpp"
#include "graphqa/dataset.hpp"
#include "graphqa/kg.hpp"
#include "graphqa/llm.hpp"

namespace graphqa {

enum class EvalMode { AnyMatch, Strict };

std::string eval_mode_name(EvalMode mode);
EvalMode eval_mode_from_name(const std::string& name);

// 1 iff a predicted answer matches a gold label (or alias, when enabled)
// after normalization. Strict mode considers only the first prediction.
int hits_at_1(const std::vector<std::string>& predicted, const std::vector<GoldAnswer>& gold,
              EvalMode mode = EvalMode::AnyMatch, bool use_aliases = true);

struct SampleRecord {
    std::string id;
    std::vector<std::string> answers;
    std::vector<GoldAnswer> gold;
    int hit = 0;
    std::string termination;
    std::string termination_detail;
    int steps = 0;
    bool generate_used = false;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct RunAggregates {
    std::size_t samples = 0;
    double hits_at_1 = 0.0;            // percent
    double generate_ratio = 0.0;       // percent of samples that used Generate
    double hits_given_generate = 0.0;  // percent correct among those

    friend bool operator==(const RunAggregates&, const RunAggregates&) = default;
};

struct RunHeader {
    std::string config_digest;
    std::string eval_mode;
    bool use_aliases = true;
    std::uint64_t seed = 0;
    std::string backend;
    std::string dataset;    // basename
    std::string droplists;  // basename, empty for CKG
    std::string kg_level;   // "CKG" or "IKG-40%"
    std::string label;      // row label for merged tables

    friend bool operator==(const RunHeader&, const RunHeader&) = default;
};

struct RunReport {
    RunHeader header;
    std::vector<SampleRecord> records;  // ordered by sample id
    RunAggregates aggregates;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

RunAggregates compute_aggregates(const std::vector<SampleRecord>& records);

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);
RunReport load_report(const std::filesystem::path& path);
void save_report(const std::filesystem::path& path, const RunReport& report);

struct RunOptions {
    AgentConfig agent;
    DecodingParams decoding;
    EvalMode mode = EvalMode::AnyMatch;
    bool use_aliases = true;
    int parallelism = 1;
    std::uint64_t seed = 42;
    std::string config_digest;
    std::string label;
};

struct RunOutput {
    RunReport report;
    std::vector<AgentResult> traces;  // ordered by sample id
};

// Runs the agent over every sample. With droplists, only listed samples run,
// each under its own view; without, all samples run on the complete graph.
// Per-sample agent failures are recorded (hit 0), never fatal.
RunOutput run_benchmark(const std::vector<BenchmarkSample>& dataset, const KnowledgeGraph& graph,
                        const std::optional<std::vector<DropList>>& droplists, LlmGateway& gateway,
                        const RunOptions& options);

// Plain-text table: one row per report label, one column per KG level.
// Throws ConfigError when reports mix eval modes.
std::string format_report_table(const std::vector<RunReport>& reports);

// Backend from configuration; http kind reads its key from the configured
// environment variable and fails fast when it is missing.
std::shared_ptr<LlmBackend> make_backend(const BackendChoice& choice);

// The full run pipeline behind `graphqa run`: load inputs, run the benchmark,
// fill the report header. Shared so regenerated goldens and CLI output are
// produced by the same code.
RunOutput execute_run(const RunConfig& config);

// Trace files open with a {"header": {...}} line embedding seed and config
// digest, then one record per question.
void write_trace_file(const std::filesystem::path& path, const std::vector<AgentResult>& traces,
                      const std::string& config_digest = "", std::uint64_t seed = 0);

}  // namespace graphqa
