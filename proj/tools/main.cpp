// graphqa CLI: build incomplete-KG benchmarks from gold queries, run the
// agent over them with a scripted or HTTP chat backend, and roll reports up
// into a per-level table.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "graphqa/agent.hpp"
#include "graphqa/config.hpp"
#include "graphqa/dataset.hpp"
#include "graphqa/errors.hpp"
#include "graphqa/eval.hpp"
#include "graphqa/ikg.hpp"
#include "graphqa/kg.hpp"
#include "graphqa/llm.hpp"
#include "graphqa/text.hpp"

#include <json.hpp>

namespace {

using namespace graphqa;

std::string pct_suffix(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", p * 100.0);
    return buf;
}

void require_readable(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path not set");
    std::ifstream probe(path);
    if (!probe) throw ConfigError("cannot read " + what + " file: " + path);
}

std::string stats_table(const std::vector<std::pair<double, IkgStats>>& rows) {
    std::string out =
        "      p  retained  mean_dropped  median_neighbors  isolated  unparseable\n";
    for (const auto& [p, s] : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%7.2f  %8zu  %12.3f  %16zu  %8zu  %11zu\n", p,
                      s.retained_samples, s.mean_dropped_per_question,
                      s.median_topic_neighbor_count, s.isolated_topic_samples,
                      s.skipped_unparseable);
        out += line;
    }
    return out;
}

nlohmann::json stats_to_json(double p, std::uint64_t seed, const IkgStats& s) {
    return nlohmann::json{{"drop_prob", p},
                          {"isolated_topic_samples", s.isolated_topic_samples},
                          {"mean_dropped_per_question", s.mean_dropped_per_question},
                          {"median_topic_neighbor_count", s.median_topic_neighbor_count},
                          {"retained_samples", s.retained_samples},
                          {"seed", seed},
                          {"skipped_unparseable", s.skipped_unparseable}};
}

int cmd_build_ikg(const std::string& graph_path, const std::string& dataset_path,
                  const std::string& probs_csv, std::uint64_t seed, std::size_t limit,
                  const std::string& out_dir, const std::string& prefix) {
    require_readable(graph_path, "graph");
    require_readable(dataset_path, "dataset");

    auto graph = load_graph(graph_path);
    auto dataset = load_dataset(dataset_path);

    if (limit > 0 && limit < dataset.size()) {
        // Fisher-Yates on the run seed; explicit so the selection is stable
        // across standard libraries.
        std::mt19937_64 rng(seed);
        for (std::size_t i = dataset.size() - 1; i > 0; --i) {
            auto j = static_cast<std::size_t>(rng() % (i + 1));
            std::swap(dataset[i], dataset[j]);
        }
        dataset.resize(limit);
    }

    std::vector<double> probs;
    for (const auto& piece : split_trimmed(probs_csv, ',')) {
        double p = std::stod(piece);
        if (p < 0.0 || p > 1.0) throw ConfigError("drop probability out of [0,1]: " + piece);
        probs.push_back(p);
    }
    if (probs.empty()) throw ConfigError("no drop probabilities given");

    std::filesystem::create_directories(out_dir);
    nlohmann::json digest_input = {
        {"graph", std::filesystem::path(graph_path).filename().string()},
        {"dataset", std::filesystem::path(dataset_path).filename().string()},
        {"probs", probs_csv},
        {"seed", seed},
        {"limit", limit}};
    std::string digest = to_hex(fnv1a64(digest_input.dump()));

    std::vector<std::pair<double, IkgStats>> rows;
    for (double p : probs) {
        auto build = build_ikg(dataset, graph, p, seed);
        auto tag = prefix + "_p" + pct_suffix(p);
        save_droplists(std::filesystem::path(out_dir) / (tag + ".jsonl"), build.droplists, digest,
                       seed);
        auto stats_json = stats_to_json(p, seed, build.stats);
        stats_json["config_digest"] = digest;
        std::ofstream stats_out(std::filesystem::path(out_dir) / (tag + "_stats.json"),
                                std::ios::binary);
        stats_out << stats_json.dump(2) << "\n";
        rows.emplace_back(p, build.stats);
    }
    std::cout << stats_table(rows);
    return 0;
}

int cmd_stats(const std::string& graph_path, const std::string& dataset_path,
              const std::string& droplist_path) {
    require_readable(graph_path, "graph");
    require_readable(dataset_path, "dataset");
    require_readable(droplist_path, "droplist");

    auto graph = load_graph(graph_path);
    auto dataset = load_dataset(dataset_path);
    auto droplists = load_droplists(droplist_path);
    double p = droplists.empty() ? 0.0 : droplists.front().drop_prob;
    std::uint64_t seed = droplists.empty() ? 0 : droplists.front().seed;
    auto stats = compute_stats(droplists, dataset, graph);
    std::cout << stats_table({{p, stats}});
    std::cout << stats_to_json(p, seed, stats).dump(2) << "\n";
    return 0;
}

int cmd_run(const RunConfig& cfg, const std::string& trace_path, const std::string& report_path) {
    // Fail fast on configuration before any heavy I/O or network use.
    require_readable(cfg.graph_path, "graph");
    require_readable(cfg.dataset_path, "dataset");
    if (!cfg.droplist_path.empty()) require_readable(cfg.droplist_path, "droplist");
    if (cfg.backend.kind == "scripted") require_readable(cfg.backend.script_path, "script");

    auto output = execute_run(cfg);

    if (!trace_path.empty())
        write_trace_file(trace_path, output.traces, output.report.header.config_digest, cfg.seed);
    if (!report_path.empty()) save_report(report_path, output.report);

    std::cout << "samples " << output.report.aggregates.samples << "  hits@1 "
              << output.report.aggregates.hits_at_1 << "  generate_ratio "
              << output.report.aggregates.generate_ratio << "\n";

    // Scripted key misses are infrastructure failures, not model misses.
    for (const auto& r : output.report.records) {
        if (r.termination == "error" && r.termination_detail.rfind("scripted_key_miss", 0) == 0) {
            std::cerr << "error: sample '" << r.id << "': " << r.termination_detail << "\n";
            return 1;
        }
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& report_paths, const std::string& out_path) {
    std::vector<RunReport> reports;
    for (const auto& path : report_paths) reports.push_back(load_report(path));
    std::string table = format_report_table(reports);
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw IoError("cannot write table file: " + out_path);
        out << table;
    }
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Question answering over deliberately incomplete knowledge graphs"};
    app.require_subcommand(1);

    // ---- build-ikg ----
    auto* build = app.add_subcommand("build-ikg", "Drop crucial triples to build IKG benchmark files");
    std::string b_graph, b_dataset, b_out = ".", b_prefix = "droplists";
    std::string b_probs = "0.2,0.4,0.6,0.8";
    std::uint64_t b_seed = 42;
    std::size_t b_limit = 0;
    build->add_option("--graph", b_graph, "Graph TSV file")->required();
    build->add_option("--dataset", b_dataset, "Dataset JSONL file")->required();
    build->add_option("--drop-prob", b_probs, "Comma-separated drop probabilities");
    build->add_option("--seed", b_seed, "Dataset seed");
    build->add_option("--limit", b_limit, "Subsample this many samples using the seed");
    build->add_option("--out", b_out, "Output directory");
    build->add_option("--prefix", b_prefix, "Output file prefix");

    // ---- run ----
    auto* run = app.add_subcommand("run", "Run the agent over a benchmark");
    RunConfig cfg;
    std::string r_config, r_trace, r_report;
    std::string r_aliases;
    run->add_option("--config", r_config, "JSON config file (flags override it)");
    run->add_option("--graph", cfg.graph_path, "Graph TSV file");
    run->add_option("--dataset", cfg.dataset_path, "Dataset JSONL file");
    run->add_option("--droplists", cfg.droplist_path, "DropList JSONL file (omit for CKG)");
    run->add_option("--backend", cfg.backend.kind, "scripted | http");
    run->add_option("--script", cfg.backend.script_path, "Scripted backend file");
    run->add_option("--endpoint", cfg.backend.endpoint, "Chat completion endpoint URL");
    run->add_option("--model", cfg.backend.model, "Model name for the HTTP backend");
    run->add_option("--api-key-env", cfg.backend.api_key_env, "Env var holding the API key");
    run->add_option("--timeout-ms", cfg.backend.timeout_ms, "HTTP timeout");
    run->add_option("--max-retries", cfg.backend.max_retries, "HTTP retry cap");
    run->add_option("--rpm-limit", cfg.backend.rpm_limit, "Requests-per-minute cap (0 = off)");
    run->add_option("--max-concurrency", cfg.backend.max_concurrency, "In-flight request cap");
    run->add_option("--max-steps", cfg.agent.max_steps, "Thought/action budget");
    run->add_option("--max-rollbacks", cfg.agent.max_rollbacks, "Rollback budget");
    run->add_option("--top-relations", cfg.agent.top_relations, "Relations kept by filtering (N)");
    run->add_option("--related-triples", cfg.agent.related_triples, "BM25-chosen triples (k)");
    run->add_option("--generate-draws", cfg.agent.generate_draws, "Generation repetitions (n)");
    run->add_option("--link-candidates", cfg.agent.link_candidates, "Linking candidate count");
    run->add_option("--rollback-cap", cfg.agent.rollback_triple_cap,
                    "Triple cap per rollback re-search");
    run->add_option("--temperature", cfg.decoding.temperature, "Sampling temperature");
    run->add_option("--max-tokens", cfg.decoding.max_tokens, "Completion token cap");
    run->add_option("--eval-mode", cfg.eval_mode, "any | strict");
    run->add_flag("--aliases,!--no-aliases", cfg.use_aliases, "Match gold aliases too");
    run->add_option("--seed", cfg.seed, "Run seed (recorded in artifacts)");
    run->add_option("--parallelism", cfg.parallelism, "Worker threads");
    run->add_option("--prompts-dir", cfg.prompts_dir, "Prompt template override directory");
    run->add_option("--max-prompt-chars", cfg.max_prompt_chars, "Prompt budget");
    run->add_option("--label", cfg.label, "Row label for merged tables");
    run->add_option("--out-trace", r_trace, "Trace JSONL output path");
    run->add_option("--out-report", r_report, "Report JSON output path");

    // ---- report ----
    auto* report = app.add_subcommand("report", "Merge run reports into a per-level table");
    std::vector<std::string> rep_files;
    std::string rep_out;
    report->add_option("files", rep_files, "Report JSON files")->required();
    report->add_option("--out", rep_out, "Write the table here as well");

    // ---- stats ----
    auto* stats = app.add_subcommand("stats", "Recompute statistics for a droplist file");
    std::string s_graph, s_dataset, s_droplists;
    stats->add_option("--graph", s_graph, "Graph TSV file")->required();
    stats->add_option("--dataset", s_dataset, "Dataset JSONL file")->required();
    stats->add_option("--droplists", s_droplists, "DropList JSONL file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed())
            return cmd_build_ikg(b_graph, b_dataset, b_probs, b_seed, b_limit, b_out, b_prefix);
        if (run->parsed()) {
            if (!r_config.empty()) {
                RunConfig from_file = graphqa::load_config_file(r_config);
                // Flags the user actually passed win over file values.
                auto keep = [&](const char* flag) { return run->count(flag) > 0; };
                if (!keep("--graph")) cfg.graph_path = from_file.graph_path;
                if (!keep("--dataset")) cfg.dataset_path = from_file.dataset_path;
                if (!keep("--droplists")) cfg.droplist_path = from_file.droplist_path;
                if (!keep("--backend")) cfg.backend.kind = from_file.backend.kind;
                if (!keep("--script")) cfg.backend.script_path = from_file.backend.script_path;
                if (!keep("--endpoint")) cfg.backend.endpoint = from_file.backend.endpoint;
                if (!keep("--model")) cfg.backend.model = from_file.backend.model;
                if (!keep("--api-key-env")) cfg.backend.api_key_env = from_file.backend.api_key_env;
                if (!keep("--timeout-ms")) cfg.backend.timeout_ms = from_file.backend.timeout_ms;
                if (!keep("--max-retries")) cfg.backend.max_retries = from_file.backend.max_retries;
                if (!keep("--rpm-limit")) cfg.backend.rpm_limit = from_file.backend.rpm_limit;
                if (!keep("--max-concurrency"))
                    cfg.backend.max_concurrency = from_file.backend.max_concurrency;
                if (!keep("--max-steps")) cfg.agent.max_steps = from_file.agent.max_steps;
                if (!keep("--max-rollbacks")) cfg.agent.max_rollbacks = from_file.agent.max_rollbacks;
                if (!keep("--top-relations")) cfg.agent.top_relations = from_file.agent.top_relations;
                if (!keep("--related-triples"))
                    cfg.agent.related_triples = from_file.agent.related_triples;
                if (!keep("--generate-draws"))
                    cfg.agent.generate_draws = from_file.agent.generate_draws;
                if (!keep("--link-candidates"))
                    cfg.agent.link_candidates = from_file.agent.link_candidates;
                if (!keep("--rollback-cap"))
                    cfg.agent.rollback_triple_cap = from_file.agent.rollback_triple_cap;
                if (!keep("--temperature")) cfg.decoding.temperature = from_file.decoding.temperature;
                if (!keep("--max-tokens")) cfg.decoding.max_tokens = from_file.decoding.max_tokens;
                if (!keep("--eval-mode")) cfg.eval_mode = from_file.eval_mode;
                if (!keep("--aliases") && !keep("--no-aliases")) cfg.use_aliases = from_file.use_aliases;
                if (!keep("--seed")) cfg.seed = from_file.seed;
                if (!keep("--parallelism")) cfg.parallelism = from_file.parallelism;
                if (!keep("--prompts-dir")) cfg.prompts_dir = from_file.prompts_dir;
                if (!keep("--max-prompt-chars")) cfg.max_prompt_chars = from_file.max_prompt_chars;
                if (!keep("--label")) cfg.label = from_file.label;
            }
            return cmd_run(cfg, r_trace, r_report);
        }
        if (report->parsed()) return cmd_report(rep_files, rep_out);
        if (stats->parsed()) return cmd_stats(s_graph, s_dataset, s_droplists);
    } catch (const graphqa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
