#include "graphqa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "graphqa/errors.hpp"
#include "graphqa/text.hpp"

namespace graphqa {

using nlohmann::json;

std::string eval_mode_name(EvalMode mode) {
    return mode == EvalMode::AnyMatch ? "any" : "strict";
}

EvalMode eval_mode_from_name(const std::string& name) {
    if (name == "any") return EvalMode::AnyMatch;
    if (name == "strict") return EvalMode::Strict;
    throw ConfigError("unknown eval mode '" + name + "' (expected any|strict)");
}

int hits_at_1(const std::vector<std::string>& predicted, const std::vector<GoldAnswer>& gold,
              EvalMode mode, bool use_aliases) {
    if (predicted.empty()) return 0;

    std::set<std::string> truth;
    for (const auto& g : gold) {
        truth.insert(normalize_answer(g.label));
        if (use_aliases)
            for (const auto& alias : g.aliases) truth.insert(normalize_answer(alias));
    }

    std::size_t considered = mode == EvalMode::Strict ? 1 : predicted.size();
    for (std::size_t i = 0; i < considered && i < predicted.size(); ++i)
        if (truth.count(normalize_answer(predicted[i]))) return 1;
    return 0;
}

RunAggregates compute_aggregates(const std::vector<SampleRecord>& records) {
    RunAggregates agg;
    agg.samples = records.size();
    if (records.empty()) return agg;

    std::size_t hits = 0, generate_used = 0, generate_hits = 0;
    for (const auto& r : records) {
        hits += static_cast<std::size_t>(r.hit);
        if (r.generate_used) {
            ++generate_used;
            generate_hits += static_cast<std::size_t>(r.hit);
        }
    }
    auto pct = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
    };
    agg.hits_at_1 = pct(hits, records.size());
    agg.generate_ratio = pct(generate_used, records.size());
    agg.hits_given_generate = pct(generate_hits, generate_used);
    return agg;
}

namespace {

json gold_to_json(const GoldAnswer& g) {
    return json{{"aliases", g.aliases}, {"id", g.id}, {"label", g.label}};
}

GoldAnswer gold_from_json(const json& j) {
    GoldAnswer g;
    g.id = j.at("id");
    g.label = j.at("label");
    for (const auto& a : j.at("aliases")) g.aliases.push_back(a.get<std::string>());
    return g;
}

json record_to_json(const SampleRecord& r) {
    json gold = json::array();
    for (const auto& g : r.gold) gold.push_back(gold_to_json(g));
    return json{{"answers", r.answers},
                {"generate_used", r.generate_used},
                {"gold", std::move(gold)},
                {"hit", r.hit},
                {"id", r.id},
                {"steps", r.steps},
                {"termination", r.termination},
                {"termination_detail", r.termination_detail}};
}

SampleRecord record_from_json(const json& j) {
    SampleRecord r;
    r.id = j.at("id");
    for (const auto& a : j.at("answers")) r.answers.push_back(a.get<std::string>());
    for (const auto& g : j.at("gold")) r.gold.push_back(gold_from_json(g));
    r.hit = j.at("hit");
    r.termination = j.at("termination");
    r.termination_detail = j.at("termination_detail");
    r.steps = j.at("steps");
    r.generate_used = j.at("generate_used");
    return r;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
    json j;
    j["header"] = json{{"backend", report.header.backend},
                       {"config_digest", report.header.config_digest},
                       {"dataset", report.header.dataset},
                       {"droplists", report.header.droplists},
                       {"eval_mode", report.header.eval_mode},
                       {"kg_level", report.header.kg_level},
                       {"label", report.header.label},
                       {"seed", report.header.seed},
                       {"use_aliases", report.header.use_aliases}};
    j["records"] = json::array();
    for (const auto& r : report.records) j["records"].push_back(record_to_json(r));
    j["aggregates"] = json{{"generate_ratio", report.aggregates.generate_ratio},
                           {"hits_at_1", report.aggregates.hits_at_1},
                           {"hits_given_generate", report.aggregates.hits_given_generate},
                           {"samples", report.aggregates.samples}};
    return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
    json j = json::parse(text);
    RunReport report;
    const auto& h = j.at("header");
    report.header.backend = h.at("backend");
    report.header.config_digest = h.at("config_digest");
    report.header.dataset = h.at("dataset");
    report.header.droplists = h.at("droplists");
    report.header.eval_mode = h.at("eval_mode");
    report.header.kg_level = h.at("kg_level");
    report.header.label = h.at("label");
    report.header.seed = h.at("seed");
    report.header.use_aliases = h.at("use_aliases");
    for (const auto& r : j.at("records")) report.records.push_back(record_from_json(r));
    const auto& a = j.at("aggregates");
    report.aggregates.samples = a.at("samples");
    report.aggregates.hits_at_1 = a.at("hits_at_1");
    report.aggregates.generate_ratio = a.at("generate_ratio");
    report.aggregates.hits_given_generate = a.at("hits_given_generate");
    return report;
}

RunReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return report_from_json(buffer.str());
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_report(const std::filesystem::path& path, const RunReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report file: " + path.string());
    out << report_to_json(report);
}

RunOutput run_benchmark(const std::vector<BenchmarkSample>& dataset, const KnowledgeGraph& graph,
                        const std::optional<std::vector<DropList>>& droplists, LlmGateway& gateway,
                        const RunOptions& options) {
    struct Job {
        const BenchmarkSample* sample;
        const DropList* droplist;  // null on CKG
    };

    std::map<std::string, const BenchmarkSample*> by_id;
    for (const auto& s : dataset) by_id[s.id] = &s;

    std::vector<Job> jobs;
    if (droplists) {
        for (const auto& d : *droplists) {
            auto it = by_id.find(d.sample_id);
            if (it == by_id.end())
                throw ConfigError("droplist references unknown sample '" + d.sample_id + "'");
            jobs.push_back({it->second, &d});
        }
    } else {
        for (const auto& [id, sample] : by_id) jobs.push_back({sample, nullptr});
    }
    std::sort(jobs.begin(), jobs.end(),
              [](const Job& a, const Job& b) { return a.sample->id < b.sample->id; });

    std::vector<AgentResult> traces(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) break;
            const Job& job = jobs[i];
            GraphView view = job.droplist ? GraphView(graph, job.droplist->removal_set())
                                          : GraphView(graph);
            Agent agent(view, gateway, options.agent, options.decoding, job.sample->question,
                        job.sample->topic_entities);
            try {
                traces[i] = agent.run(job.sample->id);
            } catch (const std::exception& e) {
                // run() handles library errors itself; anything else still
                // becomes a per-sample error record rather than aborting.
                traces[i] = agent.partial_result();
                traces[i].id = job.sample->id;
                traces[i].termination = Termination::Error;
                traces[i].termination_detail = e.what();
            }
        }
    };

    int threads = std::max(1, options.parallelism);
    if (threads == 1 || jobs.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunOutput out;
    out.traces = std::move(traces);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const AgentResult& trace = out.traces[i];
        SampleRecord record;
        record.id = jobs[i].sample->id;
        record.answers = trace.answers;
        record.gold = jobs[i].sample->answers;
        record.hit = hits_at_1(trace.answers, record.gold, options.mode, options.use_aliases);
        record.termination = termination_name(trace.termination);
        record.termination_detail = trace.termination_detail;
        record.steps = static_cast<int>(trace.steps.size());
        record.generate_used = std::any_of(trace.steps.begin(), trace.steps.end(),
                                           [](const AgentStep& s) { return s.action_kind == "generate"; });
        out.report.records.push_back(std::move(record));
    }

    out.report.aggregates = compute_aggregates(out.report.records);
    out.report.header.eval_mode = eval_mode_name(options.mode);
    out.report.header.use_aliases = options.use_aliases;
    out.report.header.seed = options.seed;
    out.report.header.backend = gateway.backend_id();
    out.report.header.config_digest = options.config_digest;
    out.report.header.label = options.label;
    return out;
}

std::shared_ptr<LlmBackend> make_backend(const BackendChoice& choice) {
    if (choice.kind == "scripted") {
        if (choice.script_path.empty()) throw ConfigError("scripted backend needs a script file");
        return std::make_shared<ScriptedBackend>(ScriptedBackend::load(choice.script_path));
    }
    if (choice.kind == "http") {
        if (choice.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
        if (choice.model.empty()) throw ConfigError("http backend needs a model name");
        const char* key = std::getenv(choice.api_key_env.c_str());
        if (key == nullptr || *key == '\0')
            throw ConfigError("API key environment variable " + choice.api_key_env + " is not set");
        HttpBackendConfig http;
        http.endpoint = choice.endpoint;
        http.model = choice.model;
        http.api_key = key;
        http.timeout_ms = choice.timeout_ms;
        http.max_retries = choice.max_retries;
        http.backoff_ms = choice.backoff_ms;
        http.rpm_limit = choice.rpm_limit;
        http.max_concurrency = choice.max_concurrency;
        return std::make_shared<HttpBackend>(http);
    }
    throw ConfigError("unknown backend kind '" + choice.kind + "' (expected scripted|http)");
}

namespace {

std::string pct_label(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", p * 100.0);
    return buf;
}

}  // namespace

RunOutput execute_run(const RunConfig& config) {
    auto backend = make_backend(config.backend);
    TemplateSet templates =
        config.prompts_dir.empty() ? default_templates() : load_templates(config.prompts_dir);
    LlmGateway gateway(backend, std::move(templates), GatewayConfig{config.max_prompt_chars});

    auto graph = load_graph(config.graph_path);
    auto dataset = load_dataset(config.dataset_path);
    std::optional<std::vector<DropList>> droplists;
    if (!config.droplist_path.empty()) droplists = load_droplists(config.droplist_path);

    RunOptions options;
    options.agent = config.agent;
    options.decoding = config.decoding;
    options.mode = eval_mode_from_name(config.eval_mode);
    options.use_aliases = config.use_aliases;
    options.parallelism = config.parallelism;
    options.seed = config.seed;
    options.config_digest = config_digest(config);
    options.label = config.label.empty() ? gateway.backend_id() : config.label;

    auto output = run_benchmark(dataset, graph, droplists, gateway, options);
    output.report.header.dataset = std::filesystem::path(config.dataset_path).filename().string();
    output.report.header.droplists =
        std::filesystem::path(config.droplist_path).filename().string();
    output.report.header.kg_level =
        droplists ? "IKG-" + pct_label(droplists->empty() ? 0.0 : droplists->front().drop_prob) + "%"
                  : "CKG";
    return output;
}

void write_trace_file(const std::filesystem::path& path, const std::vector<AgentResult>& traces,
                      const std::string& config_digest, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trace file: " + path.string());
    json header;
    header["header"] = json{{"config_digest", config_digest}, {"seed", seed}};
    out << header.dump() << "\n";
    for (const auto& trace : traces) out << trace_to_json_line(trace) << "\n";
}

std::string format_report_table(const std::vector<RunReport>& reports) {
    if (reports.empty()) throw ConfigError("no reports to merge");
    const std::string& mode = reports.front().header.eval_mode;
    for (const auto& r : reports)
        if (r.header.eval_mode != mode)
            throw ConfigError("refusing to merge reports with mixed eval modes ('" + mode + "' vs '" +
                              r.header.eval_mode + "')");

    // Columns ordered CKG first, then IKG levels ascending, then anything else.
    auto column_rank = [](const std::string& level) {
        if (level == "CKG") return std::pair<int, std::string>{0, ""};
        if (starts_with(level, "IKG-")) return std::pair<int, std::string>{1, level};
        return std::pair<int, std::string>{2, level};
    };
    std::vector<std::string> columns;
    std::vector<std::string> rows;
    std::map<std::pair<std::string, std::string>, double> cells;
    for (const auto& r : reports) {
        const std::string& level = r.header.kg_level;
        const std::string& label = r.header.label;
        if (std::find(columns.begin(), columns.end(), level) == columns.end()) columns.push_back(level);
        if (std::find(rows.begin(), rows.end(), label) == rows.end()) rows.push_back(label);
        cells[{label, level}] = r.aggregates.hits_at_1;
    }
    std::sort(columns.begin(), columns.end(), [&](const std::string& a, const std::string& b) {
        return column_rank(a) < column_rank(b);
    });

    std::size_t row_width = std::string("Method").size();
    for (const auto& row : rows) row_width = std::max(row_width, row.size());

    std::string header = "Method" + std::string(row_width - 6 + 2, ' ');
    for (const auto& col : columns) {
        std::string padded = col;
        if (padded.size() < 9) padded = std::string(9 - padded.size(), ' ') + padded;
        header += padded + "  ";
    }
    std::string table = "Hits@1 (%), eval mode: " + mode + "\n" + header + "\n";
    for (const auto& row : rows) {
        std::string line = row + std::string(row_width - row.size() + 2, ' ');
        for (const auto& col : columns) {
            char buf[32];
            auto it = cells.find({row, col});
            if (it == cells.end())
                std::snprintf(buf, sizeof buf, "%9s", "-");
            else
                std::snprintf(buf, sizeof buf, "%9.1f", it->second);
            line += buf;
            line += "  ";
        }
        table += line + "\n";
    }
    return table;
}

}  // namespace graphqa
