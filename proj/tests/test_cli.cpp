#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>

#include <sys/wait.h>

#include <httplib.h>
#include <json.hpp>

#include "graphqa/eval.hpp"
#include "support/temp_files.hpp"
#include "support/worlds.hpp"

using namespace graphqa;
using testsupport::read_file;
using testsupport::temp_dir;
using testsupport::write_temp;

namespace {

const std::filesystem::path kFixtures = GRAPHQA_FIXTURES_DIR;

struct CliResult {
    int exit_code;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    std::string command = std::string("env -u OPENAI_API_KEY ") + GRAPHQA_CLI_PATH + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string output;
    char buffer[4096];
    while (std::size_t n = std::fread(buffer, 1, sizeof buffer, pipe)) output.append(buffer, n);
    int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, std::move(output)};
}

std::string small_graph() {
    return "m.t\tr.a\tm.x\nm.t\tr.b\tm.y\nm.t\tr.pad\tm.z\n"
           "@label\tm.t\tTopic\n@label\tm.x\tAnswer X\n@label\tm.y\tAnswer Y\n";
}

std::string small_dataset() {
    return R"({"id":"s1","question":"q1","topic_entities":{"m.t":"Topic"},"answers":[{"id":"m.x","label":"Answer X","aliases":[]}],"gold_query":"PREFIX ns: <http://rdf.freebase.com/ns/> SELECT ?x WHERE { ns:m.t ns:r.a ?x . }"})"
           "\n"
           R"({"id":"s2","question":"q2","topic_entities":{"m.t":"Topic"},"answers":[{"id":"m.y","label":"Answer Y","aliases":[]}],"gold_query":"PREFIX ns: <http://rdf.freebase.com/ns/> SELECT ?x WHERE { ns:m.t ns:r.b ?x . }"})"
           "\n";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("build-ikg is deterministic and couples levels") {
    auto graph = write_temp("graph.tsv", small_graph());
    auto dataset = write_temp("dataset.jsonl", small_dataset());
    auto out_a = temp_dir() / "build_a";
    auto out_b = temp_dir() / "build_b";

    std::string base = "build-ikg --graph " + graph.string() + " --dataset " + dataset.string() +
                       " --drop-prob 0.2,0.4,0.6,0.8 --seed 42 --out ";
    CHECK(run_cli(base + out_a.string()).exit_code == 0);
    CHECK(run_cli(base + out_b.string()).exit_code == 0);

    for (const char* tag : {"p20", "p40", "p60", "p80"}) {
        auto name = std::string("droplists_") + tag + ".jsonl";
        CHECK(read_file(out_a / name) == read_file(out_b / name));
    }

    // nested drop sets across the four levels
    auto l20 = load_droplists(out_a / "droplists_p20.jsonl");
    auto l80 = load_droplists(out_a / "droplists_p80.jsonl");
    for (const auto& d : l20) {
        bool found = false;
        for (const auto& bigger : l80)
            if (bigger.sample_id == d.sample_id) {
                found = true;
                for (const auto& t : d.dropped)
                    CHECK(std::find(bigger.dropped.begin(), bigger.dropped.end(), t) !=
                          bigger.dropped.end());
            }
        CHECK(found);
    }
}

TEST_CASE("build-ikg at p=0 drops nothing") {
    auto graph = write_temp("graph.tsv", small_graph());
    auto dataset = write_temp("dataset.jsonl", small_dataset());
    auto out = temp_dir() / "build_p0";
    auto result = run_cli("build-ikg --graph " + graph.string() + " --dataset " + dataset.string() +
                          " --drop-prob 0 --seed 42 --out " + out.string());
    CHECK(result.exit_code == 0);
    for (const auto& d : load_droplists(out / "droplists_p0.jsonl")) {
        CHECK(d.dropped.empty());
        CHECK(d.expanded.empty());
    }
    CHECK(result.output.find("0.000") != std::string::npos);  // mean dropped column
}

TEST_CASE("build-ikg --limit subsamples deterministically") {
    auto graph = write_temp("graph.tsv", small_graph());
    auto dataset = write_temp("dataset.jsonl", small_dataset());
    auto out_a = temp_dir() / "limit_a";
    auto out_b = temp_dir() / "limit_b";
    std::string base = "build-ikg --graph " + graph.string() + " --dataset " + dataset.string() +
                       " --drop-prob 0.4 --seed 9 --limit 1 --out ";
    REQUIRE(run_cli(base + out_a.string()).exit_code == 0);
    REQUIRE(run_cli(base + out_b.string()).exit_code == 0);
    auto lists = load_droplists(out_a / "droplists_p40.jsonl");
    CHECK(lists.size() == 1);
    CHECK(read_file(out_a / "droplists_p40.jsonl") == read_file(out_b / "droplists_p40.jsonl"));
}

TEST_CASE("run on the cupertino scripted fixture reports a perfect score") {
    auto report_path = temp_dir() / "cupertino_report.json";
    auto trace_path = temp_dir() / "cupertino_trace.jsonl";
    auto result = run_cli("run --graph " + (kFixtures / "cupertino/graph.tsv").string() +
                          " --dataset " + (kFixtures / "cupertino/dataset.jsonl").string() +
                          " --backend scripted --script " +
                          (kFixtures / "cupertino/script_ckg.json").string() + " --out-trace " +
                          trace_path.string() + " --out-report " + report_path.string());
    CHECK(result.exit_code == 0);
    auto report = load_report(report_path);
    CHECK(report.aggregates.hits_at_1 == doctest::Approx(100.0));
    CHECK(report.header.kg_level == "CKG");
    CHECK(!report.header.config_digest.empty());
}

TEST_CASE("run exits nonzero on a scripted key miss, citing the sample") {
    auto script = write_temp("empty_script.json", R"({"entries":[]})");
    auto result = run_cli("run --graph " + (kFixtures / "cupertino/graph.tsv").string() +
                          " --dataset " + (kFixtures / "cupertino/dataset.jsonl").string() +
                          " --backend scripted --script " + script.string());
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("cupertino") != std::string::npos);
    CHECK(result.output.find("scripted_key_miss") != std::string::npos);
}

TEST_CASE("run drives a live http backend end to end") {
    // Local chat server handing out the two episodes' completions in call
    // order (samples run in id order at parallelism 1).
    std::vector<std::string> sequence;
    for (const auto& c : testsupport::appalachian_sequence()) sequence.push_back(c);
    for (const auto& c : testsupport::cupertino_ckg_sequence()) sequence.push_back(c);

    httplib::Server server;
    std::atomic<std::size_t> next{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        REQUIRE(req.get_header_value("Authorization") == "Bearer sk-local-test");
        std::size_t i = next.fetch_add(1);
        REQUIRE(i < sequence.size());
        nlohmann::json out = {
            {"choices", nlohmann::json::array(
                            {{{"message", {{"role", "assistant"}, {"content", sequence[i]}}}}})}};
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto report_path = temp_dir() / "http_report.json";
    std::string command = std::string("env OPENAI_API_KEY=sk-local-test ") + GRAPHQA_CLI_PATH +
                          " run --graph " + (kFixtures / "e2e/graph.tsv").string() + " --dataset " +
                          (kFixtures / "e2e/dataset.jsonl").string() +
                          " --backend http --endpoint http://127.0.0.1:" + std::to_string(port) +
                          "/v1/chat/completions --model local-test --parallelism 1" +
                          " --out-report " + report_path.string() + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string output;
    char buffer[4096];
    while (std::size_t n = std::fread(buffer, 1, sizeof buffer, pipe)) output.append(buffer, n);
    int status = pclose(pipe);
    server.stop();
    listener.join();

    CHECK(WEXITSTATUS(status) == 0);
    CHECK(next.load() == sequence.size());
    auto report = load_report(report_path);
    CHECK(report.header.backend == "http:local-test");
    CHECK(report.aggregates.hits_at_1 == doctest::Approx(100.0));
}

TEST_CASE("run with an http backend fails fast without an API key") {
    auto result = run_cli("run --graph " + (kFixtures / "cupertino/graph.tsv").string() +
                          " --dataset " + (kFixtures / "cupertino/dataset.jsonl").string() +
                          " --backend http --endpoint http://localhost:1/v1/chat/completions" +
                          " --model test");
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("OPENAI_API_KEY") != std::string::npos);
}

TEST_CASE("run rejects unknown config file keys") {
    auto config = write_temp("config.json", R"({"graph":"x","not_a_key":1})");
    auto result = run_cli("run --config " + config.string());
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("not_a_key") != std::string::npos);
}

TEST_CASE("config file values apply and flags win") {
    auto config = write_temp("config.json",
                             std::string(R"({"graph":")") +
                                 (kFixtures / "cupertino/graph.tsv").string() + R"(","dataset":")" +
                                 (kFixtures / "cupertino/dataset.jsonl").string() +
                                 R"(","backend":"scripted","script":")" +
                                 (kFixtures / "cupertino/script_ckg.json").string() +
                                 R"(","label":"from-file"})");
    auto report_path = temp_dir() / "config_report.json";
    auto result =
        run_cli("run --config " + config.string() + " --out-report " + report_path.string());
    CHECK(result.exit_code == 0);
    CHECK(load_report(report_path).header.label == "from-file");

    auto result2 = run_cli("run --config " + config.string() + " --label flag-wins --out-report " +
                           report_path.string());
    CHECK(result2.exit_code == 0);
    CHECK(load_report(report_path).header.label == "flag-wins");
}

TEST_CASE("report merges per-level files and refuses mixed modes") {
    RunReport ckg;
    ckg.header.eval_mode = "any";
    ckg.header.kg_level = "CKG";
    ckg.header.label = "scripted";
    ckg.aggregates.hits_at_1 = 100.0;
    RunReport ikg = ckg;
    ikg.header.kg_level = "IKG-40%";
    ikg.aggregates.hits_at_1 = 50.0;

    auto a = temp_dir() / "rep_ckg.json";
    auto b = temp_dir() / "rep_ikg.json";
    save_report(a, ckg);
    save_report(b, ikg);

    auto merged = run_cli("report " + a.string() + " " + b.string());
    CHECK(merged.exit_code == 0);
    CHECK(merged.output.find("CKG") != std::string::npos);
    CHECK(merged.output.find("IKG-40%") != std::string::npos);
    CHECK(merged.output.find("100.0") != std::string::npos);

    RunReport strict = ikg;
    strict.header.eval_mode = "strict";
    auto c = temp_dir() / "rep_strict.json";
    save_report(c, strict);
    auto refused = run_cli("report " + a.string() + " " + c.string());
    CHECK(refused.exit_code == 1);
    CHECK(refused.output.find("mixed eval modes") != std::string::npos);
}

TEST_CASE("report merges CKG plus four IKG levels into one table") {
    auto dir = kFixtures / "e2e";
    auto out = temp_dir() / "levels";
    REQUIRE(run_cli("build-ikg --graph " + (dir / "graph.tsv").string() + " --dataset " +
                    (dir / "dataset.jsonl").string() +
                    " --drop-prob 0.2,0.4,0.6,0.8 --seed 42 --out " + out.string())
                .exit_code == 0);

    std::vector<std::string> report_files;
    auto run_level = [&](const std::string& droplists, const std::string& tag) {
        auto report_path = (out / ("report_" + tag + ".json")).string();
        std::string args = "run --graph " + (dir / "graph.tsv").string() + " --dataset " +
                           (dir / "dataset.jsonl").string() + " --backend scripted --script " +
                           (dir / "script.json").string() + " --label agent --out-report " +
                           report_path;
        if (!droplists.empty()) args += " --droplists " + droplists;
        REQUIRE(run_cli(args).exit_code == 0);
        report_files.push_back(report_path);
    };
    run_level("", "ckg");
    for (const char* tag : {"p20", "p40", "p60", "p80"})
        run_level((out / ("droplists_" + std::string(tag) + ".jsonl")).string(), tag);

    std::string merge_args = "report";
    for (const auto& f : report_files) merge_args += " " + f;
    auto merged = run_cli(merge_args);
    CHECK(merged.exit_code == 0);
    for (const char* column : {"CKG", "IKG-20%", "IKG-40%", "IKG-60%", "IKG-80%"})
        CHECK(merged.output.find(column) != std::string::npos);
    // one data row for the single label
    CHECK(merged.output.find("agent") != std::string::npos);
}

TEST_CASE("stats recomputes droplist statistics") {
    auto graph = write_temp("graph.tsv", small_graph());
    auto dataset = write_temp("dataset.jsonl", small_dataset());
    auto out = temp_dir() / "stats_build";
    REQUIRE(run_cli("build-ikg --graph " + graph.string() + " --dataset " + dataset.string() +
                    " --drop-prob 0.4 --seed 7 --out " + out.string())
                .exit_code == 0);
    auto result = run_cli("stats --graph " + graph.string() + " --dataset " + dataset.string() +
                          " --droplists " + (out / "droplists_p40.jsonl").string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("retained") != std::string::npos);
}

TEST_CASE("unknown backend kind is rejected") {
    auto result = run_cli("run --graph " + (kFixtures / "cupertino/graph.tsv").string() +
                          " --dataset " + (kFixtures / "cupertino/dataset.jsonl").string() +
                          " --backend quantum");
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("quantum") != std::string::npos);
}

}  // TEST_SUITE
