#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "varfuse/experiment.hpp"
#include "varfuse/synthfixture.hpp"

using namespace varfuse;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

namespace fs = std::filesystem;

// Synthetic collection on disk plus a ready-to-run configuration.
struct ExperimentSandbox {
    fs::path dir;

    ExperimentSandbox() {
        dir = fs::temp_directory_path() / "vf_experiment_test";
        fs::remove_all(dir);
        fs::create_directories(dir / "data");
        SynthSpec spec;
        spec.num_topics = 5;
        spec.docs_per_topic = 40;
        spec.relevant_per_topic = 8;
        spec.vocabulary = 120;
        spec.seed = 11;
        SynthCollection coll = generate_collection(spec);
        write_corpus_jsonl(coll.corpus, dir / "data" / "corpus.jsonl");
        write_topics_jsonl(coll.topics, dir / "data" / "topics.jsonl");
        write_qrels(coll.qrels, dir / "data" / "qrels.txt");
    }
    ~ExperimentSandbox() { fs::remove_all(dir); }

    ExperimentConfig config(const std::string& out_name = "out") const {
        std::string text =
            "[paths]\n"
            "corpus = \"data/corpus.jsonl\"\n"
            "topics = \"data/topics.jsonl\"\n"
            "qrels = \"data/qrels.txt\"\n"
            "output_dir = \"" + out_name + "\"\n"
            "[generate]\n"
            "strategy = \"P2\"\n"
            "num_variants = 5\n"
            "m_list = [2, 3, 5]\n"
            "[experiment]\n"
            "seed = 7\n"
            "workers = 2\n";
        return load_config(text, dir);
    }
};

// Relative path -> bytes for every regular file under root.
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            out[fs::relative(entry.path(), root).generic_string()] = read_file(entry.path());
    return out;
}

}  // namespace

TEST_CASE("fused tags and artifact layout") {
    CHECK(fused_tag("P2", 60.0, 10) == "P2-rrf60-m10");
    CHECK(fused_tag("P1", 60.5, 3) == "P1-rrf60.5-m3");
    CHECK(experiment_detail::pad_index(3, 5) == "3");
    CHECK(experiment_detail::pad_index(3, 10) == "03");
    CHECK(experiment_detail::pad_index(12, 100) == "012");

    ExperimentConfig cfg;
    cfg.output_dir = "base";
    ExperimentPaths paths(cfg);
    CHECK(paths.index() == fs::path("base") / "index.bin");
    CHECK(paths.variants_jsonl("P2") == fs::path("base") / "variants" / "P2.jsonl");
    CHECK(paths.variants_tsv("P2") == fs::path("base") / "variants" / "P2.tsv");
    CHECK(paths.variant_run("P2", 1, 5).filename() == fs::path("P2-v1.run"));
    CHECK(paths.variant_run("P2", 1, 10).filename() == fs::path("P2-v01.run"));
    CHECK(paths.fused_run("P2-rrf60-m3") == fs::path("base") / "runs" / "fused" / "P2-rrf60-m3.run");
    CHECK(paths.report_txt() == fs::path("base") / "eval" / "report.txt");
    CHECK(paths.report_jsonl() == fs::path("base") / "eval" / "report.jsonl");
    CHECK(paths.delta_tsv("x") == fs::path("base") / "analysis" / "delta-ndcg-x.tsv");
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<std::atomic<int>> hits(100);
    experiment_detail::parallel_for(100, 4, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);

    experiment_detail::parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });

    CHECK_THROWS_MATCHES(experiment_detail::parallel_for(
                             50, 4, [](std::size_t i) {
                                 if (i == 17) throw IoError("boom");
                             }),
                         IoError, MessageMatches(ContainsSubstring("boom")));
}

TEST_CASE("experiment pipeline builds the full artifact tree") {
    ExperimentSandbox sandbox;
    ExperimentConfig cfg = sandbox.config();
    std::ostringstream log;
    cmd_experiment(cfg, log);

    CHECK_THAT(log.str(), ContainsSubstring("index: 200 documents"));
    CHECK_THAT(log.str(), ContainsSubstring("generate: 25 variants (P2) for 5 topics"));
    CHECK_THAT(log.str(), ContainsSubstring("retrieve: 2 baseline runs + 5 variant runs"));
    CHECK_THAT(log.str(), ContainsSubstring("fuse: 3 fused runs"));

    ExperimentPaths paths(cfg);
    const std::vector<std::size_t> m_list{2, 3, 5};
    CHECK(fs::exists(paths.index()));
    CHECK(fs::exists(paths.variants_jsonl("P2")));
    CHECK(fs::exists(paths.variants_tsv("P2")));
    CHECK(fs::exists(paths.title_run()));
    CHECK(fs::exists(paths.rm3_run()));
    for (std::size_t i = 1; i <= 5; ++i) CHECK(fs::exists(paths.variant_run("P2", i, 5)));
    for (std::size_t m : m_list) {
        CHECK(fs::exists(paths.fused_run(fused_tag("P2", 60.0, m))));
        CHECK(fs::exists(paths.delta_tsv(fused_tag("P2", 60.0, m))));
    }
    CHECK(fs::exists(paths.report_txt()));
    CHECK(fs::exists(paths.report_jsonl()));

    // variants carry full provenance and the requested count
    auto sets = parse_variants_jsonl_file(paths.variants_jsonl("P2"));
    REQUIRE(sets.size() == 5);
    for (const auto& s : sets) {
        CHECK(s.queries.size() == 5);
        CHECK(s.strategy == "P2");
        CHECK(s.model_id == "offline-stub");
        CHECK(s.seed == 7);
    }

    // baseline runs cover every topic
    CHECK(parse_run_file(paths.title_run()).size() == 5);
    CHECK(parse_run_file(paths.rm3_run()).size() == 5);

    // fused runs are reproducible from the variant runs alone
    Run baseline = parse_run_file(paths.title_run());
    std::vector<Run> variant_runs;
    for (std::size_t i = 1; i <= 5; ++i)
        variant_runs.push_back(parse_run_file(paths.variant_run("P2", i, 5)));
    for (std::size_t m : m_list) {
        std::string tag = fused_tag("P2", 60.0, m);
        Run expected;
        for (const auto& [topic, ranking] : baseline) {
            std::vector<Ranking> inputs;
            for (std::size_t i = 0; i < m; ++i) {
                auto it = variant_runs[i].find(topic);
                if (it != variant_runs[i].end()) inputs.push_back(it->second);
            }
            REQUIRE_FALSE(inputs.empty());
            expected.emplace(topic, rrf_fuse(inputs, cfg.rrf));
        }
        CHECK(read_file(paths.fused_run(tag)) == render_run(expected, tag));
    }

    // report table lists all systems above an alpha legend
    std::string report = read_file(paths.report_txt());
    CHECK(report.substr(0, 6) == "system");
    for (const std::string& tag :
         {std::string("bm25-title"), std::string("bm25-rm3"), fused_tag("P2", 60.0, 2),
          fused_tag("P2", 60.0, 3), fused_tag("P2", 60.0, 5)})
        CHECK_THAT(report, ContainsSubstring("\n" + tag + "  "));
    CHECK_THAT(report, ContainsSubstring("P@10"));
    CHECK_THAT(report, ContainsSubstring("nDCG@10"));
    CHECK_THAT(report, ContainsSubstring("Bpref"));
    CHECK_THAT(report, ContainsSubstring("MAP"));
    CHECK_THAT(report, ContainsSubstring("topics evaluated: 5"));
    CHECK_THAT(report, ContainsSubstring("* p < 0.0500 vs bm25-title (two-tailed paired t)"));
    CHECK_THAT(report, ContainsSubstring("+ p < 0.0500 vs bm25-rm3 (two-tailed paired t)"));

    // jsonl report: valid lines, 4 aggregates per system, significance rows
    std::set<std::string> systems;
    std::size_t aggregate_rows = 0, significance_rows = 0;
    std::istringstream jsonl(read_file(paths.report_jsonl()));
    std::string line;
    while (std::getline(jsonl, line)) {
        auto row = nlohmann::json::parse(line);
        systems.insert(row.at("system").get<std::string>());
        if (row.contains("topic") && row.at("topic") == "all") ++aggregate_rows;
        if (row.contains("baseline")) {
            ++significance_rows;
            CHECK(row.at("test") == "paired-t");
            CHECK(row.contains("t"));
            CHECK(row.contains("p"));
        }
    }
    CHECK(systems.size() == 5);
    CHECK(aggregate_rows == 20);
    // rm3 vs one baseline, three fused systems vs two, for each of 4 metrics
    CHECK(significance_rows == (1 + 3 * 2) * 4);

    // delta files are sorted by decreasing delta and recomputable
    Qrels qrels = parse_qrels_file(cfg.qrels);
    for (std::size_t m : m_list) {
        std::string tag = fused_tag("P2", 60.0, m);
        Run fused = parse_run_file(paths.fused_run(tag));
        auto deltas = delta_per_topic(fused, baseline, qrels, cfg.delta_ndcg_cut);
        CHECK(deltas.size() == 5);
        for (std::size_t i = 1; i < deltas.size(); ++i)
            CHECK(deltas[i - 1].second >= deltas[i].second);
        CHECK(read_file(paths.delta_tsv(tag)) == render_delta_tsv(deltas));
    }

    // a second run skips every stage and leaves all bytes untouched
    auto before = tree_bytes(cfg.output_dir);
    std::ostringstream skip_log;
    cmd_experiment(cfg, skip_log);
    for (const char* stage : {"index: skipped", "generate: skipped", "retrieve: skipped",
                              "fuse: skipped", "evaluate: skipped", "analyze: skipped"})
        CHECK_THAT(skip_log.str(), ContainsSubstring(stage));
    CHECK(tree_bytes(cfg.output_dir) == before);

    // a deleted stage output is rebuilt bit for bit by its own command
    fs::remove_all(fs::path(cfg.output_dir) / "runs" / "fused");
    std::ostringstream fuse_log;
    cmd_fuse(cfg, fuse_log);
    CHECK_THAT(fuse_log.str(), ContainsSubstring("fuse: 3 fused runs"));
    CHECK(tree_bytes(cfg.output_dir) == before);

    // force overrides the skip
    std::ostringstream force_log;
    cmd_index(cfg, force_log, true);
    CHECK_THAT(force_log.str(), ContainsSubstring("index: 200 documents"));
    CHECK(tree_bytes(cfg.output_dir) == before);

    // the whole pipeline is deterministic across output directories
    ExperimentConfig cfg2 = sandbox.config("out2");
    std::ostringstream log2;
    cmd_experiment(cfg2, log2);
    CHECK(tree_bytes(cfg2.output_dir) == before);
}

TEST_CASE("stages demand their prerequisites by name") {
    ExperimentSandbox sandbox;
    ExperimentConfig cfg = sandbox.config("fresh");
    std::ostringstream log;

    CHECK_THROWS_MATCHES(cmd_retrieve(cfg, log), IoError,
                         MessageMatches(ContainsSubstring("missing artifact") &&
                                        ContainsSubstring("run the 'index' stage first")));
    cmd_index(cfg, log);
    CHECK_THROWS_MATCHES(cmd_retrieve(cfg, log), IoError,
                         MessageMatches(ContainsSubstring("run the 'generate' stage first")));
    CHECK_THROWS_MATCHES(cmd_fuse(cfg, log), IoError,
                         MessageMatches(ContainsSubstring("run the 'retrieve' stage first")));
    CHECK_THROWS_MATCHES(cmd_evaluate(cfg, log), IoError,
                         MessageMatches(ContainsSubstring("run the 'retrieve' stage first")));
    CHECK_THROWS_MATCHES(cmd_analyze(cfg, log), IoError,
                         MessageMatches(ContainsSubstring("run the 'retrieve' stage first")));
}
