#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "varfuse/index.hpp"
#include "varfuse/retrieval.hpp"
#include "varfuse/rng.hpp"

using namespace varfuse;
using Catch::Matchers::WithinRel;

namespace {

AnalyzerConfig plain_config() {
    AnalyzerConfig cfg;
    cfg.stemmer = Stemmer::none;
    cfg.stopwords.clear();
    return cfg;
}

std::vector<std::string> doc_order(const Ranking& r) {
    std::vector<std::string> out;
    for (const auto& e : r.entries) out.push_back(e.doc_id);
    return out;
}

InvertedIndex random_index(SplitMix64& rng, std::size_t n_docs) {
    const char* vocab[] = {"alpha", "beta", "gamma", "delta", "epsilon",
                           "zeta", "eta", "theta", "iota", "kappa"};
    std::vector<Document> docs;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::string text;
        std::size_t len = 1 + rng.below(10);
        for (std::size_t t = 0; t < len; ++t) {
            if (!text.empty()) text += ' ';
            text += vocab[rng.below(10)];
        }
        docs.push_back({"doc" + std::to_string(i), text, ""});
    }
    return build_index(docs, plain_config());
}

std::string random_query(SplitMix64& rng) {
    const char* vocab[] = {"alpha", "beta", "gamma", "delta", "epsilon"};
    std::string q;
    std::size_t len = 1 + rng.below(4);
    for (std::size_t t = 0; t < len; ++t) {
        if (!q.empty()) q += ' ';
        q += vocab[rng.below(5)];
    }
    return q;
}

}  // namespace

TEST_CASE("bm25 term score matches reference values") {
    // Reference values computed independently from the scoring formula.
    CHECK_THAT(bm25_term_score(1, 2, 1, 2, 1.5), WithinRel(0.6099695188927519, 1e-12));
    CHECK_THAT(bm25_term_score(2, 2, 1, 3, 2.0), WithinRel(1.3486402228911236, 1e-12));
    Bm25Params tuned{0.9, 0.4, 1000};
    CHECK_THAT(bm25_term_score(3, 10, 5, 50, 8.0, tuned), WithinRel(3.181539343551286, 1e-12));
}

TEST_CASE("bm25 idf stays positive even when every document matches") {
    double s = bm25_term_score(1, 1, 1000, 1000, 1.0);
    CHECK(s > 0.0);
    CHECK_THAT(s, WithinRel(0.0004996252914324798, 1e-12));
}

TEST_CASE("bm25 term score is zero for zero tf") {
    CHECK(bm25_term_score(0, 5, 3, 10, 4.0) == 0.0);
}

TEST_CASE("bm25 term score monotonicity") {
    double prev = 0.0;
    for (int tf = 1; tf <= 8; ++tf) {
        double s = bm25_term_score(tf, 20, 5, 100, 10.0);
        CHECK(s > prev);
        prev = s;
    }
    for (int df = 2; df <= 100; df *= 2) {
        double s = bm25_term_score(2, 20, df, 100, 10.0);
        CHECK(s < bm25_term_score(2, 20, df / 2, 100, 10.0));
    }
    CHECK(bm25_term_score(2, 30, 5, 100, 10.0) < bm25_term_score(2, 10, 5, 100, 10.0));
}

TEST_CASE("bm25 term score rejects invalid arguments") {
    CHECK_THROWS_AS(bm25_term_score(1, 1, 0, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(bm25_term_score(1, 1, 11, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(bm25_term_score(-1, 1, 1, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(bm25_term_score(1, -1, 1, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(bm25_term_score(1, 1, 1, 10, 0.0), ConfigError);
    CHECK_THROWS_AS(bm25_term_score(1, 1, 1, 10, 1.0, Bm25Params{0.0, 0.5, 10}), ConfigError);
    CHECK_THROWS_AS(bm25_term_score(1, 1, 1, 10, 1.0, Bm25Params{1.2, 1.5, 10}), ConfigError);
    CHECK_THROWS_AS(bm25_term_score(1, 1, 1, 10, 1.0, Bm25Params{1.2, 0.5, 0}), ConfigError);
}

TEST_CASE("search scores a toy corpus correctly") {
    std::vector<Document> docs{{"d1", "apple banana", ""}, {"d2", "apple", ""}};
    auto idx = build_index(docs, plain_config());

    auto r = search(idx, "t1", "banana");
    CHECK(r.topic_id == "t1");
    CHECK(r.system_tag == "bm25");
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].doc_id == "d1");
    CHECK_THAT(r.entries[0].score, WithinRel(0.6099695188927519, 1e-12));

    auto multi = search(idx, "t1", "apple banana");
    REQUIRE(multi.entries.size() == 2);
    CHECK(multi.entries[0].doc_id == "d1");
    CHECK_THAT(multi.entries[0].score, WithinRel(0.7704124888714321, 1e-12));
    CHECK(multi.entries[1].doc_id == "d2");
    CHECK_THAT(multi.entries[1].score, WithinRel(0.21110917102457902, 1e-12));
}

TEST_CASE("search distinguishes empty queries from queries with no matches") {
    std::vector<Document> docs{{"d1", "apple", ""}};
    auto idx = build_index(docs, AnalyzerConfig{});

    Warnings w;
    auto empty = search(idx, "t1", "the of and", {}, &w);
    CHECK(empty.entries.empty());
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("zero terms") != std::string::npos);

    w.clear();
    auto nomatch = search(idx, "t1", "zebra", {}, &w);
    CHECK(nomatch.entries.empty());
    CHECK(w.empty());
}

TEST_CASE("search breaks score ties by ascending doc id") {
    std::vector<Document> docs{
        {"zz", "apple", ""}, {"mm", "apple", ""}, {"aa", "apple", ""}};
    auto idx = build_index(docs, plain_config());
    auto r = search(idx, "t1", "apple");
    CHECK(doc_order(r) == std::vector<std::string>{"aa", "mm", "zz"});
    CHECK(r.entries[0].score == r.entries[2].score);
}

TEST_CASE("search truncates at the configured depth") {
    std::vector<Document> docs;
    for (int i = 0; i < 8; ++i)
        docs.push_back({"d" + std::to_string(i), "apple", ""});
    auto idx = build_index(docs, plain_config());
    Bm25Params p;
    p.depth = 3;
    auto r = search(idx, "t1", "apple", p);
    CHECK(r.entries.size() == 3);
}

TEST_CASE("search applies the index analyzer to the query") {
    std::vector<Document> docs{{"d1", "The running dogs", ""}};
    auto idx = build_index(docs, AnalyzerConfig{});
    auto r = search(idx, "t1", "RUNS running");
    REQUIRE(r.entries.size() == 1);  // both query tokens stem to "run"
}

TEST_CASE("search is deterministic") {
    SplitMix64 rng(3);
    auto idx = random_index(rng, 40);
    auto a = search(idx, "t", "alpha beta gamma");
    auto b = search(idx, "t", "alpha beta gamma");
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i] == b.entries[i]);
}

TEST_CASE("weighted search with uniform weights matches plain search order") {
    SplitMix64 rng(17);
    for (int iter = 0; iter < 20; ++iter) {
        auto idx = random_index(rng, 5 + rng.below(40));
        auto query = random_query(rng);
        auto plain = search(idx, "t", query);
        WeightedQuery wq;
        for (const auto& t : analyze(idx.analyzer(), query)) wq.push_back({t, 1.0});
        auto weighted = search_weighted(idx, "t", wq);
        CHECK(doc_order(weighted) == doc_order(plain));
    }
}

TEST_CASE("weighted search ignores zero-weight terms and warns when nothing is left") {
    std::vector<Document> docs{{"d1", "apple banana", ""}, {"d2", "banana", ""}};
    auto idx = build_index(docs, plain_config());

    auto with = search_weighted(idx, "t", {{"apple", 1.0}, {"banana", 0.0}});
    auto without = search_weighted(idx, "t", {{"apple", 1.0}});
    REQUIRE(with.entries.size() == 1);
    CHECK(with.entries == without.entries);

    Warnings w;
    auto none = search_weighted(idx, "t", {{"apple", 0.0}}, {}, &w);
    CHECK(none.entries.empty());
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("no positive weight") != std::string::npos);
}

TEST_CASE("weighted search scales contributions by term weight") {
    std::vector<Document> docs{{"d1", "apple", ""}, {"d2", "banana", ""}};
    auto idx = build_index(docs, plain_config());
    auto r = search_weighted(idx, "t", {{"apple", 3.0}, {"banana", 1.0}});
    REQUIRE(r.entries.size() == 2);
    CHECK(r.entries[0].doc_id == "d1");
    CHECK_THAT(r.entries[0].score, WithinRel(3.0 * r.entries[1].score, 1e-12));
}

TEST_CASE("rm3 with orig_weight 1 reproduces the original query model") {
    std::vector<Document> docs{{"d1", "apple apple banana", ""}, {"d2", "cherry", ""}};
    auto idx = build_index(docs, plain_config());
    Rm3Params rm3;
    rm3.orig_weight = 1.0;
    auto wq = rm3_expand(idx, "apple banana apple", rm3);
    REQUIRE(wq.size() == 2);
    CHECK(wq[0].term == "apple");
    CHECK_THAT(wq[0].weight, WithinRel(2.0 / 3.0, 1e-15));
    CHECK(wq[1].term == "banana");
    CHECK_THAT(wq[1].weight, WithinRel(1.0 / 3.0, 1e-15));
}

TEST_CASE("rm3 with orig_weight 0 returns the renormalized relevance model") {
    std::vector<Document> docs{{"d1", "apple apple banana", ""}, {"d2", "cherry", ""}};
    auto idx = build_index(docs, plain_config());
    Rm3Params rm3;
    rm3.fb_docs = 1;
    rm3.orig_weight = 0.0;
    auto wq = rm3_expand(idx, "apple", rm3);
    REQUIRE(wq.size() == 2);
    CHECK(wq[0].term == "apple");
    CHECK_THAT(wq[0].weight, WithinRel(2.0 / 3.0, 1e-12));
    CHECK(wq[1].term == "banana");
    CHECK_THAT(wq[1].weight, WithinRel(1.0 / 3.0, 1e-12));
}

TEST_CASE("rm3 interpolates original and feedback models") {
    std::vector<Document> docs{{"d1", "apple apple banana", ""}, {"d2", "cherry", ""}};
    auto idx = build_index(docs, plain_config());
    Rm3Params rm3;
    rm3.fb_docs = 1;
    rm3.orig_weight = 0.5;
    auto wq = rm3_expand(idx, "apple", rm3);
    REQUIRE(wq.size() == 2);
    CHECK(wq[0].term == "apple");
    CHECK_THAT(wq[0].weight, WithinRel(5.0 / 6.0, 1e-12));
    CHECK(wq[1].term == "banana");
    CHECK_THAT(wq[1].weight, WithinRel(1.0 / 6.0, 1e-12));
}

TEST_CASE("rm3 truncates the relevance model to fb_terms before renormalizing") {
    std::vector<Document> docs{{"d1", "apple apple banana", ""}, {"d2", "cherry", ""}};
    auto idx = build_index(docs, plain_config());
    Rm3Params rm3;
    rm3.fb_docs = 1;
    rm3.fb_terms = 1;
    rm3.orig_weight = 0.5;
    auto wq = rm3_expand(idx, "apple", rm3);
    REQUIRE(wq.size() == 1);
    CHECK(wq[0].term == "apple");
    CHECK_THAT(wq[0].weight, WithinRel(1.0, 1e-12));
}

TEST_CASE("rm3 weights always sum to one") {
    SplitMix64 rng(23);
    for (double lambda : {0.0, 0.3, 0.5, 0.9, 1.0}) {
        for (int iter = 0; iter < 10; ++iter) {
            auto idx = random_index(rng, 10 + rng.below(30));
            Rm3Params rm3;
            rm3.fb_docs = 1 + rng.below(5);
            rm3.fb_terms = 1 + rng.below(8);
            rm3.orig_weight = lambda;
            auto wq = rm3_expand(idx, random_query(rng), rm3);
            REQUIRE(!wq.empty());
            double sum = 0.0;
            for (const auto& wt : wq) {
                CHECK(wt.weight > 0.0);
                sum += wt.weight;
            }
            CHECK_THAT(sum, WithinRel(1.0, 1e-9));
            for (std::size_t i = 1; i < wq.size(); ++i) {
                bool ordered = wq[i - 1].weight > wq[i].weight ||
                               (wq[i - 1].weight == wq[i].weight && wq[i - 1].term < wq[i].term);
                CHECK(ordered);
            }
        }
    }
}

TEST_CASE("rm3 at orig_weight 1 leaves the retrieval order unchanged") {
    SplitMix64 rng(29);
    for (int iter = 0; iter < 100; ++iter) {
        auto idx = random_index(rng, 5 + rng.below(50));
        auto query = random_query(rng);
        Rm3Params rm3;
        rm3.fb_docs = 1 + rng.below(10);
        rm3.fb_terms = 1 + rng.below(10);
        rm3.orig_weight = 1.0;
        auto wq = rm3_expand(idx, query, rm3);
        auto expanded = search_weighted(idx, "t", wq);
        auto plain = search(idx, "t", query);
        CHECK(doc_order(expanded) == doc_order(plain));
    }
}

TEST_CASE("rm3 falls back to the original query when feedback is unavailable") {
    std::vector<Document> docs{{"d1", "apple", ""}};
    auto idx = build_index(docs, plain_config());

    Warnings w;
    auto wq = rm3_expand(idx, "zebra yak", {}, {}, &w);
    REQUIRE(wq.size() == 2);
    CHECK(wq[0].term == "yak");
    CHECK(wq[1].term == "zebra");
    CHECK_THAT(wq[0].weight + wq[1].weight, WithinRel(1.0, 1e-12));
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("unexpanded") != std::string::npos);
}

TEST_CASE("rm3 returns nothing for a query that analyzes to zero terms") {
    std::vector<Document> docs{{"d1", "apple", ""}};
    auto idx = build_index(docs, AnalyzerConfig{});
    Warnings w;
    auto wq = rm3_expand(idx, "the of", {}, {}, &w);
    CHECK(wq.empty());
    REQUIRE(w.size() == 1);
}

TEST_CASE("rm3 rejects invalid parameters") {
    std::vector<Document> docs{{"d1", "apple", ""}};
    auto idx = build_index(docs, plain_config());
    CHECK_THROWS_AS(rm3_expand(idx, "apple", Rm3Params{0, 10, 0.5}), ConfigError);
    CHECK_THROWS_AS(rm3_expand(idx, "apple", Rm3Params{10, 0, 0.5}), ConfigError);
    CHECK_THROWS_AS(rm3_expand(idx, "apple", Rm3Params{10, 10, 1.5}), ConfigError);
    CHECK_THROWS_AS(rm3_expand(idx, "apple", Rm3Params{10, 10, -0.1}), ConfigError);
}

TEST_CASE("searching an empty index yields empty rankings") {
    auto idx = build_index(std::vector<Document>{}, plain_config());
    auto r = search(idx, "t1", "anything");
    CHECK(r.entries.empty());
}
