#pragma once

// Shared helpers for the test suite: a small hand-checked evaluation fixture
// and generators for randomized property tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "varfuse/fusion.hpp"
#include "varfuse/metrics.hpp"
#include "varfuse/retrieval.hpp"
#include "varfuse/rng.hpp"

namespace vftest {

// Five topics over a 20-document collection, mixing graded, zero and
// unjudged documents.  All expected metric values below were computed by
// hand / with an independent reference implementation.
inline varfuse::Qrels eval_fixture_qrels() {
    varfuse::Qrels q;
    q.topics["t1"] = {{"d01", 2}, {"d02", 1}, {"d03", 0}, {"d04", 0}, {"d05", 1}};
    q.topics["t2"] = {{"d02", 1}, {"d06", 0}, {"d07", 2}, {"d09", 0}, {"d10", 0}};
    q.topics["t3"] = {{"d11", 1}};
    q.topics["t4"] = {{"d12", 2}, {"d13", 1}, {"d14", 1}, {"d15", 0}};
    q.topics["t5"] = {{"d16", 1}, {"d17", 1}, {"d18", 0}, {"d19", 0}, {"d20", 0}};
    return q;
}

inline varfuse::Ranking make_ranking(const std::string& topic,
                                     const std::vector<std::string>& docs,
                                     const std::string& tag = "fixture") {
    varfuse::Ranking r;
    r.topic_id = topic;
    r.system_tag = tag;
    double score = static_cast<double>(docs.size());
    for (const auto& d : docs) {
        r.entries.push_back({d, score});
        score -= 1.0;
    }
    return r;
}

inline varfuse::Run eval_fixture_run() {
    varfuse::Run run;
    run["t1"] = make_ranking("t1", {"d01", "d03", "d06", "d02", "d05", "d07", "d04", "d08"});
    run["t2"] = make_ranking("t2", {"d09", "d07", "d11", "d02", "d12"});
    run["t3"] = make_ranking("t3", {"d13", "d11", "d14"});
    run["t4"] = make_ranking("t4", {"d12", "d13", "d14", "d15", "d16"});
    run["t5"] = make_ranking("t5", {"d18", "d19", "d20", "d17", "d16", "d01"});
    return run;
}

struct EvalFixtureExpected {
    std::vector<std::string> topic_ids{"t1", "t2", "t3", "t4", "t5"};
    std::vector<double> p10{0.3, 0.2, 0.1, 0.3, 0.2};
    double p10_mean = 0.22;
    std::vector<double> ndcg10{0.8999018141796293, 0.6433224083306327,
                               0.6309297535714575, 1.0, 0.5012658353418871};
    double ndcg10_mean = 0.7350839622847214;
    std::vector<double> ap{0.7, 0.5, 0.5, 1.0, 0.325};
    double ap_mean = 0.605;
    std::vector<double> bpref{2.0 / 3.0, 0.5, 1.0, 1.0, 0.0};
    double bpref_mean = 0.6333333333333333;
};

// Random ranking over a doc universe d00..d<n-1>, strictly decreasing scores.
inline varfuse::Ranking random_ranking(varfuse::SplitMix64& rng,
                                       const std::string& topic,
                                       std::size_t universe,
                                       std::size_t max_len) {
    std::vector<std::string> docs;
    for (std::size_t i = 0; i < universe; ++i) {
        std::string id = "d" + std::to_string(i);
        if (id.size() < 3) id.insert(1, "0");
        docs.push_back(id);
    }
    for (std::size_t i = docs.size(); i > 1; --i)
        std::swap(docs[i - 1], docs[rng.below(i)]);
    std::size_t len = 1 + rng.below(std::min(max_len, docs.size()));
    docs.resize(len);
    return make_ranking(topic, docs, "rand");
}

// Brute-force RRF oracle: independent of fusion.hpp internals.
inline varfuse::Ranking rrf_oracle(const std::vector<varfuse::Ranking>& inputs,
                                   double k, std::size_t cutoff) {
    std::map<std::string, double> score;
    for (const auto& r : inputs) {
        for (std::size_t i = 0; i < r.entries.size(); ++i)
            score[r.entries[i].doc_id] += 1.0 / (k + static_cast<double>(i + 1));
    }
    std::vector<varfuse::ScoredDoc> out;
    for (const auto& [doc, s] : score) out.push_back({doc, s});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (out.size() > cutoff) out.resize(cutoff);
    varfuse::Ranking r;
    r.topic_id = inputs.empty() ? "" : inputs.front().topic_id;
    r.system_tag = "oracle";
    r.entries = std::move(out);
    return r;
}

// Brute-force metric oracles, written independently of metrics.hpp.
inline int oracle_grade(const std::map<std::string, int>& judgments, const std::string& doc) {
    auto it = judgments.find(doc);
    return it == judgments.end() ? -1 : it->second;
}

inline double oracle_precision_at(const std::vector<std::string>& docs,
                                  const std::map<std::string, int>& judgments,
                                  std::size_t k) {
    std::size_t rel = 0;
    for (std::size_t i = 0; i < docs.size() && i < k; ++i)
        if (oracle_grade(judgments, docs[i]) > 0) ++rel;
    return static_cast<double>(rel) / static_cast<double>(k);
}

inline double oracle_ndcg_at(const std::vector<std::string>& docs,
                             const std::map<std::string, int>& judgments,
                             std::size_t k) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < docs.size() && i < k; ++i) {
        int g = oracle_grade(judgments, docs[i]);
        if (g > 0) dcg += g / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> grades;
    for (const auto& [doc, g] : judgments)
        if (g > 0) grades.push_back(g);
    std::sort(grades.rbegin(), grades.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < grades.size() && i < k; ++i)
        idcg += grades[i] / std::log2(static_cast<double>(i) + 2.0);
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

inline double oracle_average_precision(const std::vector<std::string>& docs,
                                       const std::map<std::string, int>& judgments,
                                       std::size_t depth) {
    std::size_t r_total = 0;
    for (const auto& [doc, g] : judgments)
        if (g > 0) ++r_total;
    if (r_total == 0) return 0.0;
    std::size_t rel_seen = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < docs.size() && i < depth; ++i) {
        if (oracle_grade(judgments, docs[i]) > 0) {
            ++rel_seen;
            sum += static_cast<double>(rel_seen) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(r_total);
}

inline double oracle_bpref(const std::vector<std::string>& docs,
                           const std::map<std::string, int>& judgments) {
    std::size_t r_total = 0, n_total = 0;
    for (const auto& [doc, g] : judgments)
        (g > 0 ? r_total : n_total)++;
    if (r_total == 0) return 0.0;
    std::size_t n_above = 0;
    double sum = 0.0;
    for (const auto& doc : docs) {
        int g = oracle_grade(judgments, doc);
        if (g < 0) continue;
        if (g > 0) {
            if (n_total == 0) {
                sum += 1.0;
            } else {
                double frac = static_cast<double>(std::min(n_above, r_total)) /
                              static_cast<double>(std::min(r_total, n_total));
                sum += 1.0 - frac;
            }
        } else {
            ++n_above;
        }
    }
    return sum / static_cast<double>(r_total);
}

// Random judgments for a doc universe: each doc unjudged / 0 / 1 / 2.
inline std::map<std::string, int> random_judgments(varfuse::SplitMix64& rng,
                                                   std::size_t universe) {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < universe; ++i) {
        std::string id = "d" + std::to_string(i);
        if (id.size() < 3) id.insert(1, "0");
        switch (rng.below(4)) {
            case 0: break;
            case 1: out[id] = 0; break;
            case 2: out[id] = 1; break;
            case 3: out[id] = 2; break;
        }
    }
    return out;
}

inline std::vector<std::string> doc_ids_of(const varfuse::Ranking& r) {
    std::vector<std::string> out;
    for (const auto& e : r.entries) out.push_back(e.doc_id);
    return out;
}

}  // namespace vftest
