#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "varfuse/analyzer.hpp"
#include "varfuse/error.hpp"
#include "varfuse/index.hpp"

namespace varfuse {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  std::size_t depth = 1000;
};

struct Rm3Params {
  std::size_t fb_docs = 10;
  std::size_t fb_terms = 10;
  double orig_weight = 0.5;  // interpolation weight of the original query model
};

inline void validate(const Bm25Params& p) {
  if (!(p.k1 > 0)) throw ConfigError("bm25.k1 must be > 0");
  if (!(p.b >= 0 && p.b <= 1)) throw ConfigError("bm25.b must be in [0,1]");
  if (p.depth < 1) throw ConfigError("bm25.depth must be >= 1");
}

inline void validate(const Rm3Params& p) {
  if (p.fb_docs < 1) throw ConfigError("rm3.fb_docs must be >= 1");
  if (p.fb_terms < 1) throw ConfigError("rm3.fb_terms must be >= 1");
  if (!(p.orig_weight >= 0 && p.orig_weight <= 1)) throw ConfigError("rm3.orig_weight must be in [0,1]");
}

struct ScoredDoc {
  std::string doc_id;
  double score;

  bool operator==(const ScoredDoc&) const = default;
};

// One ranked list for one topic; ranks are implicit 1..n over entries.
struct Ranking {
  std::string topic_id;
  std::string system_tag;
  std::vector<ScoredDoc> entries;
};

// A run: one ranking per topic, keyed (and therefore serialized) by topic_id.
using Run = std::map<std::string, Ranking>;

struct WeightedTerm {
  std::string term;
  double weight;

  bool operator==(const WeightedTerm&) const = default;
};

using WeightedQuery = std::vector<WeightedTerm>;

inline double bm25_term_score(std::int64_t tf, std::int64_t dl, std::int64_t df, std::int64_t N,
                              double avgdl, const Bm25Params& params = {}) {
  validate(params);
  if (!(avgdl > 0)) throw ConfigError("bm25: avgdl must be > 0");
  if (tf < 0 || dl < 0) throw ConfigError("bm25: tf and dl must be >= 0");
  if (df < 1 || N < 1 || df > N) throw ConfigError("bm25: need 1 <= df <= N");
  double idf = std::log(1.0 + (static_cast<double>(N - df) + 0.5) / (static_cast<double>(df) + 0.5));
  double tfd = static_cast<double>(tf);
  double tf_part = tfd * (params.k1 + 1.0) /
                   (tfd + params.k1 * (1.0 - params.b + params.b * static_cast<double>(dl) / avgdl));
  return idf * tf_part;
}

namespace retrieval_detail {

// Shared scoring core. Accumulation order is fixed (terms in the given
// order, postings by doc ordinal), so identical inputs give bit-identical
// scores on every platform.
inline void score_into(const InvertedIndex& idx, std::span<const WeightedTerm> terms,
                       const Bm25Params& params, Ranking& out) {
  const std::size_t n_docs = idx.num_docs();
  if (n_docs == 0) return;
  const double avgdl = idx.avg_doc_len();
  const auto n = static_cast<std::int64_t>(n_docs);

  std::vector<double> acc(n_docs, 0.0);
  std::vector<unsigned char> touched(n_docs, 0);
  for (const auto& [term, weight] : terms) {
    if (weight == 0.0) continue;
    auto posts = idx.postings(std::string_view(term));
    if (posts.empty()) continue;
    const auto df = static_cast<std::int64_t>(posts.size());
    const double idf = std::log(1.0 + (static_cast<double>(n - df) + 0.5) / (static_cast<double>(df) + 0.5));
    for (const Posting& post : posts) {
      const double tf = post.term_frequency;
      const double dl = idx.doc_len(post.doc_ordinal);
      acc[post.doc_ordinal] +=
          weight * idf * tf * (params.k1 + 1.0) /
          (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
      touched[post.doc_ordinal] = 1;
    }
  }

  std::vector<std::uint32_t> candidates;
  for (std::uint32_t d = 0; d < n_docs; ++d)
    if (touched[d]) candidates.push_back(d);
  std::sort(candidates.begin(), candidates.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (acc[a] != acc[b]) return acc[a] > acc[b];
    return idx.doc_id(a) < idx.doc_id(b);
  });
  if (candidates.size() > params.depth) candidates.resize(params.depth);

  out.entries.reserve(candidates.size());
  for (std::uint32_t d : candidates) out.entries.push_back({idx.doc_id(d), acc[d]});
}

}  // namespace retrieval_detail

// BM25 over the analyzed query terms (with multiplicity). A query that
// analyzes to zero terms yields an empty ranking plus a warning, which is
// how callers tell it apart from a query that simply matched nothing.
inline Ranking search(const InvertedIndex& idx, std::string topic_id, std::string_view query,
                      const Bm25Params& params = {}, Warnings* warnings = nullptr) {
  validate(params);
  Ranking out{std::move(topic_id), "bm25", {}};
  std::vector<std::string> terms = analyze(idx.analyzer(), query);
  if (terms.empty()) {
    warn(warnings, "topic " + out.topic_id + ": query analyzed to zero terms, empty ranking");
    return out;
  }
  WeightedQuery wq;
  wq.reserve(terms.size());
  for (auto& t : terms) wq.push_back({std::move(t), 1.0});
  retrieval_detail::score_into(idx, wq, params, out);
  return out;
}

// As search, but each term's contribution is scaled by its weight.
inline Ranking search_weighted(const InvertedIndex& idx, std::string topic_id,
                               const WeightedQuery& query, const Bm25Params& params = {},
                               Warnings* warnings = nullptr) {
  validate(params);
  Ranking out{std::move(topic_id), "bm25w", {}};
  bool any = false;
  for (const auto& wt : query)
    if (wt.weight != 0.0) any = true;
  if (!any) {
    warn(warnings, "topic " + out.topic_id + ": weighted query carries no positive weight, empty ranking");
    return out;
  }
  retrieval_detail::score_into(idx, query, params, out);
  return out;
}

// RM3 pseudo-relevance feedback. Returns a weighted query whose weights sum
// to 1: orig_weight * P(t|q) + (1 - orig_weight) * P(t|RM), where the
// relevance model is estimated from the top fb_docs of the initial BM25
// ranking. Entries are ordered by descending weight, ties by term.
inline WeightedQuery rm3_expand(const InvertedIndex& idx, std::string_view query,
                                const Rm3Params& rm3 = {}, const Bm25Params& bm25 = {},
                                Warnings* warnings = nullptr) {
  validate(rm3);
  validate(bm25);
  std::vector<std::string> terms = analyze(idx.analyzer(), query);
  if (terms.empty()) {
    warn(warnings, "rm3: query analyzed to zero terms, nothing to expand");
    return {};
  }

  std::map<std::string, double> orig;
  for (const auto& t : terms) orig[t] += 1.0 / static_cast<double>(terms.size());

  auto uniform_fallback = [&](const std::string& reason) {
    warn(warnings, "rm3: " + reason + ", returning original query terms unexpanded");
    WeightedQuery wq;
    for (const auto& [t, w] : orig) wq.push_back({t, w});
    std::sort(wq.begin(), wq.end(), [](const WeightedTerm& a, const WeightedTerm& b) {
      if (a.weight != b.weight) return a.weight > b.weight;
      return a.term < b.term;
    });
    return wq;
  };

  Ranking initial = search(idx, "rm3-feedback", query, bm25, nullptr);
  if (initial.entries.empty()) return uniform_fallback("initial ranking is empty");

  const std::size_t fb = std::min(rm3.fb_docs, initial.entries.size());
  double total = 0.0;
  for (std::size_t i = 0; i < fb; ++i) total += initial.entries[i].score;
  if (!(total > 0)) return uniform_fallback("feedback scores sum to zero");

  std::map<std::string, double> rm;
  for (std::size_t i = 0; i < fb; ++i) {
    const auto ord = idx.doc_ordinal(initial.entries[i].doc_id);
    const double doc_weight = initial.entries[i].score / total;
    const double dl = idx.doc_len(ord);
    for (const auto& [term_id, tf] : idx.doc_terms(ord))
      rm[idx.term(term_id)] += doc_weight * static_cast<double>(tf) / dl;
  }

  std::vector<std::pair<std::string, double>> expansion(rm.begin(), rm.end());
  std::sort(expansion.begin(), expansion.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (expansion.size() > rm3.fb_terms) expansion.resize(rm3.fb_terms);
  double rm_total = 0.0;
  for (const auto& [t, w] : expansion) rm_total += w;

  std::map<std::string, double> combined;
  if (rm3.orig_weight > 0)
    for (const auto& [t, w] : orig) combined[t] += rm3.orig_weight * w;
  if (rm3.orig_weight < 1 && rm_total > 0)
    for (const auto& [t, w] : expansion) combined[t] += (1.0 - rm3.orig_weight) * (w / rm_total);

  WeightedQuery wq;
  wq.reserve(combined.size());
  for (const auto& [t, w] : combined) wq.push_back({t, w});
  std::sort(wq.begin(), wq.end(), [](const WeightedTerm& a, const WeightedTerm& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.term < b.term;
  });
  return wq;
}

}  // namespace varfuse
