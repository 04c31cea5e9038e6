#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "varfuse/error.hpp"
#include "varfuse/retrieval.hpp"

namespace varfuse {

struct RrfParams {
  double k = 60.0;
  std::size_t cutoff = 1000;
};

inline void validate(const RrfParams& p) {
  if (!(p.k >= 0)) throw ConfigError("rrf.k must be >= 0");
  if (p.cutoff < 1) throw ConfigError("rrf.cutoff must be >= 1");
}

// Reciprocal Rank Fusion: score(d) = sum over input rankings containing d
// of 1/(k + rank). Each document's contributions are summed in ascending
// rank order, so the result does not depend on the order the rankings are
// passed in, down to the last bit.
inline Ranking rrf_fuse(std::span<const Ranking> rankings, const RrfParams& params = {}) {
  validate(params);
  if (rankings.empty()) throw ConfigError("rrf_fuse: no input rankings");
  for (const Ranking& r : rankings)
    if (r.topic_id != rankings.front().topic_id)
      throw ConfigError("rrf_fuse: mixed topic_ids '" + rankings.front().topic_id + "' and '" +
                        r.topic_id + "'");

  std::map<std::string, std::vector<std::size_t>> ranks_of;
  for (const Ranking& r : rankings)
    for (std::size_t i = 0; i < r.entries.size(); ++i)
      ranks_of[r.entries[i].doc_id].push_back(i + 1);

  Ranking fused{rankings.front().topic_id, "rrf", {}};
  fused.entries.reserve(ranks_of.size());
  for (auto& [doc_id, ranks] : ranks_of) {
    std::sort(ranks.begin(), ranks.end());
    double score = 0.0;
    for (std::size_t rank : ranks) score += 1.0 / (params.k + static_cast<double>(rank));
    fused.entries.push_back({doc_id, score});
  }
  std::sort(fused.entries.begin(), fused.entries.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (fused.entries.size() > params.cutoff) fused.entries.resize(params.cutoff);
  return fused;
}

// Fuses exactly the first m rankings in variant order.
inline Ranking fuse_first_m(std::span<const Ranking> variant_rankings, std::size_t m,
                            const RrfParams& params = {}) {
  if (m < 1 || m > variant_rankings.size())
    throw ConfigError("fuse_first_m: m=" + std::to_string(m) + " out of range 1.." +
                      std::to_string(variant_rankings.size()));
  return rrf_fuse(variant_rankings.subspan(0, m), params);
}

}  // namespace varfuse
