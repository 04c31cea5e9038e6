#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "varfuse/analyzer.hpp"
#include "varfuse/error.hpp"
#include "varfuse/index.hpp"
#include "varfuse/metrics.hpp"
#include "varfuse/porter.hpp"
#include "varfuse/querygen.hpp"
#include "varfuse/rng.hpp"

namespace varfuse {

// Recipe for a seeded synthetic test collection with constructed relevance.
// Each topic owns 8 disjoint latent vocabulary terms: the title exposes 2,
// the description 3 more, the narrative the remaining 3. Relevant documents
// sample from a per-document subset of the latent terms (so title-only
// retrieval is deliberately imperfect), a quarter of the nonrelevant
// documents are distractors that mention title terms, and half of the
// nonrelevant documents stay unjudged.
struct SynthSpec {
  std::size_t num_topics = 20;
  std::size_t docs_per_topic = 100;
  std::size_t relevant_per_topic = 10;
  std::size_t vocabulary = 500;
  double noise = 0.3;  // chance a token of a relevant doc comes from the background
  std::uint64_t seed = 42;
};

struct SynthCollection {
  std::vector<Document> corpus;
  std::vector<Topic> topics;
  Qrels qrels;
};

namespace synth_detail {

constexpr std::size_t kLatentPerTopic = 8;
constexpr std::size_t kDocTokens = 12;
constexpr std::size_t kMinBackground = 16;

// Deterministic analyzer-stable vocabulary: CVCVC words that survive the
// analyzer unchanged (not stopwords, fixed points of the stemmer), so
// fixture queries re-analyze to exactly the indexed terms.
inline std::vector<std::string> build_vocabulary(std::size_t size) {
  static const char consonants[] = {'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 't', 'z'};
  static const char finals[] = {'b', 'd', 'f', 'k', 'l', 'm', 'n', 'p', 'r', 't'};
  static const char vowels[] = {'a', 'e', 'i', 'o', 'u'};
  AnalyzerConfig cfg;
  std::vector<std::string> words;
  words.reserve(size);
  for (char c1 : consonants)
    for (char v1 : vowels)
      for (char c2 : consonants)
        for (char v2 : vowels)
          for (char c3 : finals) {
            if (words.size() == size) return words;
            std::string w{c1, v1, c2, v2, c3};
            if (cfg.stopwords.contains(w)) continue;
            if (porter_stem(w) != w) continue;
            words.push_back(std::move(w));
          }
  throw ConfigError("synthfixture: vocabulary of " + std::to_string(size) +
                    " exceeds the generatable word inventory");
}

inline std::string zero_pad(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  return s.size() >= width ? s : std::string(width - s.size(), '0') + s;
}

}  // namespace synth_detail

inline void validate(const SynthSpec& spec) {
  if (spec.num_topics < 1) throw ConfigError("synthfixture: num_topics must be >= 1");
  if (spec.docs_per_topic < 1) throw ConfigError("synthfixture: docs_per_topic must be >= 1");
  if (spec.relevant_per_topic < 1) throw ConfigError("synthfixture: relevant_per_topic must be >= 1");
  if (spec.relevant_per_topic > spec.docs_per_topic)
    throw ConfigError("synthfixture: relevant_per_topic exceeds docs_per_topic");
  if (!(spec.noise >= 0.0 && spec.noise < 1.0)) throw ConfigError("synthfixture: noise must be in [0,1)");
  std::size_t needed = spec.num_topics * synth_detail::kLatentPerTopic + synth_detail::kMinBackground;
  if (spec.vocabulary < needed)
    throw ConfigError("synthfixture: vocabulary too small, need at least " + std::to_string(needed) +
                      " words for " + std::to_string(spec.num_topics) + " topics");
}

inline SynthCollection generate_collection(const SynthSpec& spec) {
  namespace d = synth_detail;
  validate(spec);
  std::vector<std::string> words = d::build_vocabulary(spec.vocabulary);
  const std::size_t background_start = spec.num_topics * d::kLatentPerTopic;
  const std::size_t background_size = words.size() - background_start;

  SplitMix64 rng(spec.seed);
  SynthCollection out;
  const std::size_t topic_width = std::max<std::size_t>(2, std::to_string(spec.num_topics).size());
  const std::size_t doc_width = std::max<std::size_t>(5, std::to_string(spec.num_topics * spec.docs_per_topic).size());

  std::size_t doc_counter = 0;
  for (std::size_t t = 0; t < spec.num_topics; ++t) {
    const std::string* latent = &words[t * d::kLatentPerTopic];

    Topic topic;
    topic.topic_id = "t" + d::zero_pad(t + 1, topic_width);
    topic.title = latent[0] + " " + latent[1];
    topic.description = "about " + latent[2] + " and " + latent[3] + " and " + latent[4];
    topic.narrative = "more about " + latent[5] + " and " + latent[6] + " and " + latent[7];
    out.topics.push_back(topic);

    // randomize which positions in the topic's block are the relevant docs,
    // so doc_id order carries no relevance signal
    std::vector<std::size_t> order(spec.docs_per_topic);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<bool> is_relevant(spec.docs_per_topic, false);
    for (std::size_t i = 0; i < spec.relevant_per_topic; ++i) is_relevant[order[i]] = true;

    auto& judgments = out.qrels.topics[topic.topic_id];
    for (std::size_t j = 0; j < spec.docs_per_topic; ++j) {
      Document doc;
      doc.doc_id = "d" + d::zero_pad(++doc_counter, doc_width);
      std::vector<std::string> tokens;
      tokens.reserve(d::kDocTokens);
      if (is_relevant[j]) {
        std::size_t subset_size = 3 + rng.below(3);  // 3..5 of the 8 latent terms
        std::vector<std::size_t> pick(d::kLatentPerTopic);
        for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
        for (std::size_t i = pick.size(); i > 1; --i)
          std::swap(pick[i - 1], pick[rng.below(i)]);
        pick.resize(subset_size);
        for (std::size_t k = 0; k < d::kDocTokens; ++k) {
          if (rng.next_double() < spec.noise)
            tokens.push_back(words[background_start + rng.below(background_size)]);
          else
            tokens.push_back(latent[pick[rng.below(subset_size)]]);
        }
        judgments[doc.doc_id] = subset_size >= 4 ? 2 : 1;
      } else {
        for (std::size_t k = 0; k < d::kDocTokens; ++k)
          tokens.push_back(words[background_start + rng.below(background_size)]);
        if (rng.below(4) == 0) {
          std::size_t injected = 1 + rng.below(2);
          for (std::size_t k = 0; k < injected; ++k) tokens[k] = latent[rng.below(2)];
        }
        if (rng.below(2) == 0) judgments[doc.doc_id] = 0;
      }
      std::string text;
      for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (k > 0) text += ' ';
        text += tokens[k];
      }
      doc.text = std::move(text);
      out.corpus.push_back(std::move(doc));
    }
  }
  return out;
}

}  // namespace varfuse
