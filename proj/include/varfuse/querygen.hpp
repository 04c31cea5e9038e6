#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varfuse/analyzer.hpp"
#include "varfuse/error.hpp"
#include "varfuse/rng.hpp"

namespace varfuse {

struct Topic {
  std::string topic_id;
  std::string title;
  std::string description;
  std::string narrative;

  bool operator==(const Topic&) const = default;
};

struct P3Example {
  std::string title;
  std::vector<std::string> queries;

  bool operator==(const P3Example&) const = default;
};

struct PromptStrategy {
  enum Kind { P1, P2, P3 };
  Kind kind = P1;
  std::vector<P3Example> examples;  // P3 only
};

inline std::string to_string(PromptStrategy::Kind kind) {
  switch (kind) {
    case PromptStrategy::P1: return "P1";
    case PromptStrategy::P2: return "P2";
    case PromptStrategy::P3: return "P3";
  }
  return "P1";
}

inline PromptStrategy::Kind strategy_from_string(std::string_view s) {
  if (s == "P1" || s == "p1") return PromptStrategy::P1;
  if (s == "P2" || s == "p2") return PromptStrategy::P2;
  if (s == "P3" || s == "p3") return PromptStrategy::P3;
  throw ConfigError("unknown prompt strategy '" + std::string(s) + "' (expected P1, P2 or P3)");
}

// Invented stand-in examples shipped with the toolkit; real user query
// variants (e.g. from UQV collections) can be supplied via config instead.
inline std::vector<P3Example> default_p3_examples() {
  return {
      {"community gardens",
       {"community garden benefits", "urban community gardening", "how to start a community garden"}},
      {"electric vehicle charging",
       {"public ev charging stations", "electric car charging cost", "fast charging networks"}},
  };
}

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct Prompt {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::uint64_t seed = 42;
  std::size_t max_queries = 100;
  // Slot copies for the offline stub; never sent over the wire. The stub
  // only sees what the prompt disclosed about the topic, so P1/P2/P3
  // behave differently through the same client interface.
  std::string title_slot;
  std::string context_slot;
};

namespace querygen_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace querygen_detail

inline Prompt build_prompt(const Topic& topic, const PromptStrategy& strategy, std::size_t n = 100,
                           bool system_message_split = false) {
  if (topic.title.empty()) throw ConfigError("topic " + topic.topic_id + " has an empty title");
  if (n < 1) throw ConfigError("build_prompt: n must be >= 1");
  if (strategy.kind == PromptStrategy::P3) {
    if (strategy.examples.empty()) throw ConfigError("strategy P3 requires at least one example");
    for (const P3Example& ex : strategy.examples) {
      if (ex.title.empty()) throw ConfigError("P3 example with empty title");
      if (ex.queries.empty()) throw ConfigError("P3 example '" + ex.title + "' has no queries");
    }
  }

  std::vector<std::string> blocks;
  blocks.push_back("You are a generator of search query variants.");
  std::string count = n == 100 ? "one hundred" : std::to_string(n);
  blocks.push_back("Generate " + count + " keyword queries about " + topic.title + ".");
  std::string context;
  if (strategy.kind == PromptStrategy::P2) {
    context = querygen_detail::trim(topic.description + " " + topic.narrative);
    if (!context.empty()) blocks.push_back(context);
  }
  if (strategy.kind == PromptStrategy::P3) {
    for (const P3Example& ex : strategy.examples) {
      std::string sentence = "Example queries for the topic about " + ex.title + " include ";
      for (std::size_t i = 0; i < ex.queries.size(); ++i) {
        if (i > 0) sentence += ", ";
        sentence += ex.queries[i];
      }
      sentence += ".";
      blocks.push_back(std::move(sentence));
    }
  }
  blocks.push_back("Your reply is a numbered list of search queries.");

  Prompt prompt;
  prompt.max_queries = n;
  prompt.title_slot = topic.title;
  prompt.context_slot = context;
  std::size_t first_user = 0;
  if (system_message_split) {
    prompt.messages.push_back({"system", blocks[0]});
    first_user = 1;
  }
  std::string user;
  for (std::size_t i = first_user; i < blocks.size(); ++i) {
    if (i > first_user) user += "\n\n";
    user += blocks[i];
  }
  prompt.messages.push_back({"user", std::move(user)});
  return prompt;
}

// Extracts the entries of a numbered list ("1. q" or "1) q"), stripping the
// prefix, surrounding whitespace, and one layer of symmetric quotes. Lines
// that are not list entries are ignored. Parsing nothing out of the text is
// an error that carries the raw text, so failed replies can be logged.
inline std::vector<std::string> parse_numbered_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t digits = i;
    while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
    if (digits == i || digits >= line.size()) continue;
    if (line[digits] != '.' && line[digits] != ')') continue;
    std::string q = querygen_detail::trim(line.substr(digits + 1));
    if (q.size() >= 2 && q.front() == q.back() && (q.front() == '"' || q.front() == '\''))
      q = querygen_detail::trim(q.substr(1, q.size() - 2));
    if (!q.empty()) out.push_back(std::move(q));
  }
  if (out.empty())
    throw ParseError("no numbered queries found in reply: \"" + std::string(text) + "\"");
  return out;
}

inline std::string render_numbered_list(std::span<const std::string> queries) {
  std::string out;
  for (std::size_t i = 0; i < queries.size(); ++i)
    out += std::to_string(i + 1) + ". " + queries[i] + "\n";
  return out;
}

// Deterministic offline variant generator: each variant samples 2..5 terms
// from the analyzed title and description, title terms weighted higher.
inline std::vector<std::string> stub_generate(const Topic& topic, std::uint64_t seed, std::size_t n) {
  if (n < 1) throw ConfigError("stub_generate: n must be >= 1");
  AnalyzerConfig cfg;
  std::vector<std::string> title_terms = analyze(cfg, topic.title);
  if (title_terms.empty())
    throw ConfigError("stub_generate: title of topic " + topic.topic_id + " analyzed to zero terms");
  std::vector<std::string> context_terms = analyze(cfg, topic.description);

  std::vector<std::pair<std::string, std::uint64_t>> pool;
  auto add = [&](const std::string& term, std::uint64_t weight) {
    for (auto& [t, w] : pool)
      if (t == term) return;
    pool.emplace_back(term, weight);
  };
  for (const auto& t : title_terms) add(t, 3);
  for (const auto& t : context_terms) add(t, 1);

  SplitMix64 rng(fnv1a64(topic.title + "\x1e" + topic.description) ^ (seed * 0x9e3779b97f4a7c15ull));
  std::vector<std::string> queries;
  queries.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t len = std::min<std::size_t>(2 + rng.below(4), pool.size());
    auto remaining = pool;
    std::string q;
    for (std::size_t pick = 0; pick < len; ++pick) {
      std::uint64_t total = 0;
      for (const auto& [t, w] : remaining) total += w;
      std::uint64_t r = rng.below(total);
      std::size_t chosen = 0;
      for (; chosen < remaining.size(); ++chosen) {
        if (r < remaining[chosen].second) break;
        r -= remaining[chosen].second;
      }
      if (!q.empty()) q += ' ';
      q += remaining[chosen].first;
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

// Transport for chat completions. Implementations: StubChatClient below
// (offline, deterministic) and HttpChatClient in chat_client.hpp.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const Prompt& prompt) = 0;
  virtual std::string model_id() const = 0;
};

class StubChatClient : public ChatClient {
 public:
  std::string complete(const Prompt& prompt) override {
    Topic shadow{"stub", prompt.title_slot, prompt.context_slot, ""};
    return render_numbered_list(stub_generate(shadow, prompt.seed, prompt.max_queries));
  }
  std::string model_id() const override { return "offline-stub"; }
};

struct QueryVariantSet {
  std::string topic_id;
  std::string strategy;  // "P1", "P2" or "P3"
  std::string model_id;
  std::uint64_t seed = 42;
  std::vector<std::string> queries;  // generation order; "first m" semantics rely on it

  bool operator==(const QueryVariantSet&) const = default;
};

struct GenerateOptions {
  std::size_t n = 100;
  std::uint64_t seed = 42;
  double temperature = 0.0;
  bool system_message_split = false;
};

inline QueryVariantSet generate_variants(ChatClient& client, const Topic& topic,
                                         const PromptStrategy& strategy,
                                         const GenerateOptions& opts = {},
                                         Warnings* warnings = nullptr) {
  Prompt prompt = build_prompt(topic, strategy, opts.n, opts.system_message_split);
  prompt.seed = opts.seed;
  prompt.temperature = opts.temperature;
  std::string reply = client.complete(prompt);
  std::vector<std::string> queries = parse_numbered_list(reply);
  if (queries.size() > opts.n) {
    warn(warnings, "topic " + topic.topic_id + ": reply contained " + std::to_string(queries.size()) +
                       " queries, keeping the first " + std::to_string(opts.n));
    queries.resize(opts.n);
  } else if (queries.size() < opts.n) {
    warn(warnings, "topic " + topic.topic_id + ": shortfall, parsed " + std::to_string(queries.size()) +
                       " of " + std::to_string(opts.n) + " queries");
  }
  return {topic.topic_id, to_string(strategy.kind), client.model_id(), opts.seed, std::move(queries)};
}

}  // namespace varfuse
