#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "varfuse/error.hpp"
#include "varfuse/fsutil.hpp"
#include "varfuse/index.hpp"
#include "varfuse/metrics.hpp"
#include "varfuse/querygen.hpp"
#include "varfuse/retrieval.hpp"

namespace varfuse {

// strict: any grammar violation is an error (used by tests and pipelines).
// lenient: violations are warnings and the offending line is skipped
// (used for wild-caught files).
enum class ParseMode { strict, lenient };

namespace trecio_detail {

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Iterates lines of an in-memory file, tracking 1-based line numbers.
struct LineCursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line_no = 0;

  std::optional<std::string_view> next() {
    if (pos >= text.size()) return std::nullopt;
    std::size_t eol = text.find('\n', pos);
    std::string_view line = eol == std::string_view::npos ? text.substr(pos)
                                                          : text.substr(pos, eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    return strip_cr(line);
  }
};

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t value = 0;
  std::size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    value = value * 10 + (s[i] - '0');
  }
  return s[0] == '-' ? -value : value;
}

inline std::optional<double> parse_real(std::string_view s) {
  std::string buf(s);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty()) return std::nullopt;
  return v;
}

inline std::size_t line_of(std::string_view text, std::size_t pos) {
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(pos, text.size())), '\n'));
}

inline std::string normalize_ws(std::string_view s) {
  std::string out;
  bool in_space = true;  // swallow leading whitespace
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += c;
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline std::string strip_label(std::string value, std::string_view label) {
  if (value.size() >= label.size()) {
    bool match = true;
    for (std::size_t i = 0; i < label.size(); ++i)
      if (std::tolower(static_cast<unsigned char>(value[i])) != std::tolower(static_cast<unsigned char>(label[i]))) {
        match = false;
        break;
      }
    if (match) {
      value.erase(0, label.size());
      while (!value.empty() && value.front() == ' ') value.erase(0, 1);
    }
  }
  return value;
}

inline std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", score);
  return buf;
}

}  // namespace trecio_detail

// ---------------------------------------------------------------------------
// Topics

// Accepts classic TREC markup (<top> <num> <title> <desc> <narr>, closing
// tags optional for the fields) or, when the first non-blank character is
// '{', the JSON-lines topic format.
inline std::vector<Topic> parse_topics(std::string_view text) {
  namespace d = trecio_detail;
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};

  if (text[first] == '{') {
    std::vector<Topic> topics;
    d::LineCursor cursor{text};
    while (auto line = cursor.next()) {
      if (d::blank(*line)) continue;
      nlohmann::json doc = nlohmann::json::parse(*line, nullptr, false);
      if (doc.is_discarded())
        throw ParseError("topics line " + std::to_string(cursor.line_no) + ": invalid JSON");
      if (!doc.contains("topic_id") || !doc.contains("title"))
        throw ParseError("topics line " + std::to_string(cursor.line_no) +
                         ": missing topic_id or title");
      Topic t;
      t.topic_id = doc["topic_id"].is_string() ? doc["topic_id"].get<std::string>()
                                               : nlohmann::to_string(doc["topic_id"]);
      t.title = d::normalize_ws(doc["title"].get<std::string>());
      if (doc.contains("description")) t.description = d::normalize_ws(doc["description"].get<std::string>());
      if (doc.contains("narrative")) t.narrative = d::normalize_ws(doc["narrative"].get<std::string>());
      if (t.title.empty())
        throw ParseError("topics line " + std::to_string(cursor.line_no) + ": empty title");
      topics.push_back(std::move(t));
    }
    return topics;
  }

  std::vector<Topic> topics;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = text.find("<top>", pos);
    if (open == std::string_view::npos) break;
    std::size_t body_start = open + 5;
    std::size_t close = text.find("</top>", body_start);
    std::size_t block_line = d::line_of(text, open);
    if (close == std::string_view::npos)
      throw ParseError("topic block at line " + std::to_string(block_line) + ": missing </top>");
    std::string_view block = text.substr(body_start, close - body_start);
    pos = close + 6;

    struct Field { std::string_view tag; std::size_t at; };
    static constexpr std::string_view kTags[] = {"<num>", "<title>", "<desc>", "<narr>",
                                                 "</num>", "</title>", "</desc>", "</narr>"};
    std::vector<Field> fields;
    for (std::string_view tag : kTags) {
      std::size_t at = 0;
      while ((at = block.find(tag, at)) != std::string_view::npos) {
        fields.push_back({tag, at});
        at += tag.size();
      }
    }
    std::sort(fields.begin(), fields.end(), [](const Field& a, const Field& b) { return a.at < b.at; });

    auto value_of = [&](std::string_view tag) -> std::optional<std::string> {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].tag != tag) continue;
        std::size_t begin = fields[i].at + tag.size();
        std::size_t end = i + 1 < fields.size() ? fields[i + 1].at : block.size();
        return d::normalize_ws(block.substr(begin, end - begin));
      }
      return std::nullopt;
    };

    Topic t;
    auto num = value_of("<num>");
    if (!num)
      throw ParseError("topic block at line " + std::to_string(block_line) + ": missing <num>");
    t.topic_id = d::strip_label(*num, "number:");
    if (t.topic_id.empty())
      throw ParseError("topic block at line " + std::to_string(block_line) + ": empty <num>");
    auto title = value_of("<title>");
    if (!title || title->empty())
      throw ParseError("topic block " + t.topic_id + " at line " + std::to_string(block_line) +
                       ": missing <title>");
    t.title = d::strip_label(*title, "topic:");
    if (auto desc = value_of("<desc>")) t.description = d::strip_label(*desc, "description:");
    if (auto narr = value_of("<narr>")) t.narrative = d::strip_label(*narr, "narrative:");
    topics.push_back(std::move(t));
  }
  if (topics.empty()) throw ParseError("no <top> blocks or JSON-lines topics found in input");
  return topics;
}

inline std::vector<Topic> parse_topics_file(const std::filesystem::path& path) {
  return parse_topics(read_file(path));
}

inline std::string render_topics_jsonl(std::span<const Topic> topics) {
  std::string out;
  for (const Topic& t : topics) {
    nlohmann::json doc{{"topic_id", t.topic_id}, {"title", t.title}};
    if (!t.description.empty()) doc["description"] = t.description;
    if (!t.narrative.empty()) doc["narrative"] = t.narrative;
    out += doc.dump();
    out += '\n';
  }
  return out;
}

inline void write_topics_jsonl(std::span<const Topic> topics, const std::filesystem::path& path) {
  atomic_write_file(path, render_topics_jsonl(topics));
}

// ---------------------------------------------------------------------------
// Qrels

inline Qrels parse_qrels(std::string_view text, ParseMode mode = ParseMode::strict,
                         Warnings* warnings = nullptr) {
  namespace d = trecio_detail;
  Qrels qrels;
  d::LineCursor cursor{text};
  while (auto line = cursor.next()) {
    if (d::blank(*line)) continue;
    auto cols = d::split_ws(*line);
    std::string where = "qrels line " + std::to_string(cursor.line_no);
    if (cols.size() != 4) {
      std::string msg = where + ": expected 4 columns, got " + std::to_string(cols.size());
      if (mode == ParseMode::strict) throw ParseError(msg);
      warn(warnings, msg + ", line skipped");
      continue;
    }
    auto grade = d::parse_int(cols[3]);
    if (!grade) {
      std::string msg = where + ": grade '" + std::string(cols[3]) + "' is not an integer";
      if (mode == ParseMode::strict) throw ParseError(msg);
      warn(warnings, msg + ", line skipped");
      continue;
    }
    if (*grade < 0) {
      std::string msg = where + ": negative grade " + std::to_string(*grade);
      if (mode == ParseMode::strict) throw ParseError(msg);
      warn(warnings, msg + ", line skipped");
      continue;
    }
    std::string topic(cols[0]);
    std::string doc(cols[1 + 1]);  // column 1 is the unused iteration field
    auto& judgments = qrels.topics[topic];
    auto it = judgments.find(doc);
    if (it != judgments.end()) {
      warn(warnings, where + ": duplicate judgment for (" + topic + ", " + doc + "), last wins");
      it->second = static_cast<int>(*grade);
    } else {
      judgments.emplace(std::move(doc), static_cast<int>(*grade));
    }
  }
  return qrels;
}

inline Qrels parse_qrels_file(const std::filesystem::path& path, ParseMode mode = ParseMode::strict,
                              Warnings* warnings = nullptr) {
  return parse_qrels(read_file(path), mode, warnings);
}

inline std::string render_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [topic, judgments] : qrels.topics)
    for (const auto& [doc, grade] : judgments)
      out += topic + " 0 " + doc + " " + std::to_string(grade) + "\n";
  return out;
}

inline void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  atomic_write_file(path, render_qrels(qrels));
}

// ---------------------------------------------------------------------------
// Run files (6-column TREC format)

// Scores are rendered with 6 significant digits; round-trips are exact at
// that precision (re-serializing a parsed run is byte-identical).
inline std::string render_run(const Run& run, std::string_view tag) {
  std::string out;
  for (const auto& [topic, ranking] : run) {
    std::string_view t = tag.empty() ? std::string_view(ranking.system_tag) : tag;
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      const ScoredDoc& e = ranking.entries[i];
      out += topic;
      out += " Q0 ";
      out += e.doc_id;
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += trecio_detail::format_score(e.score);
      out += ' ';
      out += t;
      out += '\n';
    }
  }
  return out;
}

inline void write_run(const Run& run, const std::filesystem::path& path, std::string_view tag = "") {
  atomic_write_file(path, render_run(run, tag));
}

inline Run parse_run(std::string_view text, ParseMode mode = ParseMode::strict,
                     Warnings* warnings = nullptr) {
  namespace d = trecio_detail;
  Run run;
  std::map<std::string, double> last_score;
  d::LineCursor cursor{text};
  while (auto line = cursor.next()) {
    if (d::blank(*line)) continue;
    auto cols = d::split_ws(*line);
    std::string where = "run line " + std::to_string(cursor.line_no);
    auto reject = [&](const std::string& msg) {
      if (mode == ParseMode::strict) throw ParseError(msg);
      warn(warnings, msg + ", line skipped");
    };
    if (cols.size() != 6) {
      reject(where + ": expected 6 columns, got " + std::to_string(cols.size()));
      continue;
    }
    auto rank = d::parse_int(cols[3]);
    if (!rank || *rank < 1) {
      reject(where + ": rank '" + std::string(cols[3]) + "' is not a positive integer");
      continue;
    }
    auto score = d::parse_real(cols[4]);
    if (!score) {
      reject(where + ": score '" + std::string(cols[4]) + "' is not a number");
      continue;
    }
    std::string topic(cols[0]);
    std::string doc(cols[2]);
    Ranking& ranking = run.try_emplace(topic, Ranking{topic, std::string(cols[5]), {}}).first->second;
    if (static_cast<std::size_t>(*rank) != ranking.entries.size() + 1) {
      reject(where + ": topic " + topic + " rank " + std::to_string(*rank) +
             " breaks the consecutive 1..n order");
      continue;
    }
    if (!ranking.entries.empty() && *score > last_score[topic]) {
      reject(where + ": topic " + topic + " score " + trecio_detail::format_score(*score) +
             " increases over the previous rank");
      continue;
    }
    bool dup = false;
    for (const ScoredDoc& e : ranking.entries)
      if (e.doc_id == doc) {
        dup = true;
        break;
      }
    if (dup) {
      reject(where + ": duplicate doc_id " + doc + " in topic " + topic);
      continue;
    }
    ranking.entries.push_back({std::move(doc), *score});
    last_score[topic] = *score;
  }
  return run;
}

inline Run parse_run_file(const std::filesystem::path& path, ParseMode mode = ParseMode::strict,
                          Warnings* warnings = nullptr) {
  return parse_run(read_file(path), mode, warnings);
}

// ---------------------------------------------------------------------------
// Query variant datasets

inline std::string render_variants_jsonl(std::span<const QueryVariantSet> sets) {
  std::string out;
  for (const QueryVariantSet& set : sets) {
    for (std::size_t i = 0; i < set.queries.size(); ++i) {
      nlohmann::json doc{{"topic_id", set.topic_id}, {"strategy", set.strategy},
                         {"model_id", set.model_id}, {"seed", set.seed},
                         {"rank", i + 1},           {"query", set.queries[i]}};
      out += doc.dump();
      out += '\n';
    }
  }
  return out;
}

inline void write_variants_jsonl(std::span<const QueryVariantSet> sets,
                                 const std::filesystem::path& path) {
  atomic_write_file(path, render_variants_jsonl(sets));
}

inline std::vector<QueryVariantSet> parse_variants_jsonl(std::string_view text) {
  namespace d = trecio_detail;
  std::vector<QueryVariantSet> sets;
  d::LineCursor cursor{text};
  while (auto line = cursor.next()) {
    if (d::blank(*line)) continue;
    std::string where = "variants line " + std::to_string(cursor.line_no);
    nlohmann::json doc = nlohmann::json::parse(*line, nullptr, false);
    if (doc.is_discarded()) throw ParseError(where + ": invalid JSON");
    for (const char* field : {"topic_id", "strategy", "model_id", "seed", "rank", "query"})
      if (!doc.contains(field)) throw ParseError(where + ": missing field '" + field + "'");
    std::string topic = doc["topic_id"].get<std::string>();
    auto rank = doc["rank"].get<std::size_t>();
    if (sets.empty() || sets.back().topic_id != topic) {
      if (rank != 1) throw ParseError(where + ": topic " + topic + " does not start at rank 1");
      sets.push_back({topic, doc["strategy"].get<std::string>(), doc["model_id"].get<std::string>(),
                      doc["seed"].get<std::uint64_t>(), {}});
    } else if (rank != sets.back().queries.size() + 1) {
      throw ParseError(where + ": topic " + topic + " rank " + std::to_string(rank) +
                       " is not contiguous");
    }
    if (sets.back().strategy != doc["strategy"].get<std::string>() ||
        sets.back().model_id != doc["model_id"].get<std::string>() ||
        sets.back().seed != doc["seed"].get<std::uint64_t>())
      throw ParseError(where + ": provenance fields change within topic " + topic);
    std::string query = doc["query"].get<std::string>();
    if (query.empty()) throw ParseError(where + ": empty query");
    sets.back().queries.push_back(std::move(query));
  }
  return sets;
}

inline std::vector<QueryVariantSet> parse_variants_jsonl_file(const std::filesystem::path& path) {
  return parse_variants_jsonl(read_file(path));
}

namespace trecio_detail {

inline std::string escape_tsv(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_tsv(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: out += '\\'; out += s[i];
    }
  }
  return out;
}

}  // namespace trecio_detail

// TSV variant dataset: topic_id<TAB>rank<TAB>query. Drops provenance.
inline std::string render_variants_tsv(std::span<const QueryVariantSet> sets) {
  std::string out;
  for (const QueryVariantSet& set : sets)
    for (std::size_t i = 0; i < set.queries.size(); ++i)
      out += set.topic_id + "\t" + std::to_string(i + 1) + "\t" +
             trecio_detail::escape_tsv(set.queries[i]) + "\n";
  return out;
}

inline void write_variants_tsv(std::span<const QueryVariantSet> sets,
                               const std::filesystem::path& path) {
  atomic_write_file(path, render_variants_tsv(sets));
}

inline std::vector<QueryVariantSet> parse_variants_tsv(std::string_view text) {
  namespace d = trecio_detail;
  std::vector<QueryVariantSet> sets;
  d::LineCursor cursor{text};
  while (auto line = cursor.next()) {
    if (line->empty()) continue;
    std::string where = "variants line " + std::to_string(cursor.line_no);
    std::size_t tab1 = line->find('\t');
    std::size_t tab2 = tab1 == std::string_view::npos ? std::string_view::npos
                                                      : line->find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos) throw ParseError(where + ": expected 3 tab-separated columns");
    std::string topic(line->substr(0, tab1));
    auto rank = d::parse_int(line->substr(tab1 + 1, tab2 - tab1 - 1));
    if (!rank || *rank < 1) throw ParseError(where + ": bad rank column");
    std::string query = d::unescape_tsv(line->substr(tab2 + 1));
    if (query.empty()) throw ParseError(where + ": empty query");
    if (sets.empty() || sets.back().topic_id != topic) {
      if (*rank != 1) throw ParseError(where + ": topic " + topic + " does not start at rank 1");
      sets.push_back({std::move(topic), "", "", 0, {}});
    } else if (static_cast<std::size_t>(*rank) != sets.back().queries.size() + 1) {
      throw ParseError(where + ": topic " + topic + " rank " + std::to_string(*rank) +
                       " is not contiguous");
    }
    sets.back().queries.push_back(std::move(query));
  }
  return sets;
}

// ---------------------------------------------------------------------------
// Corpus (JSON-lines: doc_id, text, optional title)

inline void for_each_document(const std::filesystem::path& path,
                              const std::function<void(Document&&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trecio_detail::blank(line)) continue;
    std::string where = path.filename().string() + " line " + std::to_string(line_no);
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw ParseError(where + ": invalid JSON");
    if (!doc.contains("doc_id") || !doc["doc_id"].is_string() || doc["doc_id"].get<std::string>().empty())
      throw ParseError(where + ": missing or empty doc_id");
    if (!doc.contains("text") || !doc["text"].is_string())
      throw ParseError(where + ": missing text field");
    Document d{doc["doc_id"].get<std::string>(), doc["text"].get<std::string>(), ""};
    if (doc.contains("title") && doc["title"].is_string()) d.title = doc["title"].get<std::string>();
    fn(std::move(d));
  }
  if (in.bad()) throw IoError("read failed: " + path.string());
}

inline std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_document(path, [&](Document&& d) { docs.push_back(std::move(d)); });
  return docs;
}

inline std::string render_corpus_jsonl(std::span<const Document> docs) {
  std::string out;
  for (const Document& d : docs) {
    nlohmann::json doc{{"doc_id", d.doc_id}, {"text", d.text}};
    if (!d.title.empty()) doc["title"] = d.title;
    out += doc.dump();
    out += '\n';
  }
  return out;
}

inline void write_corpus_jsonl(std::span<const Document> docs, const std::filesystem::path& path) {
  atomic_write_file(path, render_corpus_jsonl(docs));
}

// ---------------------------------------------------------------------------
// P3 example files (JSON-lines: title, queries)

inline std::vector<P3Example> parse_p3_examples(std::string_view text) {
  namespace d = trecio_detail;
  std::vector<P3Example> examples;
  d::LineCursor cursor{text};
  while (auto line = cursor.next()) {
    if (d::blank(*line)) continue;
    std::string where = "p3 examples line " + std::to_string(cursor.line_no);
    nlohmann::json doc = nlohmann::json::parse(*line, nullptr, false);
    if (doc.is_discarded()) throw ParseError(where + ": invalid JSON");
    if (!doc.contains("title") || !doc["title"].is_string() || doc["title"].get<std::string>().empty())
      throw ParseError(where + ": missing title");
    if (!doc.contains("queries") || !doc["queries"].is_array() || doc["queries"].empty())
      throw ParseError(where + ": missing or empty queries array");
    P3Example ex{doc["title"].get<std::string>(), {}};
    for (const auto& q : doc["queries"]) {
      if (!q.is_string() || q.get<std::string>().empty())
        throw ParseError(where + ": queries must be non-empty strings");
      ex.queries.push_back(q.get<std::string>());
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw ParseError("p3 examples: no examples found in input");
  return examples;
}

inline std::vector<P3Example> parse_p3_examples_file(const std::filesystem::path& path) {
  return parse_p3_examples(read_file(path));
}

// ---------------------------------------------------------------------------
// Delta analysis TSV (topic_id<TAB>delta, sorted by decreasing delta)

inline std::string render_delta_tsv(std::span<const std::pair<std::string, double>> deltas) {
  std::string out;
  char buf[64];
  for (const auto& [topic, delta] : deltas) {
    std::snprintf(buf, sizeof(buf), "%.6f", delta);
    out += topic + "\t" + buf + "\n";
  }
  return out;
}

}  // namespace varfuse
