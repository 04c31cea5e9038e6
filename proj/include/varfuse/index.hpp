#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "varfuse/analyzer.hpp"
#include "varfuse/error.hpp"

namespace varfuse {

struct Document {
  std::string doc_id;
  std::string text;
  std::string title;  // optional; concatenated into the text at index time
};

struct Posting {
  std::uint32_t doc_ordinal;
  std::uint32_t term_frequency;

  bool operator==(const Posting&) const = default;
};

namespace index_detail {

struct TermEntry {
  std::uint64_t collection_frequency = 0;
  std::vector<Posting> postings;  // strictly ascending by doc_ordinal
};

inline void write_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline void write_str(std::ostream& out, std::string_view s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::istream& in;

  void bytes(char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw FormatError("index file truncated");
  }
  std::uint8_t u8() {
    char c;
    bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }
};

constexpr char kMagic[4] = {'V', 'F', 'I', 'X'};
constexpr char kFooter[4] = {'V', 'F', 'E', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace index_detail

// Immutable single-segment inverted index with the collection statistics
// BM25 and RM3 need. Build once (IndexBuilder), then read from any number
// of threads.
class InvertedIndex {
 public:
  std::size_t num_docs() const { return doc_ids_.size(); }
  std::uint64_t total_doc_len() const { return total_len_; }

  double avg_doc_len() const {
    return doc_ids_.empty() ? 0.0 : static_cast<double>(total_len_) / static_cast<double>(doc_ids_.size());
  }

  const AnalyzerConfig& analyzer() const { return analyzer_; }

  const std::string& doc_id(std::uint32_t ordinal) const { return doc_ids_[ordinal]; }
  std::uint32_t doc_len(std::uint32_t ordinal) const { return doc_len_[ordinal]; }

  // num_docs() when the id is unknown.
  std::uint32_t doc_ordinal(const std::string& doc_id) const {
    auto it = ordinal_of_.find(doc_id);
    return it == ordinal_of_.end() ? static_cast<std::uint32_t>(doc_ids_.size()) : it->second;
  }

  std::size_t num_terms() const { return terms_.size(); }
  const std::string& term(std::uint32_t term_id) const { return terms_[term_id]; }

  // Looks up an analyzed term; num_terms() when unknown.
  std::uint32_t term_id(std::string_view term) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
    if (it == terms_.end() || *it != term) return static_cast<std::uint32_t>(terms_.size());
    return static_cast<std::uint32_t>(it - terms_.begin());
  }

  std::uint64_t document_frequency(std::string_view term) const {
    auto id = term_id(term);
    return id == terms_.size() ? 0 : entries_[id].postings.size();
  }

  std::uint64_t collection_frequency(std::string_view term) const {
    auto id = term_id(term);
    return id == terms_.size() ? 0 : entries_[id].collection_frequency;
  }

  // Empty when the term is unknown; otherwise sorted by doc_ordinal.
  std::span<const Posting> postings(std::string_view term) const {
    auto id = term_id(term);
    if (id == terms_.size()) return {};
    return entries_[id].postings;
  }

  std::span<const Posting> postings(std::uint32_t term_id) const {
    return entries_[term_id].postings;
  }

  // Forward view (term_id, tf), sorted by term_id. Derived from the postings;
  // RM3 needs per-document term distributions.
  std::span<const std::pair<std::uint32_t, std::uint32_t>> doc_terms(std::uint32_t ordinal) const {
    return doc_terms_[ordinal];
  }

  void save(const std::filesystem::path& path) const {
    namespace d = index_detail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write index: " + path.string());
    out.write(d::kMagic, 4);
    d::write_u32(out, d::kFormatVersion);
    d::write_u8(out, analyzer_.lowercase ? 1 : 0);
    d::write_u8(out, analyzer_.stemmer == Stemmer::porter ? 1 : 0);
    d::write_u32(out, static_cast<std::uint32_t>(analyzer_.stopwords.size()));
    for (const auto& w : analyzer_.stopwords) d::write_str(out, w);
    d::write_u64(out, doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
      d::write_str(out, doc_ids_[i]);
      d::write_u32(out, doc_len_[i]);
    }
    d::write_u64(out, terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      d::write_str(out, terms_[t]);
      d::write_u64(out, entries_[t].collection_frequency);
      d::write_u32(out, static_cast<std::uint32_t>(entries_[t].postings.size()));
      for (const Posting& p : entries_[t].postings) {
        d::write_u32(out, p.doc_ordinal);
        d::write_u32(out, p.term_frequency);
      }
    }
    out.write(d::kFooter, 4);
    if (!out) throw IoError("write failed: " + path.string());
  }

  static InvertedIndex load(const std::filesystem::path& path) {
    namespace d = index_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index: " + path.string());
    d::Reader r{in};
    char magic[4];
    r.bytes(magic, 4);
    if (std::string_view(magic, 4) != std::string_view(d::kMagic, 4))
      throw FormatError("not an index file (bad magic): " + path.string());
    std::uint32_t version = r.u32();
    if (version != d::kFormatVersion)
      throw FormatError("unsupported index format version " + std::to_string(version) +
                        " (expected " + std::to_string(d::kFormatVersion) + ")");
    InvertedIndex idx;
    idx.analyzer_.lowercase = r.u8() != 0;
    idx.analyzer_.stemmer = r.u8() != 0 ? Stemmer::porter : Stemmer::none;
    idx.analyzer_.stopwords.clear();
    std::uint32_t n_stop = r.u32();
    for (std::uint32_t i = 0; i < n_stop; ++i) idx.analyzer_.stopwords.insert(r.str());
    std::uint64_t n_docs = r.u64();
    idx.doc_ids_.reserve(n_docs);
    idx.doc_len_.reserve(n_docs);
    for (std::uint64_t i = 0; i < n_docs; ++i) {
      idx.doc_ids_.push_back(r.str());
      std::uint32_t dl = r.u32();
      idx.doc_len_.push_back(dl);
      idx.total_len_ += dl;
    }
    std::uint64_t n_terms = r.u64();
    idx.terms_.reserve(n_terms);
    idx.entries_.reserve(n_terms);
    for (std::uint64_t t = 0; t < n_terms; ++t) {
      idx.terms_.push_back(r.str());
      index_detail::TermEntry entry;
      entry.collection_frequency = r.u64();
      std::uint32_t n_postings = r.u32();
      entry.postings.reserve(n_postings);
      for (std::uint32_t p = 0; p < n_postings; ++p) {
        std::uint32_t ordinal = r.u32();
        std::uint32_t tf = r.u32();
        if (ordinal >= n_docs) throw FormatError("index file corrupt: posting ordinal out of range");
        entry.postings.push_back({ordinal, tf});
      }
      idx.entries_.push_back(std::move(entry));
    }
    char footer[4];
    r.bytes(footer, 4);
    if (std::string_view(footer, 4) != std::string_view(d::kFooter, 4))
      throw FormatError("index file truncated or corrupt (bad footer): " + path.string());
    if (in.peek() != std::ifstream::traits_type::eof())
      throw FormatError("index file has trailing data: " + path.string());
    idx.build_forward();
    return idx;
  }

  // Plain-text dump covering all observable state; used for debugging and
  // as a cheap observational-equality check in tests.
  void dump_text(std::ostream& out) const {
    out << "varfuse-index v" << index_detail::kFormatVersion << "\n";
    out << "analyzer lowercase=" << (analyzer_.lowercase ? "true" : "false")
        << " stemmer=" << (analyzer_.stemmer == Stemmer::porter ? "porter" : "none")
        << " stopwords=" << analyzer_.stopwords.size() << "\n";
    out << "docs " << num_docs() << " total_len " << total_len_ << "\n";
    for (std::size_t i = 0; i < doc_ids_.size(); ++i)
      out << "doc " << i << " " << doc_ids_[i] << " len=" << doc_len_[i] << "\n";
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      out << "term " << terms_[t] << " df=" << entries_[t].postings.size()
          << " cf=" << entries_[t].collection_frequency << " postings=";
      for (const Posting& p : entries_[t].postings)
        out << "(" << p.doc_ordinal << ":" << p.term_frequency << ")";
      out << "\n";
    }
  }

  std::string dump_text() const {
    std::ostringstream os;
    dump_text(os);
    return os.str();
  }

 private:
  friend class IndexBuilder;

  void build_forward() {
    doc_terms_.assign(doc_ids_.size(), {});
    for (std::uint32_t t = 0; t < terms_.size(); ++t)
      for (const Posting& p : entries_[t].postings)
        doc_terms_[p.doc_ordinal].emplace_back(t, p.term_frequency);
    // term ids ascend within each postings walk, so the vectors are sorted
    ordinal_of_.clear();
    ordinal_of_.reserve(doc_ids_.size());
    for (std::uint32_t i = 0; i < doc_ids_.size(); ++i) ordinal_of_.emplace(doc_ids_[i], i);
  }

  AnalyzerConfig analyzer_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  std::uint64_t total_len_ = 0;
  std::vector<std::string> terms_;  // sorted ascending
  std::vector<index_detail::TermEntry> entries_;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> doc_terms_;
  std::unordered_map<std::string, std::uint32_t> ordinal_of_;
};

// Single-writer builder; feed documents in ingestion order.
class IndexBuilder {
 public:
  explicit IndexBuilder(AnalyzerConfig config) : config_(std::move(config)) {}

  void add(const Document& doc) {
    if (doc.doc_id.empty()) throw ParseError("document with empty doc_id");
    auto [it, inserted] = ordinals_.emplace(doc.doc_id, static_cast<std::uint32_t>(doc_ids_.size()));
    if (!inserted) throw ParseError("duplicate doc_id: " + doc.doc_id);
    std::uint32_t ordinal = it->second;
    doc_ids_.push_back(doc.doc_id);

    std::vector<std::string> terms = analyze(config_, doc.title);
    std::vector<std::string> body = analyze(config_, doc.text);
    terms.insert(terms.end(), std::make_move_iterator(body.begin()), std::make_move_iterator(body.end()));

    doc_len_.push_back(static_cast<std::uint32_t>(terms.size()));
    total_len_ += terms.size();

    std::map<std::string, std::uint32_t> tf;
    for (auto& t : terms) ++tf[std::move(t)];
    for (auto& [term, count] : tf) {
      auto& entry = dict_[term];
      entry.collection_frequency += count;
      entry.postings.push_back({ordinal, count});
    }
  }

  InvertedIndex finish() {
    InvertedIndex idx;
    idx.analyzer_ = std::move(config_);
    idx.doc_ids_ = std::move(doc_ids_);
    idx.doc_len_ = std::move(doc_len_);
    idx.total_len_ = total_len_;
    idx.terms_.reserve(dict_.size());
    idx.entries_.reserve(dict_.size());
    for (auto& [term, entry] : dict_) {  // std::map: already sorted
      idx.terms_.push_back(term);
      idx.entries_.push_back(std::move(entry));
    }
    idx.build_forward();
    return idx;
  }

 private:
  AnalyzerConfig config_;
  std::unordered_map<std::string, std::uint32_t> ordinals_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  std::uint64_t total_len_ = 0;
  std::map<std::string, index_detail::TermEntry> dict_;
};

inline InvertedIndex build_index(std::span<const Document> corpus, AnalyzerConfig config) {
  IndexBuilder builder(std::move(config));
  for (const Document& doc : corpus) builder.add(doc);
  return builder.finish();
}

}  // namespace varfuse
