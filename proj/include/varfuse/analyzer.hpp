#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "varfuse/error.hpp"
#include "varfuse/porter.hpp"

namespace varfuse {

enum class Stemmer { none, porter };

// Classic English stopword list. The copy shipped under data/stopwords_en.txt
// mirrors this set; tests pin both against each other and pin the file hash.
inline const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an",
      "and", "any", "are", "as", "at", "be", "because", "been", "before",
      "being", "below", "between", "both", "but", "by", "can", "did", "do",
      "does", "doing", "down", "during", "each", "few", "for", "from",
      "further", "had", "has", "have", "having", "he", "her", "here", "hers",
      "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
      "is", "it", "its", "itself", "just", "me", "more", "most", "my",
      "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only",
      "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same",
      "she", "should", "so", "some", "such", "than", "that", "the", "their",
      "theirs", "them", "themselves", "then", "there", "these", "they",
      "this", "those", "through", "to", "too", "under", "until", "up", "very",
      "was", "we", "were", "what", "when", "where", "which", "while", "who",
      "whom", "why", "will", "with", "you", "your", "yours", "yourself",
      "yourselves",
  };
  return words;
}

// One lowercase word per line, UTF-8, '#' comments and blank lines allowed.
inline std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword list: " + path.string());
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t");
    words.insert(line.substr(b, e - b + 1));
  }
  return words;
}

struct AnalyzerConfig {
  bool lowercase = true;
  Stemmer stemmer = Stemmer::porter;
  std::set<std::string> stopwords = default_stopwords();

  bool operator==(const AnalyzerConfig&) const = default;
};

namespace analyzer_detail {

// Token characters: ASCII alphanumerics, plus any byte >= 0x80 so that
// multi-byte UTF-8 sequences stay intact inside a token.
inline bool is_token_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

inline bool all_lower_alpha(std::string_view w) {
  for (char c : w)
    if (c < 'a' || c > 'z') return false;
  return true;
}

}  // namespace analyzer_detail

// Tokenize, lowercase, remove stopwords, stem. Pure; order preserved.
inline std::vector<std::string> analyze(const AnalyzerConfig& config, std::string_view text) {
  std::vector<std::string> terms;
  std::size_t i = 0, n = text.size();
  while (i < n) {
    while (i < n && !analyzer_detail::is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < n && analyzer_detail::is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) continue;
    std::string token(text.substr(start, i - start));
    if (config.lowercase) {
      for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (config.stopwords.contains(token)) continue;
    if (config.stemmer == Stemmer::porter && analyzer_detail::all_lower_alpha(token)) {
      token = porter_stem(token);
    }
    terms.push_back(std::move(token));
  }
  return terms;
}

}  // namespace varfuse
