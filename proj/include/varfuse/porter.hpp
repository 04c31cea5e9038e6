#pragma once

#include <string>
#include <string_view>

// Porter stemming, as published in 1980 (without the later revisions to
// step 2). Operates on lowercase ASCII words; callers guard anything else.

namespace varfuse {

namespace porter_detail {

inline bool is_cons(std::string_view w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return false;
    case 'y':
      return i == 0 ? true : !is_cons(w, i - 1);
    default:
      return true;
  }
}

// Number of VC sequences in the (sub)word.
inline int measure(std::string_view w) {
  int m = 0;
  std::size_t i = 0, n = w.size();
  while (i < n && is_cons(w, i)) ++i;
  while (i < n) {
    while (i < n && !is_cons(w, i)) ++i;
    if (i == n) break;
    ++m;
    while (i < n && is_cons(w, i)) ++i;
  }
  return m;
}

inline bool has_vowel(std::string_view w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!is_cons(w, i)) return true;
  return false;
}

inline bool ends_double_cons(std::string_view w) {
  std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_cons(w, n - 1);
}

// *o condition: stem ends cvc where the final consonant is not w, x, or y.
inline bool ends_cvc(std::string_view w) {
  std::size_t n = w.size();
  if (n < 3) return false;
  if (!is_cons(w, n - 3) || is_cons(w, n - 2) || !is_cons(w, n - 1)) return false;
  char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

inline bool ends_with(std::string_view w, std::string_view suf) {
  return w.size() >= suf.size() && w.substr(w.size() - suf.size()) == suf;
}

// Replace `suf` by `rep` when the measure of the remaining stem exceeds `min_m`.
inline bool replace_if(std::string& w, std::string_view suf, std::string_view rep, int min_m) {
  if (!ends_with(w, suf)) return false;
  std::string_view stem(w.data(), w.size() - suf.size());
  if (measure(stem) > min_m) {
    w.resize(stem.size());
    w.append(rep);
  }
  return true;  // suffix matched, stop scanning the rule list
}

}  // namespace porter_detail

inline std::string porter_stem(std::string_view word) {
  using namespace porter_detail;
  std::string w(word);
  if (w.size() <= 2) return w;

  // Step 1a
  if (ends_with(w, "sses")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.resize(w.size() - 2);
  } else if (!ends_with(w, "ss") && ends_with(w, "s")) {
    w.pop_back();
  }

  // Step 1b
  bool cleanup = false;
  if (ends_with(w, "eed")) {
    if (measure(std::string_view(w).substr(0, w.size() - 3)) > 0) w.pop_back();
  } else if (ends_with(w, "ed") && has_vowel(std::string_view(w).substr(0, w.size() - 2))) {
    w.resize(w.size() - 2);
    cleanup = true;
  } else if (ends_with(w, "ing") && has_vowel(std::string_view(w).substr(0, w.size() - 3))) {
    w.resize(w.size() - 3);
    cleanup = true;
  }
  if (cleanup) {
    if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
      w.push_back('e');
    } else if (ends_double_cons(w) && w.back() != 'l' && w.back() != 's' && w.back() != 'z') {
      w.pop_back();
    } else if (measure(w) == 1 && ends_cvc(w)) {
      w.push_back('e');
    }
  }

  // Step 1c
  if (ends_with(w, "y") && has_vowel(std::string_view(w).substr(0, w.size() - 1))) {
    w.back() = 'i';
  }

  // Step 2 (m > 0)
  static constexpr std::pair<std::string_view, std::string_view> kStep2[] = {
      {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},  {"anci", "ance"},
      {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},    {"entli", "ent"},
      {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"},{"ation", "ate"},
      {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"},{"fulness", "ful"},
      {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"},
  };
  for (auto [suf, rep] : kStep2)
    if (replace_if(w, suf, rep, 0)) break;

  // Step 3 (m > 0)
  static constexpr std::pair<std::string_view, std::string_view> kStep3[] = {
      {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
      {"ical", "ic"},  {"ful", ""},   {"ness", ""},
  };
  for (auto [suf, rep] : kStep3)
    if (replace_if(w, suf, rep, 0)) break;

  // Step 4 (m > 1); "ion" only after s or t
  static constexpr std::string_view kStep4[] = {
      "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
      "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
  };
  for (std::string_view suf : kStep4) {
    if (!ends_with(w, suf)) continue;
    std::string_view stem(w.data(), w.size() - suf.size());
    if (suf == "ion") {
      if (!stem.empty() && (stem.back() == 's' || stem.back() == 't') && measure(stem) > 1)
        w.resize(stem.size());
    } else if (measure(stem) > 1) {
      w.resize(stem.size());
    }
    break;
  }

  // Step 5a
  if (ends_with(w, "e")) {
    std::string_view stem(w.data(), w.size() - 1);
    int m = measure(stem);
    if (m > 1 || (m == 1 && !ends_cvc(stem))) w.pop_back();
  }

  // Step 5b
  if (measure(w) > 1 && ends_double_cons(w) && w.back() == 'l') w.pop_back();

  return w;
}

}  // namespace varfuse
