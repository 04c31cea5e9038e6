#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "varfuse/analyzer.hpp"
#include "varfuse/error.hpp"
#include "varfuse/fsutil.hpp"
#include "varfuse/fusion.hpp"
#include "varfuse/retrieval.hpp"

namespace varfuse {

// Minimal TOML-style subset: [sections], key = value, # comments, values
// are quoted strings, integers, floats, booleans, or one-line arrays of
// integers or strings. That covers the whole experiment configuration.
struct TomlValue {
  enum Kind { string, integer, real, boolean, int_array, string_array };
  Kind kind = string;
  std::string s;
  std::int64_t i = 0;
  double d = 0.0;
  bool b = false;
  std::vector<std::int64_t> ia;
  std::vector<std::string> sa;
};

using TomlTable = std::map<std::string, TomlValue>;  // "section.key" -> value

namespace config_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

inline bool valid_key(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'))
      return false;
  return true;
}

inline std::optional<std::string> parse_quoted(std::string_view s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return std::nullopt;
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      if (i + 2 >= s.size()) return std::nullopt;  // escape would swallow the closing quote
      switch (s[++i]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: return std::nullopt;
      }
    } else if (c == '"') {
      return std::nullopt;  // unescaped quote before the end
    } else {
      out += c;
    }
  }
  return out;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  std::int64_t v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    v = v * 10 + (s[i] - '0');
  }
  return s[0] == '-' ? -v : v;
}

inline std::optional<double> parse_float(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_array_items(std::string_view body) {
  std::vector<std::string> items;
  std::string current;
  bool in_string = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  std::string last = trim(current);
  if (!last.empty()) items.push_back(last);
  return items;
}

inline TomlValue parse_value(const std::string& raw, std::size_t line_no) {
  auto fail = [&](const std::string& what) -> TomlValue {
    throw ParseError("config line " + std::to_string(line_no) + ": " + what);
  };
  TomlValue v;
  if (raw.empty()) return fail("missing value");
  if (raw.front() == '"') {
    auto s = parse_quoted(raw);
    if (!s) return fail("malformed string " + raw);
    v.kind = TomlValue::string;
    v.s = *s;
    return v;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') return fail("unterminated array " + raw);
    auto items = split_array_items(std::string_view(raw).substr(1, raw.size() - 2));
    bool all_int = true, all_str = true;
    for (const auto& item : items) {
      if (!parse_int(item)) all_int = false;
      if (!(item.size() >= 2 && item.front() == '"')) all_str = false;
    }
    if (items.empty() || all_int) {
      v.kind = TomlValue::int_array;
      for (const auto& item : items) v.ia.push_back(*parse_int(item));
      return v;
    }
    if (all_str) {
      v.kind = TomlValue::string_array;
      for (const auto& item : items) {
        auto s = parse_quoted(item);
        if (!s) return fail("malformed string in array: " + item);
        v.sa.push_back(*s);
      }
      return v;
    }
    return fail("array must be all integers or all strings: " + raw);
  }
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::boolean;
    v.b = raw == "true";
    return v;
  }
  if (auto i = parse_int(raw)) {
    v.kind = TomlValue::integer;
    v.i = *i;
    return v;
  }
  if (auto d = parse_float(raw)) {
    v.kind = TomlValue::real;
    v.d = *d;
    return v;
  }
  return fail("cannot parse value: " + raw);
}

}  // namespace config_detail

inline TomlTable parse_toml(std::string_view text) {
  namespace d = config_detail;
  TomlTable table;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string line = d::trim(d::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("config line " + std::to_string(line_no) + ": malformed section header");
      section = d::trim(std::string_view(line).substr(1, line.size() - 2));
      if (!d::valid_key(section))
        throw ParseError("config line " + std::to_string(line_no) + ": bad section name '" + section + "'");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = d::trim(std::string_view(line).substr(0, eq));
    if (!d::valid_key(key))
      throw ParseError("config line " + std::to_string(line_no) + ": bad key '" + key + "'");
    std::string value = d::trim(std::string_view(line).substr(eq + 1));
    std::string full = section.empty() ? key : section + "." + key;
    table[full] = d::parse_value(value, line_no);
  }
  return table;
}

// Everything the pipeline needs, with the documented defaults baked in.
struct ExperimentConfig {
  std::string corpus;
  std::string topics;
  std::string qrels;
  std::string output_dir = "out";

  AnalyzerConfig analyzer;
  std::string stopwords_spec = "default";  // "default", "none", or a file path

  Bm25Params bm25;
  Rm3Params rm3;
  RrfParams rrf;

  std::string strategy = "P2";
  std::size_t num_variants = 100;
  std::vector<std::size_t> m_list = {3, 5, 10, 100};
  std::string client = "stub";  // "stub" or "http"
  std::string model;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "VARFUSE_API_KEY";
  std::string cache_dir;
  double temperature = 0.0;
  std::size_t max_retries = 3;
  std::size_t backoff_ms = 250;
  bool system_message_split = false;
  std::string p3_examples;  // path; empty means the embedded defaults

  std::size_t precision_cut = 10;
  std::size_t ndcg_cut = 10;
  std::size_t map_depth = 1000;
  double alpha = 0.05;
  std::size_t delta_ndcg_cut = 1000;  // nDCG cutoff of the delta analysis

  std::uint64_t seed = 42;
  std::size_t workers = 4;
};

namespace config_detail {

// Pulls typed values out of the table, collecting every violation instead
// of stopping at the first one.
struct Reader {
  const TomlTable& table;
  std::vector<std::string> errors;
  std::set<std::string> consumed;

  const TomlValue* get(const std::string& key, TomlValue::Kind kind, const char* kind_name) {
    auto it = table.find(key);
    if (it == table.end()) return nullptr;
    consumed.insert(key);
    if (it->second.kind != kind) {
      // integers are acceptable where floats are expected
      if (!(kind == TomlValue::real && it->second.kind == TomlValue::integer)) {
        errors.push_back(key + ": expected " + kind_name);
        return nullptr;
      }
    }
    return &it->second;
  }

  void str(const std::string& key, std::string& out) {
    if (const auto* v = get(key, TomlValue::string, "a string")) out = v->s;
  }
  void real(const std::string& key, double& out) {
    if (const auto* v = get(key, TomlValue::real, "a number"))
      out = v->kind == TomlValue::integer ? static_cast<double>(v->i) : v->d;
  }
  void boolean(const std::string& key, bool& out) {
    if (const auto* v = get(key, TomlValue::boolean, "a boolean")) out = v->b;
  }
  void unsigned_int(const std::string& key, std::size_t& out) {
    if (const auto* v = get(key, TomlValue::integer, "an integer")) {
      if (v->i < 0)
        errors.push_back(key + ": must be >= 0");
      else
        out = static_cast<std::size_t>(v->i);
    }
  }
  void unsigned_int64(const std::string& key, std::uint64_t& out) {
    if (const auto* v = get(key, TomlValue::integer, "an integer")) {
      if (v->i < 0)
        errors.push_back(key + ": must be >= 0");
      else
        out = static_cast<std::uint64_t>(v->i);
    }
  }
  void size_list(const std::string& key, std::vector<std::size_t>& out) {
    if (const auto* v = get(key, TomlValue::int_array, "an integer array")) {
      out.clear();
      for (std::int64_t i : v->ia) {
        if (i < 1) {
          errors.push_back(key + ": entries must be >= 1");
          return;
        }
        out.push_back(static_cast<std::size_t>(i));
      }
    }
  }

  void check_unknown() {
    for (const auto& [key, value] : table)
      if (!consumed.contains(key)) errors.push_back("unknown config key: " + key);
  }
};

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path fp(p);
  if (fp.is_absolute() || base.empty()) return p;
  return (base / fp).lexically_normal().string();
}

}  // namespace config_detail

// Parses and validates a config document. Relative paths are resolved
// against base_dir (the config file's directory). All problems are
// reported at once in a single ConfigError.
inline ExperimentConfig load_config(std::string_view text,
                                    const std::filesystem::path& base_dir = {},
                                    const std::vector<std::string>& overrides = {},
                                    bool check_paths = true) {
  TomlTable table = parse_toml(text);
  for (const std::string& ov : overrides) {
    std::size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like section.key=value: " + ov);
    std::string key = config_detail::trim(std::string_view(ov).substr(0, eq));
    std::string raw = config_detail::trim(std::string_view(ov).substr(eq + 1));
    if (key.empty()) throw ConfigError("override with empty key: " + ov);
    TomlValue value;
    try {
      value = config_detail::parse_value(raw, 0);
    } catch (const ParseError&) {
      value.kind = TomlValue::string;  // unquoted override strings are accepted as-is
      value.s = raw;
    }
    table[key] = value;
  }

  ExperimentConfig cfg;
  config_detail::Reader r{table, {}, {}};

  r.str("paths.corpus", cfg.corpus);
  r.str("paths.topics", cfg.topics);
  r.str("paths.qrels", cfg.qrels);
  r.str("paths.output_dir", cfg.output_dir);

  bool lowercase = cfg.analyzer.lowercase;
  r.boolean("analyzer.lowercase", lowercase);
  cfg.analyzer.lowercase = lowercase;
  std::string stemmer = "porter";
  r.str("analyzer.stemmer", stemmer);
  if (stemmer == "porter")
    cfg.analyzer.stemmer = Stemmer::porter;
  else if (stemmer == "none")
    cfg.analyzer.stemmer = Stemmer::none;
  else
    r.errors.push_back("analyzer.stemmer: expected \"porter\" or \"none\", got \"" + stemmer + "\"");
  r.str("analyzer.stopwords", cfg.stopwords_spec);

  r.real("bm25.k1", cfg.bm25.k1);
  r.real("bm25.b", cfg.bm25.b);
  r.unsigned_int("bm25.depth", cfg.bm25.depth);
  r.unsigned_int("rm3.fb_docs", cfg.rm3.fb_docs);
  r.unsigned_int("rm3.fb_terms", cfg.rm3.fb_terms);
  r.real("rm3.orig_weight", cfg.rm3.orig_weight);
  r.real("rrf.k", cfg.rrf.k);
  r.unsigned_int("rrf.cutoff", cfg.rrf.cutoff);

  r.str("generate.strategy", cfg.strategy);
  r.unsigned_int("generate.num_variants", cfg.num_variants);
  r.size_list("generate.m_list", cfg.m_list);
  r.str("generate.client", cfg.client);
  r.str("generate.model", cfg.model);
  r.str("generate.endpoint", cfg.endpoint);
  r.str("generate.api_key_env", cfg.api_key_env);
  r.str("generate.cache_dir", cfg.cache_dir);
  r.real("generate.temperature", cfg.temperature);
  r.unsigned_int("generate.max_retries", cfg.max_retries);
  r.unsigned_int("generate.backoff_ms", cfg.backoff_ms);
  r.boolean("generate.system_message_split", cfg.system_message_split);
  r.str("generate.p3_examples", cfg.p3_examples);

  r.unsigned_int("evaluate.precision_cut", cfg.precision_cut);
  r.unsigned_int("evaluate.ndcg_cut", cfg.ndcg_cut);
  r.unsigned_int("evaluate.map_depth", cfg.map_depth);
  r.real("evaluate.alpha", cfg.alpha);
  r.unsigned_int("evaluate.delta_ndcg_cut", cfg.delta_ndcg_cut);

  r.unsigned_int64("experiment.seed", cfg.seed);
  r.unsigned_int("experiment.workers", cfg.workers);
  r.check_unknown();

  for (std::string* p : {&cfg.corpus, &cfg.topics, &cfg.qrels, &cfg.output_dir, &cfg.cache_dir})
    *p = config_detail::resolve(base_dir, *p);
  if (cfg.stopwords_spec != "default" && cfg.stopwords_spec != "none")
    cfg.stopwords_spec = config_detail::resolve(base_dir, cfg.stopwords_spec);
  cfg.p3_examples = config_detail::resolve(base_dir, cfg.p3_examples);

  // validation proper: collect everything before throwing
  auto& errors = r.errors;
  if (cfg.corpus.empty()) errors.push_back("paths.corpus is required");
  if (cfg.topics.empty()) errors.push_back("paths.topics is required");
  if (cfg.qrels.empty()) errors.push_back("paths.qrels is required");
  if (check_paths) {
    const std::pair<const char*, const std::string*> required_paths[] = {
        {"paths.corpus", &cfg.corpus}, {"paths.topics", &cfg.topics}, {"paths.qrels", &cfg.qrels}};
    for (const auto& [name, p] : required_paths)
      if (!p->empty() && !std::filesystem::exists(*p))
        errors.push_back(std::string(name) + ": file does not exist: " + *p);
    if (!cfg.p3_examples.empty() && !std::filesystem::exists(cfg.p3_examples))
      errors.push_back("generate.p3_examples: file does not exist: " + cfg.p3_examples);
  }
  if (!(cfg.bm25.k1 > 0)) errors.push_back("bm25.k1 must be > 0");
  if (!(cfg.bm25.b >= 0 && cfg.bm25.b <= 1)) errors.push_back("bm25.b must be in [0,1]");
  if (cfg.bm25.depth < 1) errors.push_back("bm25.depth must be >= 1");
  if (cfg.rm3.fb_docs < 1) errors.push_back("rm3.fb_docs must be >= 1");
  if (cfg.rm3.fb_terms < 1) errors.push_back("rm3.fb_terms must be >= 1");
  if (!(cfg.rm3.orig_weight >= 0 && cfg.rm3.orig_weight <= 1))
    errors.push_back("rm3.orig_weight must be in [0,1]");
  if (!(cfg.rrf.k >= 0)) errors.push_back("rrf.k must be >= 0");
  if (cfg.rrf.cutoff < 1) errors.push_back("rrf.cutoff must be >= 1");
  if (cfg.strategy != "P1" && cfg.strategy != "P2" && cfg.strategy != "P3")
    errors.push_back("generate.strategy must be P1, P2 or P3");
  if (cfg.num_variants < 1) errors.push_back("generate.num_variants must be >= 1");
  if (cfg.m_list.empty()) errors.push_back("generate.m_list must not be empty");
  for (std::size_t m : cfg.m_list)
    if (m > cfg.num_variants)
      errors.push_back("generate.m_list entry " + std::to_string(m) +
                       " exceeds generate.num_variants = " + std::to_string(cfg.num_variants));
  if (cfg.client != "stub" && cfg.client != "http")
    errors.push_back("generate.client must be \"stub\" or \"http\"");
  if (cfg.client == "http" && cfg.model.empty())
    errors.push_back("generate.model is required when generate.client = \"http\"");
  if (!(cfg.temperature >= 0)) errors.push_back("generate.temperature must be >= 0");
  if (cfg.precision_cut < 1) errors.push_back("evaluate.precision_cut must be >= 1");
  if (cfg.ndcg_cut < 1) errors.push_back("evaluate.ndcg_cut must be >= 1");
  if (cfg.map_depth < 1) errors.push_back("evaluate.map_depth must be >= 1");
  if (!(cfg.alpha > 0 && cfg.alpha < 1)) errors.push_back("evaluate.alpha must be in (0,1)");
  if (cfg.delta_ndcg_cut < 1) errors.push_back("evaluate.delta_ndcg_cut must be >= 1");
  if (cfg.workers < 1) errors.push_back("experiment.workers must be >= 1");

  if (cfg.stopwords_spec == "default") {
    cfg.analyzer.stopwords = default_stopwords();
  } else if (cfg.stopwords_spec == "none") {
    cfg.analyzer.stopwords.clear();
  } else {
    try {
      cfg.analyzer.stopwords = load_stopwords(cfg.stopwords_spec);
    } catch (const Error& e) {
      errors.push_back(std::string("analyzer.stopwords: ") + e.what());
    }
  }

  if (!errors.empty()) {
    std::string joined = "invalid configuration:";
    for (const std::string& e : errors) joined += "\n  - " + e;
    throw ConfigError(joined);
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path,
                                         const std::vector<std::string>& overrides = {},
                                         bool check_paths = true) {
  return load_config(read_file(path), path.parent_path(), overrides, check_paths);
}

}  // namespace varfuse
