#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "varfuse/error.hpp"
#include "varfuse/retrieval.hpp"

namespace varfuse {

// Graded relevance judgments: topic -> doc -> grade. Grade 0 means judged
// nonrelevant; grades > 0 are relevant. Docs missing from a topic's map are
// unjudged, which is not the same thing as grade 0 (bpref relies on this).
struct Qrels {
  std::map<std::string, std::map<std::string, int>> topics;

  const std::map<std::string, int>* find_topic(const std::string& topic_id) const {
    auto it = topics.find(topic_id);
    return it == topics.end() ? nullptr : &it->second;
  }

  std::size_t num_relevant(const std::string& topic_id) const {
    const auto* j = find_topic(topic_id);
    if (!j) return 0;
    std::size_t r = 0;
    for (const auto& [doc, grade] : *j)
      if (grade > 0) ++r;
    return r;
  }
};

namespace metric_detail {

inline int grade_of(const std::map<std::string, int>& judgments, const std::string& doc_id) {
  auto it = judgments.find(doc_id);
  return it == judgments.end() ? -1 : it->second;  // -1 = unjudged
}

}  // namespace metric_detail

inline double precision_at(const Ranking& ranking, const std::map<std::string, int>& judgments,
                           std::size_t k = 10) {
  if (k < 1) throw ConfigError("precision_at: k must be >= 1");
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranking.entries.size());
  for (std::size_t i = 0; i < n; ++i)
    if (metric_detail::grade_of(judgments, ranking.entries[i].doc_id) > 0) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline double ndcg_at(const Ranking& ranking, const std::map<std::string, int>& judgments,
                      std::size_t k = 10) {
  if (k < 1) throw ConfigError("ndcg_at: k must be >= 1");
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranking.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    int g = metric_detail::grade_of(judgments, ranking.entries[i].doc_id);
    if (g > 0) dcg += static_cast<double>(g) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> grades;
  for (const auto& [doc, g] : judgments)
    if (g > 0) grades.push_back(g);
  if (grades.empty()) return 0.0;
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
    idcg += static_cast<double>(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

inline double average_precision(const Ranking& ranking, const std::map<std::string, int>& judgments,
                                std::size_t depth = 1000) {
  std::size_t R = 0;
  for (const auto& [doc, g] : judgments)
    if (g > 0) ++R;
  if (R == 0) return 0.0;
  double sum = 0.0;
  std::size_t rel_so_far = 0;
  const std::size_t n = std::min(depth, ranking.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (metric_detail::grade_of(judgments, ranking.entries[i].doc_id) > 0) {
      ++rel_so_far;
      sum += static_cast<double>(rel_so_far) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(R);
}

inline double bpref(const Ranking& ranking, const std::map<std::string, int>& judgments) {
  std::size_t R = 0, N = 0;
  for (const auto& [doc, g] : judgments)
    (g > 0 ? R : N) += 1;
  if (R == 0) return 0.0;
  double sum = 0.0;
  std::size_t nonrel_above = 0;
  for (const ScoredDoc& e : ranking.entries) {
    int g = metric_detail::grade_of(judgments, e.doc_id);
    if (g < 0) continue;  // unjudged: ignored entirely
    if (g > 0) {
      if (N == 0) {
        sum += 1.0;
      } else {
        double penalty = static_cast<double>(std::min(nonrel_above, R)) /
                         static_cast<double>(std::min(R, N));
        sum += 1.0 - penalty;
      }
    } else {
      ++nonrel_above;
    }
  }
  return sum / static_cast<double>(R);
}

struct PairedTest {
  double t_statistic;
  double p_value;
  std::size_t degrees_of_freedom;
};

// Two-tailed paired Student's t-test over the topics common to both maps.
inline PairedTest paired_test(const std::map<std::string, double>& a,
                              const std::map<std::string, double>& b) {
  std::vector<double> diffs;
  for (const auto& [topic, va] : a) {
    auto it = b.find(topic);
    if (it != b.end()) diffs.push_back(va - it->second);
  }
  const std::size_t n = diffs.size();
  if (n < 2) throw ConfigError("paired_test: need at least 2 common topics, got " + std::to_string(n));
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const std::size_t df = n - 1;
  double sd = std::sqrt(ss / static_cast<double>(df));
  if (sd == 0.0) {
    if (mean == 0.0) return {0.0, 1.0, df};
    return {mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(),
            0.0, df};
  }
  double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  boost::math::students_t dist(static_cast<double>(df));
  double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return {t, p, df};
}

// Per-topic nDCG difference (fused - baseline), sorted by decreasing delta.
// Topics lacking relevance judgments are skipped with a warning.
inline std::vector<std::pair<std::string, double>> delta_per_topic(
    const Run& fused, const Run& baseline, const Qrels& qrels, std::size_t ndcg_cut = 1000,
    Warnings* warnings = nullptr) {
  std::vector<std::pair<std::string, double>> deltas;
  for (const auto& [topic, fused_ranking] : fused) {
    auto it = baseline.find(topic);
    if (it == baseline.end()) continue;
    const auto* judgments = qrels.find_topic(topic);
    if (!judgments || qrels.num_relevant(topic) == 0) {
      warn(warnings, "delta: topic " + topic + " has no relevant documents, skipped");
      continue;
    }
    double d = ndcg_at(fused_ranking, *judgments, ndcg_cut) - ndcg_at(it->second, *judgments, ndcg_cut);
    deltas.emplace_back(topic, d);
  }
  if (deltas.empty()) throw ConfigError("delta_per_topic: no evaluable topics shared by the two runs");
  std::sort(deltas.begin(), deltas.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return deltas;
}

struct Significance {
  std::string baseline_tag;
  double t_statistic;
  double p_value;
  std::string test_name = "paired-t";
};

struct MetricReport {
  std::string metric;
  std::map<std::string, double> per_topic;
  double aggregate = 0.0;
  std::vector<Significance> significance;
};

struct EvalParams {
  std::size_t precision_cut = 10;
  std::size_t ndcg_cut = 10;
  std::size_t map_depth = 1000;
};

// Evaluates one run against the qrels. Topics missing from the qrels or
// with zero relevant documents are excluded from every metric, with a
// warning, so all four reports aggregate over the same topic set.
inline std::vector<MetricReport> evaluate_run(const Run& run, const Qrels& qrels,
                                              const EvalParams& params = {},
                                              Warnings* warnings = nullptr) {
  MetricReport p{"P@" + std::to_string(params.precision_cut), {}, 0.0, {}};
  MetricReport n{"nDCG@" + std::to_string(params.ndcg_cut), {}, 0.0, {}};
  MetricReport bp{"Bpref", {}, 0.0, {}};
  MetricReport ap{"MAP", {}, 0.0, {}};
  for (const auto& [topic, ranking] : run) {
    const auto* judgments = qrels.find_topic(topic);
    if (!judgments) {
      warn(warnings, "evaluate: topic " + topic + " absent from qrels, skipped");
      continue;
    }
    if (qrels.num_relevant(topic) == 0) {
      warn(warnings, "evaluate: topic " + topic + " has no relevant documents, skipped");
      continue;
    }
    p.per_topic[topic] = precision_at(ranking, *judgments, params.precision_cut);
    n.per_topic[topic] = ndcg_at(ranking, *judgments, params.ndcg_cut);
    bp.per_topic[topic] = bpref(ranking, *judgments);
    ap.per_topic[topic] = average_precision(ranking, *judgments, params.map_depth);
  }
  for (MetricReport* r : {&p, &n, &bp, &ap}) {
    double sum = 0.0;
    for (const auto& [topic, v] : r->per_topic) sum += v;
    r->aggregate = r->per_topic.empty() ? 0.0 : sum / static_cast<double>(r->per_topic.size());
  }
  return {p, n, bp, ap};
}

struct SystemEval {
  std::string tag;
  std::vector<MetricReport> metrics;
};

namespace metric_detail {

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace metric_detail

// Aligned plain-text table: one row per system, one column per metric.
// A value is marked '*' when significantly different from the first
// baseline at level alpha, '+' for the second baseline.
inline std::string render_table(std::span<const SystemEval> systems, double alpha = 0.05) {
  if (systems.empty()) return "";
  std::vector<std::string> header{"system"};
  for (const MetricReport& m : systems.front().metrics) header.push_back(m.metric);

  std::vector<std::vector<std::string>> rows;
  for (const SystemEval& sys : systems) {
    std::vector<std::string> row{sys.tag};
    for (const MetricReport& m : sys.metrics) {
      std::string cell = metric_detail::format_value(m.aggregate);
      std::string marks;
      for (std::size_t b = 0; b < m.significance.size() && b < 2; ++b)
        if (m.significance[b].p_value < alpha) marks += (b == 0 ? '*' : '+');
      row.push_back(cell + marks);
    }
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

  std::string out;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size()) out.append(width[c] - row[c].size() + 2, ' ');
    }
    out += '\n';
  };
  emit_row(header);
  for (const auto& row : rows) emit_row(row);
  return out;
}

}  // namespace varfuse
