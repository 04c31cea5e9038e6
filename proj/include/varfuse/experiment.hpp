#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "varfuse/chat_client.hpp"
#include "varfuse/config.hpp"
#include "varfuse/error.hpp"
#include "varfuse/fusion.hpp"
#include "varfuse/fsutil.hpp"
#include "varfuse/index.hpp"
#include "varfuse/metrics.hpp"
#include "varfuse/querygen.hpp"
#include "varfuse/retrieval.hpp"
#include "varfuse/trecio.hpp"

namespace varfuse {

namespace experiment_detail {

inline std::string pad_index(std::size_t i, std::size_t n) {
  std::string width_ref = std::to_string(n);
  std::string s = std::to_string(i);
  return s.size() >= width_ref.size() ? s : std::string(width_ref.size() - s.size(), '0') + s;
}

// Runs fn(0..n-1) on up to `workers` threads. The first exception wins and
// is rethrown on the calling thread after all workers drain.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::min(std::max<std::size_t>(workers, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void log_warnings(std::ostream& log, const Warnings& warnings) {
  for (const std::string& w : warnings) log << "warning: " << w << "\n";
}

}  // namespace experiment_detail

// Run tag of a fused system: <strategy>-rrf<k>-m<m>.
inline std::string fused_tag(const std::string& strategy, double k, std::size_t m) {
  char kbuf[32];
  if (k == std::floor(k) && std::fabs(k) < 1e15)
    std::snprintf(kbuf, sizeof(kbuf), "%.0f", k);
  else
    std::snprintf(kbuf, sizeof(kbuf), "%g", k);
  return strategy + "-rrf" + kbuf + "-m" + std::to_string(m);
}

// All artifact locations under the output directory.
struct ExperimentPaths {
  std::filesystem::path out;

  explicit ExperimentPaths(const ExperimentConfig& cfg) : out(cfg.output_dir) {}

  std::filesystem::path index() const { return out / "index.bin"; }
  std::filesystem::path variants_jsonl(const std::string& strategy) const {
    return out / "variants" / (strategy + ".jsonl");
  }
  std::filesystem::path variants_tsv(const std::string& strategy) const {
    return out / "variants" / (strategy + ".tsv");
  }
  std::filesystem::path title_run() const { return out / "runs" / "bm25-title.run"; }
  std::filesystem::path rm3_run() const { return out / "runs" / "bm25-rm3.run"; }
  std::filesystem::path variant_run(const std::string& strategy, std::size_t i, std::size_t n) const {
    return out / "runs" / "variants" /
           (strategy + "-v" + experiment_detail::pad_index(i, n) + ".run");
  }
  std::filesystem::path fused_run(const std::string& tag) const {
    return out / "runs" / "fused" / (tag + ".run");
  }
  std::filesystem::path report_txt() const { return out / "eval" / "report.txt"; }
  std::filesystem::path report_jsonl() const { return out / "eval" / "report.jsonl"; }
  std::filesystem::path delta_tsv(const std::string& tag) const {
    return out / "analysis" / ("delta-ndcg-" + tag + ".tsv");
  }
};

namespace experiment_detail {

inline bool all_exist(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths)
    if (!std::filesystem::exists(p)) return false;
  return true;
}

inline void require_artifact(const std::filesystem::path& path, const std::string& stage) {
  if (!std::filesystem::exists(path))
    throw IoError("missing artifact " + path.string() + ": run the '" + stage + "' stage first");
}

inline std::unique_ptr<ChatClient> make_client(const ExperimentConfig& cfg) {
  if (cfg.client == "stub") return std::make_unique<StubChatClient>();
  HttpClientConfig hc;
  hc.endpoint = cfg.endpoint;
  hc.model = cfg.model;
  hc.api_key_env = cfg.api_key_env;
  hc.max_retries = cfg.max_retries;
  hc.backoff_ms = cfg.backoff_ms;
  hc.max_concurrency = cfg.workers;
  hc.cache_dir = cfg.cache_dir;
  return std::make_unique<HttpChatClient>(std::move(hc));
}

inline PromptStrategy make_strategy(const ExperimentConfig& cfg) {
  PromptStrategy strategy;
  strategy.kind = strategy_from_string(cfg.strategy);
  if (strategy.kind == PromptStrategy::P3)
    strategy.examples = cfg.p3_examples.empty() ? default_p3_examples()
                                                : parse_p3_examples_file(cfg.p3_examples);
  return strategy;
}

}  // namespace experiment_detail

inline void cmd_index(const ExperimentConfig& cfg, std::ostream& log, bool force = false) {
  ExperimentPaths paths(cfg);
  if (!force && std::filesystem::exists(paths.index())) {
    log << "index: skipped, " << paths.index().string() << " exists\n";
    return;
  }
  IndexBuilder builder(cfg.analyzer);
  std::size_t count = 0;
  for_each_document(cfg.corpus, [&](Document&& doc) {
    builder.add(doc);
    ++count;
  });
  InvertedIndex index = builder.finish();
  std::filesystem::create_directories(paths.out);
  std::filesystem::path tmp = paths.index();
  tmp += ".tmp";
  index.save(tmp);
  std::filesystem::rename(tmp, paths.index());
  log << "index: " << count << " documents, " << index.num_terms() << " terms -> "
      << paths.index().string() << "\n";
}

inline void cmd_generate(const ExperimentConfig& cfg, std::ostream& log, bool force = false) {
  namespace d = experiment_detail;
  ExperimentPaths paths(cfg);
  auto jsonl = paths.variants_jsonl(cfg.strategy);
  auto tsv = paths.variants_tsv(cfg.strategy);
  if (!force && d::all_exist({jsonl, tsv})) {
    log << "generate: skipped, variant files exist\n";
    return;
  }
  std::vector<Topic> topics = parse_topics_file(cfg.topics);
  PromptStrategy strategy = d::make_strategy(cfg);
  std::unique_ptr<ChatClient> client = d::make_client(cfg);
  GenerateOptions opts{cfg.num_variants, cfg.seed, cfg.temperature, cfg.system_message_split};

  std::vector<QueryVariantSet> sets(topics.size());
  std::vector<Warnings> topic_warnings(topics.size());
  d::parallel_for(topics.size(), cfg.workers, [&](std::size_t i) {
    sets[i] = generate_variants(*client, topics[i], strategy, opts, &topic_warnings[i]);
  });
  for (const Warnings& w : topic_warnings) d::log_warnings(log, w);

  write_variants_jsonl(sets, jsonl);
  write_variants_tsv(sets, tsv);
  std::size_t total = 0;
  for (const auto& s : sets) total += s.queries.size();
  log << "generate: " << total << " variants (" << cfg.strategy << ") for " << topics.size()
      << " topics -> " << jsonl.string() << "\n";
}

inline void cmd_retrieve(const ExperimentConfig& cfg, std::ostream& log, bool force = false) {
  namespace d = experiment_detail;
  ExperimentPaths paths(cfg);
  const std::size_t n = cfg.num_variants;
  std::vector<std::filesystem::path> outputs{paths.title_run(), paths.rm3_run()};
  for (std::size_t i = 1; i <= n; ++i) outputs.push_back(paths.variant_run(cfg.strategy, i, n));
  if (!force && d::all_exist(outputs)) {
    log << "retrieve: skipped, run files exist\n";
    return;
  }
  d::require_artifact(paths.index(), "index");
  d::require_artifact(paths.variants_jsonl(cfg.strategy), "generate");

  InvertedIndex index = InvertedIndex::load(paths.index());
  if (!(index.analyzer() == cfg.analyzer))
    log << "warning: index analyzer differs from the configured analyzer; queries use the index's\n";
  std::vector<Topic> topics = parse_topics_file(cfg.topics);
  std::vector<QueryVariantSet> variant_sets = parse_variants_jsonl_file(paths.variants_jsonl(cfg.strategy));

  // title and RM3 baselines
  {
    std::vector<Ranking> title_rankings(topics.size());
    std::vector<Ranking> rm3_rankings(topics.size());
    std::vector<Warnings> topic_warnings(topics.size());
    d::parallel_for(topics.size(), cfg.workers, [&](std::size_t i) {
      const Topic& t = topics[i];
      title_rankings[i] = search(index, t.topic_id, t.title, cfg.bm25, &topic_warnings[i]);
      WeightedQuery wq = rm3_expand(index, t.title, cfg.rm3, cfg.bm25, &topic_warnings[i]);
      rm3_rankings[i] = search_weighted(index, t.topic_id, wq, cfg.bm25, &topic_warnings[i]);
    });
    for (const Warnings& w : topic_warnings) d::log_warnings(log, w);
    Run title_run, rm3_run;
    for (std::size_t i = 0; i < topics.size(); ++i) {
      title_run.emplace(topics[i].topic_id, std::move(title_rankings[i]));
      rm3_run.emplace(topics[i].topic_id, std::move(rm3_rankings[i]));
    }
    write_run(title_run, paths.title_run(), "bm25-title");
    write_run(rm3_run, paths.rm3_run(), "bm25-rm3");
  }

  // one run per variant position i: the i-th query of every topic
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<std::optional<Ranking>> rankings(variant_sets.size());
    std::vector<Warnings> set_warnings(variant_sets.size());
    d::parallel_for(variant_sets.size(), cfg.workers, [&](std::size_t s) {
      const QueryVariantSet& set = variant_sets[s];
      if (set.queries.size() < i) {
        warn(&set_warnings[s], "topic " + set.topic_id + " has no variant " + std::to_string(i) +
                                  ", omitted from that run");
        return;
      }
      rankings[s] = search(index, set.topic_id, set.queries[i - 1], cfg.bm25, &set_warnings[s]);
    });
    for (const Warnings& w : set_warnings) d::log_warnings(log, w);
    Run run;
    for (std::size_t s = 0; s < variant_sets.size(); ++s)
      if (rankings[s]) run.emplace(variant_sets[s].topic_id, std::move(*rankings[s]));
    write_run(run, paths.variant_run(cfg.strategy, i, n), cfg.strategy + "-v" + std::to_string(i));
  }
  log << "retrieve: 2 baseline runs + " << n << " variant runs -> "
      << (paths.out / "runs").string() << "\n";
}

inline void cmd_fuse(const ExperimentConfig& cfg, std::ostream& log, bool force = false) {
  namespace d = experiment_detail;
  ExperimentPaths paths(cfg);
  std::vector<std::filesystem::path> outputs;
  for (std::size_t m : cfg.m_list) outputs.push_back(paths.fused_run(fused_tag(cfg.strategy, cfg.rrf.k, m)));
  if (!force && d::all_exist(outputs)) {
    log << "fuse: skipped, fused runs exist\n";
    return;
  }
  const std::size_t n = cfg.num_variants;
  std::size_t max_m = 0;
  for (std::size_t m : cfg.m_list) max_m = std::max(max_m, m);
  std::vector<Run> variant_runs;
  for (std::size_t i = 1; i <= max_m; ++i) {
    auto path = paths.variant_run(cfg.strategy, i, n);
    d::require_artifact(path, "retrieve");
    variant_runs.push_back(parse_run_file(path));
  }
  std::vector<std::string> topic_ids;
  for (const auto& [topic, ranking] : variant_runs.front()) topic_ids.push_back(topic);

  for (std::size_t m : cfg.m_list) {
    std::string tag = fused_tag(cfg.strategy, cfg.rrf.k, m);
    std::vector<std::optional<Ranking>> fused(topic_ids.size());
    std::vector<Warnings> topic_warnings(topic_ids.size());
    d::parallel_for(topic_ids.size(), cfg.workers, [&](std::size_t ti) {
      const std::string& topic = topic_ids[ti];
      std::vector<Ranking> inputs;
      for (std::size_t i = 0; i < m; ++i) {
        auto it = variant_runs[i].find(topic);
        if (it != variant_runs[i].end()) inputs.push_back(it->second);
      }
      if (inputs.empty()) {
        warn(&topic_warnings[ti], "topic " + topic + ": no variant rankings to fuse, omitted");
        return;
      }
      if (inputs.size() < m)
        warn(&topic_warnings[ti], "topic " + topic + ": fusing " + std::to_string(inputs.size()) +
                                      " of " + std::to_string(m) + " variant rankings");
      fused[ti] = rrf_fuse(inputs, cfg.rrf);
    });
    for (const Warnings& w : topic_warnings) d::log_warnings(log, w);
    Run run;
    for (std::size_t ti = 0; ti < topic_ids.size(); ++ti)
      if (fused[ti]) run.emplace(topic_ids[ti], std::move(*fused[ti]));
    write_run(run, paths.fused_run(tag), tag);
  }
  log << "fuse: " << cfg.m_list.size() << " fused runs -> " << (paths.out / "runs" / "fused").string()
      << "\n";
}

namespace experiment_detail {

inline nlohmann::json significance_json(const std::string& system, const std::string& metric,
                                        const Significance& sig) {
  return nlohmann::json{{"system", system},   {"metric", metric}, {"baseline", sig.baseline_tag},
                        {"t", sig.t_statistic}, {"p", sig.p_value}, {"test", sig.test_name}};
}

}  // namespace experiment_detail

inline void cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log, bool force = false) {
  namespace d = experiment_detail;
  ExperimentPaths paths(cfg);
  if (!force && d::all_exist({paths.report_txt(), paths.report_jsonl()})) {
    log << "evaluate: skipped, reports exist\n";
    return;
  }
  d::require_artifact(paths.title_run(), "retrieve");
  d::require_artifact(paths.rm3_run(), "retrieve");
  Qrels qrels = parse_qrels_file(cfg.qrels);
  EvalParams eval{cfg.precision_cut, cfg.ndcg_cut, cfg.map_depth};

  struct NamedRun {
    std::string tag;
    Run run;
  };
  std::vector<NamedRun> systems;
  systems.push_back({"bm25-title", parse_run_file(paths.title_run())});
  systems.push_back({"bm25-rm3", parse_run_file(paths.rm3_run())});
  for (std::size_t m : cfg.m_list) {
    std::string tag = fused_tag(cfg.strategy, cfg.rrf.k, m);
    d::require_artifact(paths.fused_run(tag), "fuse");
    systems.push_back({tag, parse_run_file(paths.fused_run(tag))});
  }

  Warnings warnings;
  std::vector<SystemEval> evals;
  for (const NamedRun& sys : systems)
    evals.push_back({sys.tag, evaluate_run(sys.run, qrels, eval, &warnings)});
  d::log_warnings(log, warnings);

  // significance of every non-baseline system against both baselines
  for (std::size_t s = 0; s < evals.size(); ++s) {
    if (s == 0) continue;
    std::size_t n_baselines = s == 1 ? 1 : 2;
    for (std::size_t m = 0; m < evals[s].metrics.size(); ++m) {
      for (std::size_t b = 0; b < n_baselines; ++b) {
        const auto& base = evals[b].metrics[m];
        const auto& mine = evals[s].metrics[m];
        if (mine.per_topic.size() < 2) continue;
        PairedTest t = paired_test(mine.per_topic, base.per_topic);
        evals[s].metrics[m].significance.push_back({evals[b].tag, t.t_statistic, t.p_value, "paired-t"});
      }
    }
  }

  std::string table = render_table(evals, cfg.alpha);
  table += "\ntopics evaluated: " + std::to_string(evals.front().metrics.front().per_topic.size()) +
           "\n* p < " + metric_detail::format_value(cfg.alpha) + " vs bm25-title (two-tailed paired t)\n" +
           "+ p < " + metric_detail::format_value(cfg.alpha) + " vs bm25-rm3 (two-tailed paired t)\n";
  atomic_write_file(paths.report_txt(), table);

  std::string jsonl;
  for (const SystemEval& sys : evals) {
    for (const MetricReport& m : sys.metrics) {
      jsonl += nlohmann::json{{"system", sys.tag}, {"metric", m.metric}, {"topic", "all"},
                              {"value", m.aggregate}}.dump();
      jsonl += '\n';
      for (const auto& [topic, value] : m.per_topic) {
        jsonl += nlohmann::json{{"system", sys.tag}, {"metric", m.metric}, {"topic", topic},
                                {"value", value}}.dump();
        jsonl += '\n';
      }
      for (const Significance& sig : m.significance) {
        jsonl += d::significance_json(sys.tag, m.metric, sig).dump();
        jsonl += '\n';
      }
    }
  }
  atomic_write_file(paths.report_jsonl(), jsonl);
  log << "evaluate: " << evals.size() << " systems -> " << paths.report_txt().string() << "\n";
  log << table;
}

inline void cmd_analyze(const ExperimentConfig& cfg, std::ostream& log, bool force = false) {
  namespace d = experiment_detail;
  ExperimentPaths paths(cfg);
  std::vector<std::filesystem::path> outputs;
  for (std::size_t m : cfg.m_list) outputs.push_back(paths.delta_tsv(fused_tag(cfg.strategy, cfg.rrf.k, m)));
  if (!force && d::all_exist(outputs)) {
    log << "analyze: skipped, delta files exist\n";
    return;
  }
  d::require_artifact(paths.title_run(), "retrieve");
  Qrels qrels = parse_qrels_file(cfg.qrels);
  Run baseline = parse_run_file(paths.title_run());
  for (std::size_t m : cfg.m_list) {
    std::string tag = fused_tag(cfg.strategy, cfg.rrf.k, m);
    d::require_artifact(paths.fused_run(tag), "fuse");
    Run fused = parse_run_file(paths.fused_run(tag));
    Warnings warnings;
    auto deltas = delta_per_topic(fused, baseline, qrels, cfg.delta_ndcg_cut, &warnings);
    d::log_warnings(log, warnings);
    atomic_write_file(paths.delta_tsv(tag), render_delta_tsv(deltas));
  }
  log << "analyze: " << cfg.m_list.size() << " delta files -> " << (paths.out / "analysis").string()
      << "\n";
}

inline void cmd_experiment(const ExperimentConfig& cfg, std::ostream& log, bool force = false) {
  cmd_index(cfg, log, force);
  cmd_generate(cfg, log, force);
  cmd_retrieve(cfg, log, force);
  cmd_fuse(cfg, log, force);
  cmd_evaluate(cfg, log, force);
  cmd_analyze(cfg, log, force);
}

}  // namespace varfuse
