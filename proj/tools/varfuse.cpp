#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "varfuse/varfuse.hpp"

namespace {

int error_exit_code(const varfuse::Error& e) {
  switch (e.kind()) {
    case varfuse::ErrorKind::config: return 2;
    case varfuse::ErrorKind::io: return 3;
    case varfuse::ErrorKind::transport: return 4;
    case varfuse::ErrorKind::parse: return 5;
  }
  return 1;
}

std::string fixture_config_toml(std::uint64_t seed) {
  return
      "# Experiment over the generated synthetic collection.\n"
      "[paths]\n"
      "corpus = \"corpus.jsonl\"\n"
      "topics = \"topics.jsonl\"\n"
      "qrels = \"qrels.txt\"\n"
      "output_dir = \"out\"\n"
      "\n"
      "[analyzer]\n"
      "lowercase = true\n"
      "stemmer = \"porter\"\n"
      "stopwords = \"default\"\n"
      "\n"
      "[bm25]\n"
      "k1 = 1.2\n"
      "b = 0.75\n"
      "depth = 1000\n"
      "\n"
      "[rm3]\n"
      "fb_docs = 10\n"
      "fb_terms = 10\n"
      "orig_weight = 0.5\n"
      "\n"
      "[rrf]\n"
      "k = 60\n"
      "cutoff = 1000\n"
      "\n"
      "[generate]\n"
      "strategy = \"P2\"\n"
      "num_variants = 100\n"
      "m_list = [3, 5, 10, 100]\n"
      "client = \"stub\"\n"
      "temperature = 0.0\n"
      "\n"
      "[evaluate]\n"
      "precision_cut = 10\n"
      "ndcg_cut = 10\n"
      "map_depth = 1000\n"
      "alpha = 0.05\n"
      "delta_ndcg_cut = 1000\n"
      "\n"
      "[experiment]\n"
      "seed = " + std::to_string(seed) + "\n"
      "workers = 4\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query-variant fusion toolkit: generate variants, retrieve, fuse, evaluate"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;

  using StageFn = void (*)(const varfuse::ExperimentConfig&, std::ostream&, bool);
  struct Stage {
    const char* name;
    const char* help;
    StageFn fn;
  };
  const Stage stages[] = {
      {"index", "build the inverted index from the corpus", &varfuse::cmd_index},
      {"generate", "generate query variants for every topic", &varfuse::cmd_generate},
      {"retrieve", "produce baseline and per-variant runs", &varfuse::cmd_retrieve},
      {"fuse", "fuse the first m variant runs per topic (RRF)", &varfuse::cmd_fuse},
      {"evaluate", "score all runs against the qrels", &varfuse::cmd_evaluate},
      {"analyze", "emit per-topic delta-nDCG files per m", &varfuse::cmd_analyze},
      {"experiment", "run all stages in order, skipping completed ones", &varfuse::cmd_experiment},
  };
  std::vector<std::pair<CLI::App*, StageFn>> dispatch;
  for (const Stage& stage : stages) {
    CLI::App* sub = app.add_subcommand(stage.name, stage.help);
    sub->add_option("-c,--config", config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "override a config value (section.key=value)");
    sub->add_flag("-f,--force", force, "redo the stage even if its outputs exist");
    dispatch.emplace_back(sub, stage.fn);
  }

  std::string fixture_dir;
  varfuse::SynthSpec spec;
  CLI::App* fixture = app.add_subcommand(
      "fixture", "generate a seeded synthetic collection plus a ready-to-run config");
  fixture->add_option("-o,--out", fixture_dir, "directory for the generated collection")->required();
  fixture->add_option("--topics", spec.num_topics, "number of topics");
  fixture->add_option("--docs-per-topic", spec.docs_per_topic, "documents per topic");
  fixture->add_option("--relevant", spec.relevant_per_topic, "relevant documents per topic");
  fixture->add_option("--vocabulary", spec.vocabulary, "vocabulary size");
  fixture->add_option("--noise", spec.noise, "background-noise ratio of relevant docs");
  fixture->add_option("--seed", spec.seed, "generation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (fixture->parsed()) {
      varfuse::SynthCollection collection = varfuse::generate_collection(spec);
      std::filesystem::path dir(fixture_dir);
      std::filesystem::create_directories(dir);
      varfuse::write_corpus_jsonl(collection.corpus, dir / "corpus.jsonl");
      varfuse::write_topics_jsonl(collection.topics, dir / "topics.jsonl");
      varfuse::write_qrels(collection.qrels, dir / "qrels.txt");
      varfuse::atomic_write_file(dir / "config.toml", fixture_config_toml(spec.seed));
      std::cerr << "fixture: " << collection.corpus.size() << " docs, " << collection.topics.size()
                << " topics -> " << dir.string() << "\n"
                << "run: varfuse experiment --config " << (dir / "config.toml").string() << "\n";
      return 0;
    }
    for (const auto& [sub, fn] : dispatch) {
      if (sub->parsed()) {
        varfuse::ExperimentConfig cfg = varfuse::load_config_file(config_path, overrides);
        fn(cfg, std::cerr, force);
        return 0;
      }
    }
  } catch (const varfuse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return error_exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
