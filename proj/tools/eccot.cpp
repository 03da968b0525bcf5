// eccot: command line front end for topic fitting, prompt emission, causal
// head training and chain ranking.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "eccot/pipeline.hpp"
#include "eccot/synthetic.hpp"

namespace {

using eccot::pipeline::PipelineConfig;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool serial = false;
  std::optional<std::string> out;
  std::optional<double> tau;
  std::optional<double> lambda;
  std::optional<std::size_t> topics;
  std::optional<std::string> corpus;
  std::optional<std::string> triples;
  std::optional<std::string> embeddings;
  std::optional<std::string> pairs;
  std::optional<std::string> checkpoint;
  std::optional<std::string> head;
  std::optional<std::string> templ;
  std::optional<std::size_t> top_topics;
  std::optional<std::size_t> top_words;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--seed", o.seed, "Seed for every stochastic stage");
  cmd->add_flag("--serial", o.serial, "Single-threaded deterministic mode");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--tau", o.tau, "Truncation fraction in [0, 1)");
  cmd->add_option("--lambda", o.lambda, "MRF similarity weight");
  cmd->add_option("--topics", o.topics, "Number of topics K");
  cmd->add_option("--corpus", o.corpus, "Corpus JSON-lines file");
  cmd->add_option("--triples", o.triples, "Triples JSON-lines file");
  cmd->add_option("--embeddings", o.embeddings, "Embeddings JSON-lines file");
  cmd->add_option("--pairs", o.pairs, "Related word pair override file");
  cmd->add_option("--checkpoint", o.checkpoint, "Topic model checkpoint");
  cmd->add_option("--head", o.head, "Projection head checkpoint");
  cmd->add_option("--template", o.templ, "Prompt template file");
  cmd->add_option("--top-topics", o.top_topics, "Topics per prompt");
  cmd->add_option("--top-words", o.top_words, "Keywords per topic");
}

std::string log_level = "info";

PipelineConfig resolve(const Overrides& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : eccot::pipeline::load_config(o.config);
  if (o.seed) eccot::pipeline::set_seed(c, *o.seed);
  if (o.serial) c.serial = true;
  if (o.out) c.out = *o.out;
  if (o.tau) c.filter.tau = *o.tau;
  if (o.lambda) c.topics.lambda = *o.lambda;
  if (o.topics) c.topics.num_topics = *o.topics;
  if (o.corpus) c.corpus = *o.corpus;
  if (o.triples) c.triples = *o.triples;
  if (o.embeddings) c.embeddings = *o.embeddings;
  if (o.pairs) c.pairs = *o.pairs;
  if (o.checkpoint) c.checkpoint = *o.checkpoint;
  if (o.head) c.head = *o.head;
  if (o.templ) c.prompt_template = *o.templ;
  if (o.top_topics) c.prompt_topics = *o.top_topics;
  if (o.top_words) c.prompt_words = *o.top_words;
  log_level = c.log_level;
  return c;
}

// Errors bypass the logger (run_guarded prints them), so "error" silences it entirely.
void log_line(const std::string& line) {
  const bool warning = line.starts_with("warning:");
  if (log_level == "error" || (log_level == "warn" && !warning)) return;
  std::cerr << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eccot: topic-conditioned reasoning chain validation"};
  app.require_subcommand(1);
  Overrides o;
  int exit_code = 0;
  auto run = [&](auto&& fn) {
    exit_code = eccot::pipeline::run_guarded([&] { fn(resolve(o)); }, std::cerr);
  };

  auto* topics = app.add_subcommand("topics", "Topic model stages")->require_subcommand(1);
  auto* topics_fit = topics->add_subcommand("fit", "Fit the topic model and write checkpoint + loss CSV");
  auto* topics_infer = topics->add_subcommand("infer", "Infer per-document topic proportions");
  auto* prompts = app.add_subcommand("prompts", "Prompt emission")->require_subcommand(1);
  auto* prompts_emit = prompts->add_subcommand("emit", "Write theme-conditioned prompts");
  auto* causal = app.add_subcommand("causal", "Causal projection head")->require_subcommand(1);
  auto* causal_train = causal->add_subcommand("train", "Train the projection head");
  auto* rank = app.add_subcommand("rank", "Chain scoring")->require_subcommand(1);
  auto* rank_score = rank->add_subcommand("score", "Score chains and write the coefficient distribution");
  auto* rank_filter = rank->add_subcommand("filter", "Score, truncate and write the filtered dataset");
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end run")->require_subcommand(1);
  auto* pipeline_run = pipeline->add_subcommand("run", "topics fit, prompts emit, causal train, rank filter");
  for (auto* cmd : {topics_fit, topics_infer, prompts_emit, causal_train, rank_score, rank_filter, pipeline_run}) {
    add_common(cmd, o);
  }

  topics_fit->callback([&] {
    run([](const PipelineConfig& c) {
      const auto s = eccot::pipeline::topics_fit(c, log_line);
      std::cout << "documents=" << s.documents << " excluded=" << s.excluded << " vocab=" << s.vocab_size
                << " pairs=" << s.pairs << '\n';
    });
  });
  topics_infer->callback([&] {
    run([](const PipelineConfig& c) { std::cout << "documents=" << eccot::pipeline::topics_infer(c, log_line) << '\n'; });
  });
  prompts_emit->callback([&] {
    run([](const PipelineConfig& c) { std::cout << "prompts=" << eccot::pipeline::prompts_emit(c, log_line).records << '\n'; });
  });
  causal_train->callback([&] {
    run([](const PipelineConfig& c) {
      const auto s = eccot::pipeline::causal_train(c, log_line);
      std::cout << "positives=" << s.positives << " negatives=" << s.negatives << '\n';
    });
  });
  auto print_rank = [](const eccot::pipeline::RankSummary& s) {
    std::cout << "kept=" << s.kept << " dropped=" << s.dropped << " total=" << s.total << '\n';
  };
  rank_score->callback([&] { run([&](const PipelineConfig& c) { print_rank(eccot::pipeline::rank(c, false, log_line)); }); });
  rank_filter->callback([&] { run([&](const PipelineConfig& c) { print_rank(eccot::pipeline::rank(c, true, log_line)); }); });
  pipeline_run->callback([&] { run([&](const PipelineConfig& c) { print_rank(eccot::pipeline::run_all(c, log_line)); }); });

  // Synthetic data generators (the same ones the test suite uses as oracles).
  auto* synth = app.add_subcommand("synth", "Write bundled synthetic datasets")->require_subcommand(1);
  std::string synth_out = "synthetic";
  std::uint64_t synth_seed = 0;
  eccot::synthetic::TopicCorpusSpec corpus_spec;
  corpus_spec.num_docs = 50;
  auto* synth_corpus = synth->add_subcommand("corpus", "Topic corpus with disjoint-support topics");
  synth_corpus->add_option("--out", synth_out, "Output directory");
  synth_corpus->add_option("--seed", synth_seed, "Generator seed");
  synth_corpus->add_option("--docs", corpus_spec.num_docs, "Number of documents");
  synth_corpus->add_option("--topics", corpus_spec.num_topics, "Ground-truth topics");
  synth_corpus->add_option("--words", corpus_spec.words_per_topic, "Words per topic");
  synth_corpus->add_option("--length", corpus_spec.tokens_per_doc, "Tokens per document");
  synth_corpus->callback([&] {
    exit_code = eccot::pipeline::run_guarded(
        [&] {
          corpus_spec.seed = synth_seed;
          const auto corpus = eccot::synthetic::make_topic_corpus(corpus_spec);
          eccot::synthetic::write_corpus(corpus.documents, std::filesystem::path(synth_out) / "corpus.jsonl");
        },
        std::cerr);
  });
  eccot::synthetic::CausalTripleSpec triple_spec;
  bool labeled = false;
  auto* synth_triples = synth->add_subcommand("triples", "Causal triples with precomputed embeddings");
  synth_triples->add_option("--out", synth_out, "Output directory");
  synth_triples->add_option("--seed", synth_seed, "Generator seed");
  synth_triples->add_option("--count", triple_spec.num_positives, "Number of positive triples");
  synth_triples->add_flag("--labeled", labeled, "Append rationale-deranged negatives labeled 0");
  synth_triples->callback([&] {
    exit_code = eccot::pipeline::run_guarded(
        [&] {
          triple_spec.seed = synth_seed;
          const auto triples = labeled ? eccot::synthetic::make_labeled_triples(triple_spec)
                                       : eccot::synthetic::make_causal_triples(triple_spec);
          const std::filesystem::path dir(synth_out);
          eccot::synthetic::write_triples(triples, dir / "triples.jsonl", dir / "embeddings.jsonl");
        },
        std::cerr);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(eccot::ExitCode::kConfig);
  }
  return exit_code;
}
