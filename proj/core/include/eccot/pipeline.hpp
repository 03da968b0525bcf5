#pragma once

// Stage orchestration behind the `eccot` CLI. Every stage reads its inputs
// from a PipelineConfig and writes artifacts under `out`:
//
//   topics/checkpoint.json  topics/loss.csv  topics/excluded_docs.txt
//   topics/theta.jsonl                                   (topics infer)
//   prompts/prompts.jsonl
//   causal/head.json  causal/curve.csv
//   rank/scores.csv  rank/histogram.csv  rank/quantiles.csv  rank/filtered.jsonl

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eccot/causal_embed.hpp"
#include "eccot/corpus.hpp"
#include "eccot/errors.hpp"
#include "eccot/mrf_etm.hpp"
#include "eccot/rank_filter.hpp"

namespace eccot::pipeline {

inline constexpr const char* kDefaultPromptTemplate = "Topics: {keywords}\nQuestion: {text}\nReason step by step.";

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path triples;
  std::filesystem::path embeddings;
  std::optional<std::filesystem::path> pairs;
  std::filesystem::path out = "eccot_out";
  /// Defaults to <out>/topics/checkpoint.json and <out>/causal/head.json.
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> head;

  corpus::TokenizeRules tokenize;
  std::size_t min_count = 1;
  std::size_t max_vocab = 50000;
  std::size_t pair_window = corpus::kDefaultPairWindow;
  std::size_t min_cooc = corpus::kDefaultMinCooccurrence;

  etm::MrfEtmConfig topics;
  causal::ContrastiveConfig contrastive;
  rank::FilterConfig filter;
  std::vector<double> quantiles{0.1, 0.25, 0.5, 0.75, 0.9};

  std::size_t prompt_topics = 2;
  std::size_t prompt_words = 5;
  std::optional<std::filesystem::path> prompt_template;

  bool serial = false;
  std::string log_level = "info";  // info | warn | error

  [[nodiscard]] std::filesystem::path checkpoint_path() const;
  [[nodiscard]] std::filesystem::path head_path() const;
};

/// Parses a JSON config file; unknown keys are rejected. Throws ConfigError.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json_text(const std::string& text);

/// Sets both the topic-model and contrastive seeds.
void set_seed(PipelineConfig& config, std::uint64_t seed);

struct TopicsFitSummary {
  std::size_t documents = 0;
  std::size_t excluded = 0;
  std::size_t vocab_size = 0;
  std::size_t pairs = 0;
  std::optional<etm::EtmLossReport> last_report;
};

struct PromptsSummary {
  std::size_t records = 0;
};

struct CausalSummary {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct RankSummary {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

/// Diagnostics sink; receives one line at a time without trailing newline.
using Logger = std::function<void(const std::string&)>;

TopicsFitSummary topics_fit(const PipelineConfig& config, const Logger& log = {});
/// Writes topics/theta.jsonl with {"id", "theta"} per corpus document.
std::size_t topics_infer(const PipelineConfig& config, const Logger& log = {});
PromptsSummary prompts_emit(const PipelineConfig& config, const Logger& log = {});
CausalSummary causal_train(const PipelineConfig& config, const Logger& log = {});
/// `write_filtered` = false gives `rank score` (scores, histogram, quantiles only).
RankSummary rank(const PipelineConfig& config, bool write_filtered, const Logger& log = {});
/// topics fit -> prompts emit -> causal train -> rank filter.
RankSummary run_all(const PipelineConfig& config, const Logger& log = {});

/// Renders the prompt template, substituting {keywords} and {text}. Keywords are
/// joined with ", " within a topic and "; " between non-empty topics.
std::string render_prompt(const std::string& templ, const std::vector<std::vector<std::string>>& keywords,
                          const std::string& text);

/// Runs `fn` and maps eccot errors to exit codes, printing the message to `err`.
int run_guarded(const std::function<void()>& fn, std::ostream& err);

}  // namespace eccot::pipeline
