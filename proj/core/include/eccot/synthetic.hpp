#pragma once

// Seeded generators for synthetic corpora and causal triples. They double as
// test oracles: the generating topics and the causal labels are known.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eccot/corpus.hpp"

namespace eccot::synthetic {

struct TopicCorpusSpec {
  std::size_t num_topics = 3;
  std::size_t words_per_topic = 10;
  std::size_t num_docs = 200;
  std::size_t tokens_per_doc = 50;
  /// Concentration of the per-document topic mixture.
  double doc_alpha = 0.2;
  /// Concentration of each topic's distribution over its own words.
  double word_alpha = 5.0;
  std::uint64_t seed = 0;
};

struct TopicCorpus {
  std::vector<corpus::RawDocument> documents;
  /// Word strings of each ground-truth topic (disjoint supports).
  std::vector<std::vector<std::string>> topic_words;
};

/// Topic k owns the words "t<k>w<j>"; documents are space-joined word lists.
TopicCorpus make_topic_corpus(const TopicCorpusSpec& spec);

struct CausalTripleSpec {
  std::size_t num_positives = 100;
  std::size_t signal_dim = 16;
  std::size_t noise_dim = 16;
  /// Norm of the per-sentence nuisance component relative to the unit signal.
  double noise_scale = 1.5;
  /// Per-sentence jitter added to the shared signal.
  double jitter = 0.1;
  std::uint64_t seed = 0;
};

/// Positives (label 1): q, r and a share one latent signal direction and carry
/// independent nuisance components. Embeddings are attached.
std::vector<corpus::CotTriple> make_causal_triples(const CausalTripleSpec& spec);

/// Positives followed by rationale-deranged negatives (label 0), all with embeddings.
std::vector<corpus::CotTriple> make_labeled_triples(const CausalTripleSpec& spec);

/// Writes `triples.jsonl` and `embeddings.jsonl` in the loader formats.
void write_triples(const std::vector<corpus::CotTriple>& triples, const std::filesystem::path& triples_path,
                   const std::filesystem::path& embeddings_path);

/// Writes a {"id","text"} corpus file.
void write_corpus(const std::vector<corpus::RawDocument>& docs, const std::filesystem::path& path);

}  // namespace eccot::synthetic
