#pragma once

// Corpus ingestion: tokenization, vocabulary construction, related-word-pair
// mining, and loaders for the JSON-lines inputs (corpus, triples, embeddings,
// pair overrides).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "eccot/types.hpp"

namespace eccot::corpus {

using TermId = std::uint32_t;

struct RawDocument {
  std::string id;
  std::string text;
};

struct TokenizedDocument {
  std::string id;
  std::vector<std::string> tokens;

  friend bool operator==(const TokenizedDocument&, const TokenizedDocument&) = default;
};

/// A document re-expressed as vocabulary indices.
struct Document {
  std::string id;
  std::vector<TermId> tokens;

  friend bool operator==(const Document&, const Document&) = default;
};

struct TokenizeRules {
  std::unordered_set<std::string> stopwords;
  std::size_t min_token_length = 2;  // in code points
};

/// Lowercases ASCII, splits on ASCII non-alphanumerics and on Unicode
/// whitespace/punctuation code points, then applies stopword and length rules.
/// Throws DataError on a duplicate document id.
std::vector<TokenizedDocument> tokenize_corpus(std::span<const RawDocument> raw_docs,
                                               const TokenizeRules& rules);

/// Tokenizes one string with `rules`; exposed for prompt rendering and tests.
std::vector<std::string> tokenize_text(std::string_view text, const TokenizeRules& rules);

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Takes an already-ordered term list (e.g. from a checkpoint).
  /// Throws DataError on duplicate or empty terms.
  explicit Vocabulary(std::vector<std::string> terms);

  [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
  [[nodiscard]] bool empty() const noexcept { return terms_.empty(); }
  [[nodiscard]] const std::vector<std::string>& terms() const noexcept { return terms_; }
  [[nodiscard]] const std::string& term(TermId id) const { return terms_.at(id); }
  [[nodiscard]] std::optional<TermId> find(std::string_view term) const;

  /// Maps tokens to indices, dropping out-of-vocabulary tokens.
  [[nodiscard]] Document encode(std::string id, std::span<const std::string> tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.terms_ == b.terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> index_;
};

struct VocabularyBuild {
  Vocabulary vocabulary;
  /// Non-empty documents, in input order.
  std::vector<Document> documents;
  /// Ids of documents that became empty after dropping OOV tokens.
  std::vector<std::string> excluded_ids;
};

/// Terms are ordered by descending corpus frequency, ties by term.
/// Throws ConfigError if min_count < 1 or the resulting vocabulary is empty.
VocabularyBuild build_vocabulary(std::span<const TokenizedDocument> token_docs, std::size_t min_count,
                                 std::size_t max_vocab);

enum class PairSource { kMined, kExternal };

/// Unordered set of related word pairs, stored canonically as (m, n) with m < n,
/// sorted and unique.
class WordPairSet {
 public:
  using Pair = std::pair<TermId, TermId>;

  WordPairSet() = default;
  explicit WordPairSet(PairSource source) : source_(source) {}

  /// Inserts {m, n}; self pairs are ignored. Returns true if newly inserted.
  bool insert(TermId m, TermId n);

  [[nodiscard]] bool contains(TermId m, TermId n) const;
  [[nodiscard]] const std::vector<Pair>& pairs() const noexcept { return pairs_; }
  [[nodiscard]] std::size_t size() const noexcept { return pairs_.size(); }
  [[nodiscard]] bool empty() const noexcept { return pairs_.empty(); }
  [[nodiscard]] PairSource source() const noexcept { return source_; }

 private:
  std::vector<Pair> pairs_;
  PairSource source_ = PairSource::kMined;
};

inline constexpr std::size_t kDefaultPairWindow = 10;
inline constexpr std::size_t kDefaultMinCooccurrence = 5;

/// Mines related pairs: positions i < j with j - i < window co-occur; a pair is
/// kept when its co-occurrence count reaches min_cooc and its PMI is positive.
/// Throws ContractViolation if window < 1 or a token index is >= vocab_size.
WordPairSet build_pair_set(std::span<const Document> docs, std::size_t vocab_size, std::size_t window,
                           std::size_t min_cooc);

// ---- file loaders --------------------------------------------------------

enum class CorpusKind { kText, kTokens };

struct CorpusFile {
  CorpusKind kind = CorpusKind::kText;
  std::vector<RawDocument> raw;                // kind == kText
  std::vector<TokenizedDocument> pretokenized;  // kind == kTokens

  /// Tokenized view of the file; pre-tokenized records are lowercased and
  /// filtered by the same stopword/length rules.
  [[nodiscard]] std::vector<TokenizedDocument> tokenized(const TokenizeRules& rules) const;
  /// Display text per id (raw text, or tokens joined by spaces).
  [[nodiscard]] std::map<std::string, std::string> texts() const;
};

CorpusFile load_corpus(const std::filesystem::path& path);

/// Projected or raw sentence embeddings for one triple.
struct TripleEmbeddings {
  Vector q;
  Vector r;
  Vector a;
};

struct CotTriple {
  std::string id;
  std::string question;
  std::string rationale;
  std::string answer;
  std::optional<int> label;
  std::optional<TripleEmbeddings> embeddings;
};

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  /// Throws DataError on wrong length, non-finite or zero vectors, duplicate id.
  void add(std::string id, Vector v);
  [[nodiscard]] const Vector* find(const std::string& id) const;

 private:
  std::size_t dim_;
  std::map<std::string, Vector> entries_;
};

/// Throws DataError (with 1-based line number) on malformed records,
/// duplicate ids, or invalid labels.
std::vector<CotTriple> load_triples(const std::filesystem::path& path);

/// First line is {"dim": D}; every subsequent line {"id":..., "vector":[...]}.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

/// Attaches `<id>.q`, `<id>.r`, `<id>.a` rows to every triple.
/// Throws DataError naming the first missing embedding id.
void join_embeddings(std::vector<CotTriple>& triples, const EmbeddingTable& table);

struct PairFileLoad {
  WordPairSet pairs{PairSource::kExternal};
  /// Human-readable notes about records that did not resolve.
  std::vector<std::string> skipped;
};

/// Reads {"a": term, "b": term} records and resolves them against `vocab`.
PairFileLoad load_pair_file(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace eccot::corpus
