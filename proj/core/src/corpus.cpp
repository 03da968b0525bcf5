#include "eccot/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "eccot/errors.hpp"
#include "jsonl.hpp"

namespace eccot::corpus {
namespace {

bool is_separator(char32_t cp) {
  if (cp < 0x80) {
    const bool alnum = (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    return !alnum;
  }
  // Latin-1 controls, NBSP and punctuation/symbols, multiplication and division signs.
  if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return true;
  if (cp == 0x1680 || cp == 0xFEFF) return true;
  if (cp >= 0x2000 && cp <= 0x206F) return true;  // general punctuation, spaces
  if (cp >= 0x2E00 && cp <= 0x2E7F) return true;  // supplemental punctuation
  if (cp >= 0x3000 && cp <= 0x303F) return true;  // CJK symbols and punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return true;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return true;  // fullwidth punctuation
  if (cp >= 0xFF1A && cp <= 0xFF20) return true;
  if (cp >= 0xFF3B && cp <= 0xFF40) return true;
  if (cp >= 0xFF5B && cp <= 0xFF65) return true;
  return false;
}

// Decodes one UTF-8 sequence starting at text[pos]. Malformed input yields
// U+FFFD-like separator behaviour by returning a space and consuming one byte.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view text, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {U' ', 1};
  }
  if (pos + len > text.size()) return {U' ', 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) return {U' ', 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

std::size_t code_point_count(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool accept_token(const std::string& token, const TokenizeRules& rules) {
  if (token.empty()) return false;
  if (code_point_count(token) < rules.min_token_length) return false;
  return !rules.stopwords.contains(token);
}

std::uint64_t pair_key(TermId m, TermId n) { return (static_cast<std::uint64_t>(m) << 32) | n; }

}  // namespace

std::vector<std::string> tokenize_text(std::string_view text, const TokenizeRules& rules) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    auto token = ascii_lower(current);
    if (accept_token(token, rules)) tokens.push_back(std::move(token));
    current.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto [cp, len] = decode_utf8(text, pos);
    if (is_separator(cp)) {
      flush();
    } else {
      current.append(text.substr(pos, len));
    }
    pos += len;
  }
  flush();
  return tokens;
}

std::vector<TokenizedDocument> tokenize_corpus(std::span<const RawDocument> raw_docs, const TokenizeRules& rules) {
  std::set<std::string_view> seen;
  std::vector<TokenizedDocument> out;
  out.reserve(raw_docs.size());
  for (const auto& doc : raw_docs) {
    if (!seen.insert(doc.id).second) throw DataError("duplicate document id \"" + doc.id + "\"");
    out.push_back({doc.id, tokenize_text(doc.text, rules)});
  }
  return out;
}

// ---- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].empty()) throw DataError("vocabulary contains an empty term");
    if (!index_.emplace(terms_[i], static_cast<TermId>(i)).second) {
      throw DataError("duplicate vocabulary term \"" + terms_[i] + "\"");
    }
  }
}

std::optional<TermId> Vocabulary::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Document Vocabulary::encode(std::string id, std::span<const std::string> tokens) const {
  Document doc{std::move(id), {}};
  doc.tokens.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto idx = find(t)) doc.tokens.push_back(*idx);
  }
  return doc;
}

VocabularyBuild build_vocabulary(std::span<const TokenizedDocument> token_docs, std::size_t min_count,
                                 std::size_t max_vocab) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (max_vocab < 1) throw ConfigError("max_vocab must be >= 1");

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : token_docs) {
    for (const auto& t : doc.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [term, count] : counts) {
    if (count >= min_count) ranked.emplace_back(term, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_vocab) ranked.resize(max_vocab);
  if (ranked.empty()) throw ConfigError("vocabulary is empty after applying min_count/max_vocab");

  std::vector<std::string> terms;
  terms.reserve(ranked.size());
  for (auto& [term, count] : ranked) terms.push_back(std::move(term));

  VocabularyBuild out{Vocabulary(std::move(terms)), {}, {}};
  for (const auto& doc : token_docs) {
    auto encoded = out.vocabulary.encode(doc.id, doc.tokens);
    if (encoded.tokens.empty()) {
      out.excluded_ids.push_back(doc.id);
    } else {
      out.documents.push_back(std::move(encoded));
    }
  }
  return out;
}

// ---- WordPairSet -------------------------------------------------------------

bool WordPairSet::insert(TermId m, TermId n) {
  if (m == n) return false;
  const Pair p = std::minmax(m, n);
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), p);
  if (it != pairs_.end() && *it == p) return false;
  pairs_.insert(it, p);
  return true;
}

bool WordPairSet::contains(TermId m, TermId n) const {
  if (m == n) return false;
  const Pair p = std::minmax(m, n);
  return std::binary_search(pairs_.begin(), pairs_.end(), p);
}

WordPairSet build_pair_set(std::span<const Document> docs, std::size_t vocab_size, std::size_t window,
                           std::size_t min_cooc) {
  require(window >= 1, "build_pair_set: window must be >= 1");

  std::vector<double> unigram(vocab_size, 0.0);
  std::unordered_map<std::uint64_t, std::size_t> cooc;
  double total_tokens = 0.0;
  double total_cooc = 0.0;
  for (const auto& doc : docs) {
    const auto& w = doc.tokens;
    for (std::size_t i = 0; i < w.size(); ++i) {
      require(w[i] < vocab_size, "build_pair_set: token index out of range");
      unigram[w[i]] += 1.0;
      total_tokens += 1.0;
      const std::size_t end = std::min(w.size(), i + window);
      for (std::size_t j = i + 1; j < end; ++j) {
        total_cooc += 1.0;
        if (w[i] == w[j]) continue;
        const auto [m, n] = std::minmax(w[i], w[j]);
        ++cooc[pair_key(m, n)];
      }
    }
  }

  // Collect in key order so insertion is deterministic and cheap.
  std::vector<std::pair<std::uint64_t, std::size_t>> candidates(cooc.begin(), cooc.end());
  std::sort(candidates.begin(), candidates.end());

  WordPairSet out(PairSource::kMined);
  for (const auto& [key, count] : candidates) {
    if (count < min_cooc) continue;
    const auto m = static_cast<TermId>(key >> 32);
    const auto n = static_cast<TermId>(key & 0xFFFFFFFFu);
    const double p_joint = static_cast<double>(count) / total_cooc;
    const double p_m = unigram[m] / total_tokens;
    const double p_n = unigram[n] / total_tokens;
    const double pmi = std::log(p_joint / (p_m * p_n));
    if (pmi > 0.0) out.insert(m, n);
  }
  return out;
}

// ---- loaders -------------------------------------------------------------

std::vector<TokenizedDocument> CorpusFile::tokenized(const TokenizeRules& rules) const {
  if (kind == CorpusKind::kText) return tokenize_corpus(raw, rules);
  std::vector<TokenizedDocument> out;
  out.reserve(pretokenized.size());
  for (const auto& doc : pretokenized) {
    TokenizedDocument d{doc.id, {}};
    for (const auto& t : doc.tokens) {
      auto token = ascii_lower(t);
      if (accept_token(token, rules)) d.tokens.push_back(std::move(token));
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::map<std::string, std::string> CorpusFile::texts() const {
  std::map<std::string, std::string> out;
  if (kind == CorpusKind::kText) {
    for (const auto& d : raw) out.emplace(d.id, d.text);
  } else {
    for (const auto& d : pretokenized) {
      std::string joined;
      for (const auto& t : d.tokens) {
        if (!joined.empty()) joined += ' ';
        joined += t;
      }
      out.emplace(d.id, std::move(joined));
    }
  }
  return out;
}

CorpusFile load_corpus(const std::filesystem::path& path) {
  CorpusFile file;
  std::optional<CorpusKind> kind;
  std::set<std::string> ids;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    if (!rec.contains("id") || !rec["id"].is_string()) io::data_error_at(path, line, "missing string \"id\"");
    auto id = rec["id"].get<std::string>();
    const bool has_text = rec.contains("text");
    const bool has_tokens = rec.contains("tokens");
    if (has_text == has_tokens) io::data_error_at(path, line, "record needs exactly one of \"text\" or \"tokens\"");
    const auto this_kind = has_text ? CorpusKind::kText : CorpusKind::kTokens;
    if (kind && *kind != this_kind) io::data_error_at(path, line, "mixing \"text\" and \"tokens\" records");
    kind = this_kind;
    if (!ids.insert(id).second) io::data_error_at(path, line, "duplicate document id \"" + id + "\"");
    if (has_text) {
      if (!rec["text"].is_string()) io::data_error_at(path, line, "\"text\" must be a string");
      file.raw.push_back({std::move(id), rec["text"].get<std::string>()});
    } else {
      if (!rec["tokens"].is_array()) io::data_error_at(path, line, "\"tokens\" must be an array");
      file.pretokenized.push_back({std::move(id), rec["tokens"].get<std::vector<std::string>>()});
    }
  });
  file.kind = kind.value_or(CorpusKind::kText);
  return file;
}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
}

void EmbeddingTable::add(std::string id, Vector v) {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw DataError("dimension mismatch for \"" + id + "\": expected " + std::to_string(dim_) + ", got " +
                    std::to_string(v.size()));
  }
  if (!v.allFinite()) throw DataError("non-finite embedding \"" + id + "\"");
  if (v.norm() <= 0.0) throw DataError("zero-norm embedding \"" + id + "\"");
  if (entries_.contains(id)) throw DataError("duplicate embedding id \"" + id + "\"");
  entries_.emplace(std::move(id), std::move(v));
}

const Vector* EmbeddingTable::find(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<CotTriple> load_triples(const std::filesystem::path& path) {
  std::vector<CotTriple> out;
  std::set<std::string> ids;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    CotTriple t;
    for (const char* key : {"id", "question", "rationale", "answer"}) {
      if (!rec.contains(key) || !rec[key].is_string()) {
        io::data_error_at(path, line, std::string("missing string \"") + key + "\"");
      }
    }
    t.id = rec["id"].get<std::string>();
    t.question = rec["question"].get<std::string>();
    t.rationale = rec["rationale"].get<std::string>();
    t.answer = rec["answer"].get<std::string>();
    if (rec.contains("label") && !rec["label"].is_null()) {
      const auto& l = rec["label"];
      if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1)) {
        io::data_error_at(path, line, "\"label\" must be 0 or 1");
      }
      t.label = l.get<int>();
    }
    if (!ids.insert(t.id).second) io::data_error_at(path, line, "duplicate triple id \"" + t.id + "\"");
    out.push_back(std::move(t));
  });
  return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::optional<EmbeddingTable> table;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    if (!table) {
      if (!rec.contains("dim") || !rec["dim"].is_number_integer() || rec["dim"].get<long long>() <= 0) {
        io::data_error_at(path, line, "first record must be a header {\"dim\": positive int}");
      }
      table.emplace(rec["dim"].get<std::size_t>());
      return;
    }
    if (!rec.contains("id") || !rec["id"].is_string()) io::data_error_at(path, line, "missing string \"id\"");
    if (!rec.contains("vector") || !rec["vector"].is_array()) io::data_error_at(path, line, "missing \"vector\"");
    const auto& arr = rec["vector"];
    if (arr.size() != table->dim()) {
      io::data_error_at(path, line,
                        "dimension mismatch: expected " + std::to_string(table->dim()) + ", got " +
                            std::to_string(arr.size()));
    }
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) io::data_error_at(path, line, "vector entries must be numbers");
      v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    try {
      table->add(rec["id"].get<std::string>(), std::move(v));
    } catch (const DataError& e) {
      io::data_error_at(path, line, e.what());
    }
  });
  if (!table) throw DataError(path.string() + ": missing {\"dim\": D} header");
  return std::move(*table);
}

void join_embeddings(std::vector<CotTriple>& triples, const EmbeddingTable& table) {
  for (auto& t : triples) {
    auto lookup = [&](const char* suffix) -> const Vector& {
      const auto key = t.id + suffix;
      const Vector* v = table.find(key);
      if (v == nullptr) throw DataError("missing embedding \"" + key + "\"");
      return *v;
    };
    t.embeddings = TripleEmbeddings{lookup(".q"), lookup(".r"), lookup(".a")};
  }
}

PairFileLoad load_pair_file(const std::filesystem::path& path, const Vocabulary& vocab) {
  PairFileLoad out;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    if (!rec.contains("a") || !rec["a"].is_string() || !rec.contains("b") || !rec["b"].is_string()) {
      io::data_error_at(path, line, "pair record needs string fields \"a\" and \"b\"");
    }
    const auto a = rec["a"].get<std::string>();
    const auto b = rec["b"].get<std::string>();
    const auto ia = vocab.find(a);
    const auto ib = vocab.find(b);
    const std::string where = path.string() + ":" + std::to_string(line);
    if (!ia || !ib) {
      out.skipped.push_back(where + ": unresolved pair (" + a + ", " + b + ")");
    } else if (*ia == *ib) {
      out.skipped.push_back(where + ": self pair (" + a + ", " + b + ")");
    } else {
      out.pairs.insert(*ia, *ib);
    }
  });
  return out;
}

}  // namespace eccot::corpus
