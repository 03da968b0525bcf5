#include "eccot/synthetic.hpp"

#include <random>
#include <sstream>

#include "eccot/causal_embed.hpp"
#include "jsonl.hpp"

namespace eccot::synthetic {
namespace {

std::vector<double> sample_dirichlet(std::mt19937_64& rng, std::size_t k, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> out(k);
  double total = 0.0;
  for (auto& x : out) {
    x = gamma(rng);
    total += x;
  }
  if (total <= 0.0) {
    // All draws underflowed; fall back to a point mass on a random component.
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::fill(out.begin(), out.end(), 0.0);
    out[pick(rng)] = 1.0;
    return out;
  }
  for (auto& x : out) x /= total;
  return out;
}

Vector gaussian(std::mt19937_64& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> g(0.0, stddev);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = g(rng);
  return v;
}

io::Json vector_json(const Vector& v) {
  io::Json arr = io::Json::array();
  for (const double x : v) arr.push_back(x);
  return arr;
}

}  // namespace

TopicCorpus make_topic_corpus(const TopicCorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  TopicCorpus out;
  out.topic_words.resize(spec.num_topics);
  std::vector<std::vector<double>> word_probs(spec.num_topics);
  for (std::size_t k = 0; k < spec.num_topics; ++k) {
    for (std::size_t j = 0; j < spec.words_per_topic; ++j) {
      out.topic_words[k].push_back("t" + std::to_string(k) + "w" + std::to_string(j));
    }
    word_probs[k] = sample_dirichlet(rng, spec.words_per_topic, spec.word_alpha);
  }
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    const auto theta = sample_dirichlet(rng, spec.num_topics, spec.doc_alpha);
    std::discrete_distribution<std::size_t> topic(theta.begin(), theta.end());
    std::string text;
    for (std::size_t n = 0; n < spec.tokens_per_doc; ++n) {
      const auto k = topic(rng);
      std::discrete_distribution<std::size_t> word(word_probs[k].begin(), word_probs[k].end());
      if (!text.empty()) text += ' ';
      text += out.topic_words[k][word(rng)];
    }
    out.documents.push_back({"doc" + std::to_string(d), std::move(text)});
  }
  return out;
}

std::vector<corpus::CotTriple> make_causal_triples(const CausalTripleSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::size_t dim = spec.signal_dim + spec.noise_dim;
  const double noise_stddev = spec.noise_dim == 0 ? 0.0 : spec.noise_scale / std::sqrt(double(spec.noise_dim));
  const double jitter_stddev = spec.jitter / std::sqrt(double(std::max<std::size_t>(1, spec.signal_dim)));

  auto sentence = [&](const Vector& signal) {
    Vector v(static_cast<Eigen::Index>(dim));
    v.head(static_cast<Eigen::Index>(spec.signal_dim)) = signal + gaussian(rng, spec.signal_dim, jitter_stddev);
    v.tail(static_cast<Eigen::Index>(spec.noise_dim)) = gaussian(rng, spec.noise_dim, noise_stddev);
    return v;
  };

  std::vector<corpus::CotTriple> out;
  out.reserve(spec.num_positives);
  for (std::size_t i = 0; i < spec.num_positives; ++i) {
    Vector signal = gaussian(rng, spec.signal_dim, 1.0);
    signal.normalize();
    corpus::CotTriple t;
    t.id = "t" + std::to_string(i);
    t.question = "question " + std::to_string(i);
    t.rationale = "rationale " + std::to_string(i);
    t.answer = "answer " + std::to_string(i);
    t.label = 1;
    Vector q = sentence(signal);
    Vector r = sentence(signal);
    Vector a = sentence(signal);
    t.embeddings = corpus::TripleEmbeddings{std::move(q), std::move(r), std::move(a)};
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<corpus::CotTriple> make_labeled_triples(const CausalTripleSpec& spec) {
  auto triples = make_causal_triples(spec);
  auto negatives = causal::make_negatives(triples, causal::NegativeStrategy::kShuffleRationale, spec.seed + 1);
  triples.insert(triples.end(), std::make_move_iterator(negatives.begin()), std::make_move_iterator(negatives.end()));
  return triples;
}

void write_triples(const std::vector<corpus::CotTriple>& triples, const std::filesystem::path& triples_path,
                   const std::filesystem::path& embeddings_path) {
  std::ostringstream tri;
  std::ostringstream emb;
  std::size_t dim = 0;
  for (const auto& t : triples) {
    if (t.embeddings) dim = static_cast<std::size_t>(t.embeddings->q.size());
  }
  emb << io::Json{{"dim", dim}}.dump() << '\n';
  for (const auto& t : triples) {
    io::Json rec{{"id", t.id}, {"question", t.question}, {"rationale", t.rationale}, {"answer", t.answer}};
    if (t.label) rec["label"] = *t.label;
    tri << rec.dump() << '\n';
    if (t.embeddings) {
      emb << io::Json{{"id", t.id + ".q"}, {"vector", vector_json(t.embeddings->q)}}.dump() << '\n';
      emb << io::Json{{"id", t.id + ".r"}, {"vector", vector_json(t.embeddings->r)}}.dump() << '\n';
      emb << io::Json{{"id", t.id + ".a"}, {"vector", vector_json(t.embeddings->a)}}.dump() << '\n';
    }
  }
  io::write_file(triples_path, tri.str());
  io::write_file(embeddings_path, emb.str());
}

void write_corpus(const std::vector<corpus::RawDocument>& docs, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& d : docs) out << io::Json{{"id", d.id}, {"text", d.text}}.dump() << '\n';
  io::write_file(path, out.str());
}

}  // namespace eccot::synthetic
