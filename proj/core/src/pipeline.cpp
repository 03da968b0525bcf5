#include "eccot/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "jsonl.hpp"

namespace eccot::pipeline {
namespace fs = std::filesystem;
using io::Json;

namespace {

void check_keys(const Json& obj, const char* section, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string("config: \"") + section + "\" must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(std::string("config: unknown key \"") + key + "\" in " + section);
    }
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void read_path(const Json& obj, const char* key, const fs::path& base, fs::path& target) {
  if (!obj.contains(key)) return;
  fs::path p = obj.at(key).get<std::string>();
  target = p.is_absolute() || base.empty() ? p : base / p;
}

void read_optional_path(const Json& obj, const char* key, const fs::path& base, std::optional<fs::path>& target) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  fs::path p;
  read_path(obj, key, base, p);
  target = p;
}

causal::NegativeStrategy parse_strategy(const std::string& s) {
  if (s == "shuffle_rationale") return causal::NegativeStrategy::kShuffleRationale;
  if (s == "labeled") return causal::NegativeStrategy::kLabeled;
  throw ConfigError("config: negative_strategy must be \"shuffle_rationale\" or \"labeled\"");
}

PipelineConfig parse_config(const Json& j, const fs::path& base) {
  check_keys(j, "config",
             {"corpus", "triples", "embeddings", "pairs", "out", "checkpoint", "head", "tokenize", "vocabulary",
              "pair_mining", "topics", "contrastive", "filter", "prompts", "seed", "serial", "log_level"});
  PipelineConfig c;
  read_path(j, "corpus", base, c.corpus);
  read_path(j, "triples", base, c.triples);
  read_path(j, "embeddings", base, c.embeddings);
  read_optional_path(j, "pairs", base, c.pairs);
  read_path(j, "out", base, c.out);
  read_optional_path(j, "checkpoint", base, c.checkpoint);
  read_optional_path(j, "head", base, c.head);

  if (j.contains("tokenize")) {
    const auto& t = j["tokenize"];
    check_keys(t, "tokenize", {"stopwords", "min_token_length"});
    if (t.contains("stopwords")) {
      for (const auto& w : t["stopwords"]) c.tokenize.stopwords.insert(w.get<std::string>());
    }
    read(t, "min_token_length", c.tokenize.min_token_length);
  }
  if (j.contains("vocabulary")) {
    const auto& v = j["vocabulary"];
    check_keys(v, "vocabulary", {"min_count", "max_vocab"});
    read(v, "min_count", c.min_count);
    read(v, "max_vocab", c.max_vocab);
  }
  if (j.contains("pair_mining")) {
    const auto& p = j["pair_mining"];
    check_keys(p, "pair_mining", {"window", "min_cooc"});
    read(p, "window", c.pair_window);
    read(p, "min_cooc", c.min_cooc);
  }
  if (j.contains("topics")) {
    const auto& t = j["topics"];
    check_keys(t, "topics",
               {"num_topics", "embed_dim", "dirichlet_alpha", "lambda", "e_step_tol", "max_e_sweeps", "m_step_lr",
                "m_steps_per_epoch", "grad_clip_norm", "epochs", "seed"});
    read(t, "num_topics", c.topics.num_topics);
    read(t, "embed_dim", c.topics.embed_dim);
    read(t, "dirichlet_alpha", c.topics.dirichlet_alpha);
    read(t, "lambda", c.topics.lambda);
    read(t, "e_step_tol", c.topics.e_step_tol);
    read(t, "max_e_sweeps", c.topics.max_e_sweeps);
    read(t, "m_step_lr", c.topics.m_step_lr);
    read(t, "m_steps_per_epoch", c.topics.m_steps_per_epoch);
    read(t, "grad_clip_norm", c.topics.grad_clip_norm);
    read(t, "epochs", c.topics.epochs);
    read(t, "seed", c.topics.seed);
  }
  if (j.contains("contrastive")) {
    const auto& t = j["contrastive"];
    check_keys(t, "contrastive", {"margin", "lr", "epochs", "batch_size", "seed", "negative_strategy", "d_out"});
    read(t, "margin", c.contrastive.margin);
    read(t, "lr", c.contrastive.lr);
    read(t, "epochs", c.contrastive.epochs);
    read(t, "batch_size", c.contrastive.batch_size);
    read(t, "seed", c.contrastive.seed);
    read(t, "d_out", c.contrastive.d_out);
    if (t.contains("negative_strategy")) c.contrastive.negative_strategy = parse_strategy(t["negative_strategy"]);
  }
  if (j.contains("filter")) {
    const auto& f = j["filter"];
    check_keys(f, "filter", {"tau", "quantiles"});
    read(f, "tau", c.filter.tau);
    read(f, "quantiles", c.quantiles);
  }
  if (j.contains("prompts")) {
    const auto& p = j["prompts"];
    check_keys(p, "prompts", {"top_topics", "top_words", "template"});
    read(p, "top_topics", c.prompt_topics);
    read(p, "top_words", c.prompt_words);
    read_optional_path(p, "template", base, c.prompt_template);
  }
  if (j.contains("seed")) set_seed(c, j["seed"].get<std::uint64_t>());
  read(j, "serial", c.serial);
  read(j, "log_level", c.log_level);
  if (c.log_level != "info" && c.log_level != "warn" && c.log_level != "error") {
    throw ConfigError("log_level must be one of info, warn, error");
  }
  return c;
}

void emit(const Logger& log, const std::string& line) {
  if (log) log(line);
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("no ") + what + " path configured");
  if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

void prepare_out(const PipelineConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec || !fs::is_directory(c.out)) throw ConfigError("output directory is not writable: " + c.out.string());
}

Json vector_json(const Vector& v) {
  Json arr = Json::array();
  for (const double x : v) arr.push_back(x);
  return arr;
}

std::vector<corpus::CotTriple> load_triples_with_embeddings(const PipelineConfig& c) {
  require_file(c.triples, "triples file");
  require_file(c.embeddings, "embeddings file");
  auto triples = corpus::load_triples(c.triples);
  const auto table = corpus::load_embeddings(c.embeddings);
  corpus::join_embeddings(triples, table);
  return triples;
}

}  // namespace

fs::path PipelineConfig::checkpoint_path() const { return checkpoint.value_or(out / "topics" / "checkpoint.json"); }
fs::path PipelineConfig::head_path() const { return head.value_or(out / "causal" / "head.json"); }

PipelineConfig config_from_json_text(const std::string& text) {
  try {
    return parse_config(Json::parse(text), {});
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return parse_config(Json::parse(io::read_file(path)), path.parent_path());
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void set_seed(PipelineConfig& config, std::uint64_t seed) {
  config.topics.seed = seed;
  config.contrastive.seed = seed;
}

TopicsFitSummary topics_fit(const PipelineConfig& c, const Logger& log) {
  require_file(c.corpus, "corpus");
  c.topics.validate();
  prepare_out(c);

  const auto file = corpus::load_corpus(c.corpus);
  const auto tokenized = file.tokenized(c.tokenize);
  auto built = corpus::build_vocabulary(tokenized, c.min_count, c.max_vocab);
  if (built.documents.empty()) throw DataError("every document is empty after vocabulary filtering");

  corpus::WordPairSet pairs;
  if (c.pairs) {
    require_file(*c.pairs, "pair override file");
    auto loaded = corpus::load_pair_file(*c.pairs, built.vocabulary);
    for (const auto& s : loaded.skipped) emit(log, "warning: " + s);
    pairs = std::move(loaded.pairs);
  } else {
    if (c.pair_window < 1) throw ConfigError("pair_mining.window must be >= 1");
    pairs = corpus::build_pair_set(built.documents, built.vocabulary.size(), c.pair_window, c.min_cooc);
  }
  emit(log, "topics fit: " + std::to_string(built.documents.size()) + " documents, " +
                std::to_string(built.excluded_ids.size()) + " excluded, vocabulary " +
                std::to_string(built.vocabulary.size()) + ", " + std::to_string(pairs.size()) + " related pairs");

  etm::FitOptions options;
  options.serial = c.serial;
  etm::FitResult result;
  try {
    result = etm::fit(c.topics, built.vocabulary, built.documents, pairs, std::nullopt, options);
  } catch (const etm::FitAborted& e) {
    auto partial = c.checkpoint_path();
    partial += ".partial";
    etm::save_checkpoint(e.last_good(), partial);
    emit(log, "last good model written to " + partial.string());
    throw;
  }

  etm::save_checkpoint(result.model, c.checkpoint_path());
  io::write_file(c.out / "topics" / "loss.csv", etm::loss_reports_csv(result.reports));
  std::string excluded;
  for (const auto& id : built.excluded_ids) excluded += id + "\n";
  io::write_file(c.out / "topics" / "excluded_docs.txt", excluded);

  TopicsFitSummary s;
  s.documents = built.documents.size();
  s.excluded = built.excluded_ids.size();
  s.vocab_size = built.vocabulary.size();
  s.pairs = pairs.size();
  if (!result.reports.empty()) s.last_report = result.reports.back();
  return s;
}

std::size_t topics_infer(const PipelineConfig& c, const Logger& log) {
  require_file(c.corpus, "corpus");
  require_file(c.checkpoint_path(), "topic checkpoint");
  prepare_out(c);
  const auto model = etm::load_checkpoint(c.checkpoint_path());
  const auto tokenized = corpus::load_corpus(c.corpus).tokenized(c.tokenize);
  std::ostringstream out;
  for (const auto& doc : tokenized) {
    const auto theta = etm::infer_theta(model, model.vocabulary.encode(doc.id, doc.tokens));
    out << Json{{"id", doc.id}, {"theta", vector_json(theta)}}.dump() << '\n';
  }
  io::write_file(c.out / "topics" / "theta.jsonl", out.str());
  emit(log, "topics infer: " + std::to_string(tokenized.size()) + " documents");
  return tokenized.size();
}

std::string render_prompt(const std::string& templ, const std::vector<std::vector<std::string>>& keywords,
                          const std::string& text) {
  std::string kw;
  for (std::size_t t = 0; t < keywords.size(); ++t) {
    if (keywords[t].empty()) continue;
    if (!kw.empty()) kw += "; ";
    for (std::size_t w = 0; w < keywords[t].size(); ++w) {
      if (w > 0) kw += ", ";
      kw += keywords[t][w];
    }
  }
  std::string out;
  for (std::size_t i = 0; i < templ.size();) {
    if (templ.compare(i, 10, "{keywords}") == 0) {
      out += kw;
      i += 10;
    } else if (templ.compare(i, 6, "{text}") == 0) {
      out += text;
      i += 6;
    } else {
      out += templ[i++];
    }
  }
  return out;
}

PromptsSummary prompts_emit(const PipelineConfig& c, const Logger& log) {
  require_file(c.corpus, "corpus");
  require_file(c.checkpoint_path(), "topic checkpoint");
  prepare_out(c);
  const std::string templ = c.prompt_template ? io::read_file(*c.prompt_template) : kDefaultPromptTemplate;
  const auto model = etm::load_checkpoint(c.checkpoint_path());
  const auto file = corpus::load_corpus(c.corpus);
  const auto tokenized = file.tokenized(c.tokenize);
  const auto texts = file.texts();

  std::vector<corpus::Document> docs;
  docs.reserve(tokenized.size());
  bool any_resolved = false;
  for (const auto& d : tokenized) {
    docs.push_back(model.vocabulary.encode(d.id, d.tokens));
    any_resolved = any_resolved || !docs.back().tokens.empty();
  }
  if (!docs.empty() && !any_resolved) {
    throw DataError("corpus does not match the checkpoint vocabulary: no token resolves");
  }

  const auto K = model.num_topics();
  const auto top_t = std::min(c.prompt_topics, K);
  std::vector<std::vector<std::string>> topic_keywords(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (auto& w : etm::top_words(model, k, c.prompt_words)) topic_keywords[k].push_back(std::move(w.term));
  }

  std::ostringstream out;
  for (const auto& doc : docs) {
    const Vector theta = etm::infer_theta(model, doc);
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return theta[static_cast<Eigen::Index>(a)] > theta[static_cast<Eigen::Index>(b)];
    });
    order.resize(top_t);
    std::vector<std::vector<std::string>> keywords;
    for (const auto k : order) keywords.push_back(topic_keywords[k]);
    const auto prompt = render_prompt(templ, keywords, texts.at(doc.id));
    Json rec{{"id", doc.id}, {"theta", vector_json(theta)}, {"topics", order}, {"keywords", keywords},
             {"prompt", prompt}};
    out << rec.dump() << '\n';
  }
  io::write_file(c.out / "prompts" / "prompts.jsonl", out.str());
  emit(log, "prompts emit: " + std::to_string(docs.size()) + " prompts");
  return {docs.size()};
}

CausalSummary causal_train(const PipelineConfig& c, const Logger& log) {
  c.contrastive.validate();
  prepare_out(c);
  const auto triples = load_triples_with_embeddings(c);

  std::vector<corpus::CotTriple> positives;
  for (const auto& t : triples) {
    if (t.label.value_or(1) == 1) positives.push_back(t);
  }
  const auto negatives = causal::make_negatives(triples, c.contrastive.negative_strategy, c.contrastive.seed);
  if (positives.empty()) throw DataError("no positive triples to train on");

  const auto result = causal::train_projection(c.contrastive, positives, negatives);
  causal::save_head(result.head, c.head_path());
  io::write_file(c.out / "causal" / "curve.csv", causal::curve_csv(result.curve));

  CausalSummary s{positives.size(), negatives.size(), result.curve.front().mean_loss, result.curve.back().mean_loss};
  emit(log, "causal train: " + std::to_string(s.positives) + " positives, " + std::to_string(s.negatives) +
                " negatives, loss " + io::format_double(s.initial_loss) + " -> " + io::format_double(s.final_loss));
  return s;
}

RankSummary rank(const PipelineConfig& c, bool write_filtered, const Logger& log) {
  c.filter.validate();
  require_file(c.head_path(), "projection head");
  prepare_out(c);
  const auto triples = load_triples_with_embeddings(c);
  if (triples.empty()) throw DataError("triples file is empty");
  const auto head = causal::load_head(c.head_path());
  if (!triples.empty() && static_cast<std::size_t>(triples.front().embeddings->q.size()) != head.d_in()) {
    throw DataError("embedding dimension does not match the projection head");
  }

  auto scores = rank::score_triples(head, triples);
  const auto dist = rank::score_distribution(scores, c.quantiles);
  const auto cut = rank::truncate(scores, c.filter);
  std::set<std::string> kept_ids;
  for (const auto& s : cut.kept) kept_ids.insert(s.triple_id);
  for (auto& s : scores) s.kept = kept_ids.contains(s.triple_id);

  io::write_file(c.out / "rank" / "scores.csv", rank::scores_csv(scores));
  io::write_file(c.out / "rank" / "histogram.csv", rank::histogram_csv(dist.histogram));
  std::ostringstream q;
  q << "p,value\n";
  for (const auto& [p, v] : dist.quantiles) q << io::format_double(p) << ',' << io::format_double(v) << '\n';
  io::write_file(c.out / "rank" / "quantiles.csv", q.str());

  if (write_filtered) {
    std::ostringstream filtered;
    for (std::size_t i = 0; i < triples.size(); ++i) {
      if (!scores[i].kept) continue;
      const auto& t = triples[i];
      Json rec{{"id", t.id}, {"question", t.question}, {"rationale", t.rationale}, {"answer", t.answer}};
      if (t.label) rec["label"] = *t.label;
      rec["coefficient"] = scores[i].coefficient;
      filtered << rec.dump() << '\n';
    }
    io::write_file(c.out / "rank" / "filtered.jsonl", filtered.str());
  }

  RankSummary s{scores.size(), cut.kept.size(), cut.dropped.size()};
  emit(log, "rank: kept " + std::to_string(s.kept) + ", dropped " + std::to_string(s.dropped) + " of " +
                std::to_string(s.total));
  return s;
}

RankSummary run_all(const PipelineConfig& c, const Logger& log) {
  topics_fit(c, log);
  prompts_emit(c, log);
  causal_train(c, log);
  return rank(c, true, log);
}

int run_guarded(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return static_cast<int>(ExitCode::kOk);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kNumeric);
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kConfig);
  }
}

}  // namespace eccot::pipeline
