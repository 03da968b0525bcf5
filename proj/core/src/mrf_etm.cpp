#include "eccot/mrf_etm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "eccot/special_functions.hpp"
#include "parallel.hpp"

namespace eccot::etm {
namespace {

constexpr double kInitStddev = 0.01;

std::size_t threads_for(const FitOptions& options) { return options.serial ? 1 : options.threads; }

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string("non-finite value in ") + what);
}

void check_documents(std::span<const Document> docs, std::size_t vocab_size) {
  for (const auto& doc : docs) {
    if (doc.tokens.empty()) throw DataError("document \"" + doc.id + "\" is empty; filter it before fitting");
    for (const auto w : doc.tokens) {
      if (w >= vocab_size) throw DataError("document \"" + doc.id + "\" has a token index outside the vocabulary");
    }
  }
}

// Per-document share of the ELBO excluding the Dirichlet normalizers.
ElboTerms document_terms(const Matrix& log_beta, double alpha, const Vector& eta, const Matrix& phi,
                         const Document& doc) {
  ElboTerms t;
  const Vector el = math::expected_log_theta(eta);
  const auto K = el.size();
  for (Eigen::Index k = 0; k < K; ++k) {
    t.prior += (alpha - 1.0) * el[k];
    t.q_theta += (eta[k] - 1.0) * el[k];
  }
  for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    const auto w = static_cast<Eigen::Index>(doc.tokens[j]);
    for (Eigen::Index k = 0; k < K; ++k) {
      const double p = phi(row, k);
      if (p > 0.0) {
        t.likelihood += p * log_beta(k, w);
        t.phi_entropy += p * std::log(p);
      }
      t.assignment += p * el[k];
    }
  }
  return t;
}

double dirichlet_normalizer_gap(double alpha, const Vector& eta) {
  const auto K = static_cast<double>(eta.size());
  double out = std::lgamma(K * alpha) - K * std::lgamma(alpha) - std::lgamma(eta.sum());
  for (const double e : eta) out += std::lgamma(e);
  return out;
}

// n_kv: expected topic-word counts under phi, K x V.
Matrix expected_counts(std::size_t K, std::size_t V, const VariationalState& state, std::span<const Document> docs) {
  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(V));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& phi = state.phi[i];
    for (std::size_t j = 0; j < docs[i].tokens.size(); ++j) {
      counts.col(docs[i].tokens[j]) += phi.row(static_cast<Eigen::Index>(j)).transpose();
    }
  }
  return counts;
}

void require_consistent(const VariationalState& state, std::span<const Document> docs) {
  require(state.phi.size() == docs.size() && static_cast<std::size_t>(state.eta.rows()) == docs.size(),
          "variational state does not match the document set");
  for (std::size_t i = 0; i < docs.size(); ++i) {
    require(static_cast<std::size_t>(state.phi[i].rows()) == docs[i].tokens.size(),
            "phi row count does not match document length");
  }
}

}  // namespace

void MrfEtmConfig::validate() const {
  if (num_topics < 1) throw ConfigError("num_topics must be >= 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (dirichlet_alpha < 0.0 || !std::isfinite(dirichlet_alpha)) throw ConfigError("dirichlet_alpha must be > 0");
  if (lambda < 0.0 || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(e_step_tol > 0.0)) throw ConfigError("e_step_tol must be > 0");
  if (max_e_sweeps < 1) throw ConfigError("max_e_sweeps must be >= 1");
  if (!(m_step_lr > 0.0)) throw ConfigError("m_step_lr must be > 0");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be > 0");
}

Matrix compute_log_beta(const TopicModel& model) {
  Matrix logits = model.topic_emb * model.rho.transpose();
  if (!logits.allFinite()) throw NumericError("compute_beta: non-finite topic-word logits");
  for (Eigen::Index k = 0; k < logits.rows(); ++k) {
    auto row = logits.row(k);
    const double hi = row.maxCoeff();
    row.array() -= hi;
    const double log_norm = std::log(row.array().exp().sum());
    row.array() -= log_norm;
  }
  return logits;
}

Matrix compute_beta(const TopicModel& model) {
  Matrix beta = compute_log_beta(model).array().exp().matrix();
  for (Eigen::Index k = 0; k < beta.rows(); ++k) beta.row(k) /= beta.row(k).sum();
  return beta;
}

Matrix update_phi(const Matrix& log_beta, const Vector& eta_row, const Document& doc) {
  require(!doc.tokens.empty(), "update_phi: document must not be empty");
  const Vector el = math::expected_log_theta(eta_row);
  const auto K = el.size();
  Matrix phi(static_cast<Eigen::Index>(doc.tokens.size()), K);
  for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
    auto row = phi.row(static_cast<Eigen::Index>(j));
    const auto w = static_cast<Eigen::Index>(doc.tokens[j]);
    for (Eigen::Index k = 0; k < K; ++k) row[k] = log_beta(k, w) + el[k];
    const double hi = row.maxCoeff();
    row.array() = (row.array() - hi).exp();
    row /= row.sum();
  }
  return phi;
}

Matrix update_phi(const TopicModel& model, const Vector& eta_row, const Document& doc) {
  return update_phi(compute_log_beta(model), eta_row, doc);
}

Vector update_eta(double alpha, const Matrix& phi_doc) {
  Vector eta = Vector::Constant(phi_doc.cols(), alpha);
  for (Eigen::Index j = 0; j < phi_doc.rows(); ++j) eta += phi_doc.row(j).transpose();
  return eta;
}

ElboTerms compute_elbo_terms(const Matrix& log_beta, double alpha, const VariationalState& state,
                             std::span<const Document> docs) {
  require_consistent(state, docs);
  ElboTerms total;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const Vector eta = state.eta.row(static_cast<Eigen::Index>(i)).transpose();
    const auto t = document_terms(log_beta, alpha, eta, state.phi[i], docs[i]);
    total.likelihood += t.likelihood;
    total.prior += t.prior;
    total.q_theta += t.q_theta;
    total.phi_entropy += t.phi_entropy;
    total.assignment += t.assignment;
    total.normalizers += dirichlet_normalizer_gap(alpha, eta);
  }
  return total;
}

double sim_loss(const Matrix& rho, const WordPairSet& pairs, double lambda) {
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& [m, n] : pairs.pairs()) {
    require(m < rho.rows() && n < rho.rows(), "sim_loss: pair index outside the vocabulary");
    const double nm = rho.row(m).norm();
    const double nn = rho.row(n).norm();
    if (nm == 0.0 || nn == 0.0) continue;
    sum += rho.row(m).dot(rho.row(n)) / (nm * nn);
  }
  return sum == 0.0 ? 0.0 : -lambda * sum;
}

EtmLossReport compute_elbo(const TopicModel& model, const VariationalState& state, std::span<const Document> docs,
                           const WordPairSet& pairs, double lambda) {
  const Matrix log_beta = compute_log_beta(model);
  const auto terms = compute_elbo_terms(log_beta, model.config.alpha(), state, docs);
  EtmLossReport r;
  r.elbo = terms.elbo();
  r.nll = -terms.likelihood;
  r.kl = -(r.elbo - terms.likelihood);
  r.sim_loss = sim_loss(model.rho, pairs, lambda);
  r.total = r.nll + r.kl + r.sim_loss;
  check_finite(r.elbo, "elbo");
  check_finite(r.nll, "nll");
  check_finite(r.kl, "kl");
  check_finite(r.sim_loss, "sim_loss");
  return r;
}

Gradients m_step_gradients(const TopicModel& model, const VariationalState& state, std::span<const Document> docs,
                           const WordPairSet& pairs, double lambda) {
  require_consistent(state, docs);
  const auto K = model.num_topics();
  const auto V = model.vocab_size();
  const Matrix counts = expected_counts(K, V, state, docs);
  const Matrix beta = compute_log_beta(model).array().exp().matrix();
  const Vector topic_totals = counts.rowwise().sum();

  // d nll / d logit_kv = n_k * beta_kv - n_kv
  Matrix dlogits = -counts;
  for (Eigen::Index k = 0; k < dlogits.rows(); ++k) dlogits.row(k) += topic_totals[k] * beta.row(k);

  Gradients g;
  g.topic_emb = dlogits * model.rho;
  g.rho = dlogits.transpose() * model.topic_emb;

  if (lambda != 0.0) {
    for (const auto& [m, n] : pairs.pairs()) {
      const auto rm = model.rho.row(m);
      const auto rn = model.rho.row(n);
      const double nm = rm.norm();
      const double nn = rn.norm();
      if (nm == 0.0 || nn == 0.0) continue;
      const double c = rm.dot(rn) / (nm * nn);
      // d cos / d rho_m = rho_n / (|m||n|) - cos * rho_m / |m|^2
      g.rho.row(m) -= lambda * (rn / (nm * nn) - c * rm / (nm * nm));
      g.rho.row(n) -= lambda * (rm / (nm * nn) - c * rn / (nn * nn));
    }
  }
  return g;
}

TopicModel initialize_model(const MrfEtmConfig& config, const Vocabulary& vocabulary,
                            const std::optional<Matrix>& init_rho) {
  config.validate();
  const auto V = static_cast<Eigen::Index>(vocabulary.size());
  const auto D = static_cast<Eigen::Index>(config.embed_dim);
  const auto K = static_cast<Eigen::Index>(config.num_topics);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, kInitStddev);

  TopicModel model;
  model.config = config;
  model.vocabulary = vocabulary;
  if (init_rho) {
    if (init_rho->rows() != V || init_rho->cols() != D) {
      throw ConfigError("init_rho must be " + std::to_string(V) + " x " + std::to_string(D));
    }
    if (!init_rho->allFinite()) throw DataError("init_rho contains non-finite values");
    model.rho = *init_rho;
  } else {
    model.rho.resize(V, D);
    for (Eigen::Index v = 0; v < V; ++v) {
      for (Eigen::Index d = 0; d < D; ++d) model.rho(v, d) = gauss(rng);
    }
  }
  model.topic_emb.resize(K, D);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index d = 0; d < D; ++d) model.topic_emb(k, d) = gauss(rng);
  }
  return model;
}

VariationalState initialize_state(const MrfEtmConfig& config, std::span<const Document> docs) {
  const auto K = static_cast<Eigen::Index>(config.num_topics);
  const double alpha = config.alpha();
  VariationalState state;
  state.eta.resize(static_cast<Eigen::Index>(docs.size()), K);
  state.phi.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto n = static_cast<double>(docs[i].tokens.size());
    state.eta.row(static_cast<Eigen::Index>(i)).setConstant(alpha + n / static_cast<double>(K));
    state.phi.push_back(
        Matrix::Constant(static_cast<Eigen::Index>(docs[i].tokens.size()), K, 1.0 / static_cast<double>(K)));
  }
  return state;
}

std::vector<double> run_e_step(const TopicModel& model, VariationalState& state, std::span<const Document> docs,
                               const FitOptions& options) {
  require_consistent(state, docs);
  const Matrix log_beta = compute_log_beta(model);
  const double alpha = model.config.alpha();
  const auto threads = threads_for(options);

  std::vector<double> elbos;
  elbos.push_back(compute_elbo_terms(log_beta, alpha, state, docs).elbo());
  check_finite(elbos.back(), "E-step elbo");
  for (std::size_t sweep = 0; sweep < model.config.max_e_sweeps; ++sweep) {
    detail::parallel_for(docs.size(), threads, [&](std::size_t i) {
      const auto row = static_cast<Eigen::Index>(i);
      const Vector eta = state.eta.row(row).transpose();
      state.phi[i] = update_phi(log_beta, eta, docs[i]);
      state.eta.row(row) = update_eta(alpha, state.phi[i]).transpose();
    });
    const double elbo = compute_elbo_terms(log_beta, alpha, state, docs).elbo();
    check_finite(elbo, "E-step elbo");
    const double prev = elbos.back();
    elbos.push_back(elbo);
    if (std::abs(elbo - prev) <= model.config.e_step_tol * std::abs(prev)) break;
  }
  return elbos;
}

FitResult fit(const MrfEtmConfig& config, const Vocabulary& vocabulary, std::span<const Document> docs,
              const WordPairSet& pairs, const std::optional<Matrix>& init_rho, const FitOptions& options) {
  config.validate();
  if (docs.empty()) throw DataError("no documents to fit");
  if (vocabulary.empty()) throw DataError("empty vocabulary");
  check_documents(docs, vocabulary.size());
  for (const auto& [m, n] : pairs.pairs()) {
    if (n >= vocabulary.size()) throw DataError("word pair index outside the vocabulary");
  }

  FitResult result;
  result.model = initialize_model(config, vocabulary, init_rho);
  result.state = initialize_state(config, docs);
  auto& model = result.model;
  TopicModel last_good = model;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    try {
      result.sweep_elbos.push_back(run_e_step(model, result.state, docs, options));

      for (std::size_t step = 0; step < config.m_steps_per_epoch; ++step) {
        const auto g = m_step_gradients(model, result.state, docs, pairs, config.lambda);
        const double norm = std::sqrt(g.rho.squaredNorm() + g.topic_emb.squaredNorm());
        check_finite(norm, "gradient norm");
        const double scale = norm > config.grad_clip_norm ? config.grad_clip_norm / norm : 1.0;
        model.rho -= (config.m_step_lr * scale) * g.rho;
        model.topic_emb -= (config.m_step_lr * scale) * g.topic_emb;
        if (!model.rho.allFinite() || !model.topic_emb.allFinite()) {
          throw NumericError("non-finite parameters after gradient step");
        }
      }

      auto report = compute_elbo(model, result.state, docs, pairs, config.lambda);
      check_finite(report.total, "total loss");
      report.epoch = epoch;
      result.reports.push_back(report);
      last_good = model;
    } catch (const NumericError& e) {
      throw FitAborted("fit aborted at epoch " + std::to_string(epoch) + ": " + e.what(), std::move(last_good));
    } catch (const std::domain_error& e) {
      throw FitAborted("fit aborted at epoch " + std::to_string(epoch) + ": " + e.what(), std::move(last_good));
    }
  }
  return result;
}

Vector infer_theta(const TopicModel& model, const Document& doc) {
  const auto K = static_cast<Eigen::Index>(model.num_topics());
  if (doc.tokens.empty()) return Vector::Constant(K, 1.0 / static_cast<double>(K));
  for (const auto w : doc.tokens) {
    if (w >= model.vocab_size()) throw DataError("document \"" + doc.id + "\" has a token outside the vocabulary");
  }
  const std::array<Document, 1> docs{doc};
  VariationalState state = initialize_state(model.config, docs);
  run_e_step(model, state, docs, FitOptions{});
  const Vector eta = state.eta.row(0).transpose();
  return eta / eta.sum();
}

std::vector<WordScore> top_words(const TopicModel& model, std::size_t k, std::size_t n) {
  if (k >= model.num_topics()) throw std::out_of_range("top_words: topic index out of range");
  const Matrix beta = compute_beta(model);
  const auto row = beta.row(static_cast<Eigen::Index>(k));
  std::vector<std::size_t> order(model.vocab_size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double pa = row[static_cast<Eigen::Index>(a)];
                      const double pb = row[static_cast<Eigen::Index>(b)];
                      if (pa != pb) return pa > pb;
                      return a < b;
                    });
  std::vector<WordScore> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({model.vocabulary.term(static_cast<corpus::TermId>(order[i])),
                   row[static_cast<Eigen::Index>(order[i])]});
  }
  return out;
}

}  // namespace eccot::etm
