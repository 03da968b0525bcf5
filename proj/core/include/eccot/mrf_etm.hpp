#pragma once

// Embedded topic model with a Markov-random-field similarity penalty on the
// word embeddings.
//
//   beta_k      = softmax_v(rho_v . topic_emb_k)
//   theta_i     ~ Dirichlet(alpha)
//   z_ij        ~ Categorical(theta_i),   w_ij ~ Categorical(beta_{z_ij})
//   sim_loss    = -lambda * sum_{(m,n) in P} cos(rho_m, rho_n)
//
// Inference is mean-field: q(theta_i) = Dirichlet(eta_i), q(z_ij) = Cat(phi_ij).
// Each epoch runs closed-form coordinate ascent on (phi, eta) and then a fixed
// number of clipped gradient steps on (rho, topic_emb) against nll + sim_loss.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eccot/corpus.hpp"
#include "eccot/errors.hpp"
#include "eccot/types.hpp"

namespace eccot::etm {

using corpus::Document;
using corpus::Vocabulary;
using corpus::WordPairSet;

struct MrfEtmConfig {
  std::size_t num_topics = 10;
  std::size_t embed_dim = 50;
  /// Symmetric Dirichlet prior; <= 0 means "use 1/num_topics".
  double dirichlet_alpha = 0.0;
  double lambda = 0.01;
  double e_step_tol = 1e-6;
  std::size_t max_e_sweeps = 100;
  double m_step_lr = 0.05;
  std::size_t m_steps_per_epoch = 20;
  double grad_clip_norm = 5.0;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  [[nodiscard]] double alpha() const noexcept {
    return dirichlet_alpha > 0.0 ? dirichlet_alpha : 1.0 / static_cast<double>(num_topics);
  }
  /// Throws ConfigError naming the first violated bound.
  void validate() const;

  friend bool operator==(const MrfEtmConfig&, const MrfEtmConfig&) = default;
};

struct TopicModel {
  Matrix rho;        // V x D word embeddings
  Matrix topic_emb;  // K x D topic embeddings
  MrfEtmConfig config;
  Vocabulary vocabulary;

  [[nodiscard]] std::size_t num_topics() const noexcept { return static_cast<std::size_t>(topic_emb.rows()); }
  [[nodiscard]] std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(rho.rows()); }
};

struct VariationalState {
  Matrix eta;                // N x K
  std::vector<Matrix> phi;   // per document: N_i x K
};

/// Individual expectation sums of the mean-field objective, summed over docs.
struct ElboTerms {
  double likelihood = 0.0;   // sum phi * log beta
  double prior = 0.0;        // sum (alpha - 1) E[log theta]
  double q_theta = 0.0;      // sum (eta - 1) E[log theta]
  double phi_entropy = 0.0;  // sum phi * log phi   (<= 0)
  double assignment = 0.0;   // sum phi * E[log theta]          (E log p(z | theta))
  double normalizers = 0.0;  // Dirichlet log-normalizers of p(theta) minus q(theta)

  /// The four-sum form: likelihood + prior - q_theta - phi_entropy.
  [[nodiscard]] double four_sum() const noexcept { return likelihood + prior - q_theta - phi_entropy; }
  /// Complete evidence lower bound E_q[log p(w, theta, z)] - E_q[log q(theta, z)].
  [[nodiscard]] double elbo() const noexcept { return four_sum() + assignment + normalizers; }
};

struct EtmLossReport {
  std::size_t epoch = 0;
  double elbo = 0.0;
  double nll = 0.0;
  double kl = 0.0;
  double sim_loss = 0.0;
  double total = 0.0;

  friend bool operator==(const EtmLossReport&, const EtmLossReport&) = default;
};

struct Gradients {
  Matrix rho;
  Matrix topic_emb;
};

// ---- single-step operations --------------------------------------------

/// K x V topic-word matrix; each row is a softmax computed with max subtraction.
/// Throws NumericError on non-finite logits.
Matrix compute_beta(const TopicModel& model);
/// Row-wise log-softmax of rho * topic_emb^T (transposed to K x V).
Matrix compute_log_beta(const TopicModel& model);

/// phi_jk proportional to beta_{k,w_j} * exp(E[log theta_k]), normalized in log space.
/// `log_beta` is K x V. Throws ContractViolation on an empty document.
Matrix update_phi(const Matrix& log_beta, const Vector& eta_row, const Document& doc);
Matrix update_phi(const TopicModel& model, const Vector& eta_row, const Document& doc);

/// eta_k = alpha + sum_j phi_jk.
Vector update_eta(double alpha, const Matrix& phi_doc);
inline Vector update_eta(const MrfEtmConfig& config, const Matrix& phi_doc) {
  return update_eta(config.alpha(), phi_doc);
}

ElboTerms compute_elbo_terms(const Matrix& log_beta, double alpha, const VariationalState& state,
                             std::span<const Document> docs);

/// Full loss report; `pairs` and `lambda` feed sim_loss. Throws NumericError
/// if any term is non-finite.
EtmLossReport compute_elbo(const TopicModel& model, const VariationalState& state, std::span<const Document> docs,
                           const WordPairSet& pairs, double lambda);

/// -lambda * sum cos(rho_m, rho_n); a zero vector contributes cosine 0.
double sim_loss(const Matrix& rho, const WordPairSet& pairs, double lambda);

/// Gradient of nll + sim_loss with respect to rho and topic_emb at fixed phi.
Gradients m_step_gradients(const TopicModel& model, const VariationalState& state, std::span<const Document> docs,
                           const WordPairSet& pairs, double lambda);

// ---- fitting & queries ---------------------------------------------------

struct FitOptions {
  /// Force single-threaded E-step. Results are identical either way because
  /// every reduction runs in document order; serial mode only limits threads.
  bool serial = true;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

struct FitResult {
  TopicModel model;
  VariationalState state;
  std::vector<EtmLossReport> reports;
  /// ELBO after each E-step sweep, one vector per epoch.
  std::vector<std::vector<double>> sweep_elbos;
};

/// Thrown when training produces a non-finite loss; carries the last model
/// whose loss was finite.
class FitAborted : public NumericError {
 public:
  FitAborted(const std::string& what, TopicModel last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  [[nodiscard]] const TopicModel& last_good() const noexcept { return last_good_; }

 private:
  TopicModel last_good_;
};

/// Initial model: rho from `init_rho` when given (V x D), otherwise
/// N(0, 0.01^2); topic_emb N(0, 0.01^2). Deterministic in config.seed.
TopicModel initialize_model(const MrfEtmConfig& config, const Vocabulary& vocabulary,
                            const std::optional<Matrix>& init_rho = std::nullopt);

/// eta_i = alpha + N_i / K, phi uniform.
VariationalState initialize_state(const MrfEtmConfig& config, std::span<const Document> docs);

/// Coordinate ascent over all documents until the relative ELBO change drops
/// below config.e_step_tol or max_e_sweeps is reached. Returns per-sweep ELBOs.
std::vector<double> run_e_step(const TopicModel& model, VariationalState& state, std::span<const Document> docs,
                               const FitOptions& options = {});

/// Throws DataError if `docs` is empty or contains an empty document, and
/// FitAborted if the loss becomes non-finite.
FitResult fit(const MrfEtmConfig& config, const Vocabulary& vocabulary, std::span<const Document> docs,
              const WordPairSet& pairs, const std::optional<Matrix>& init_rho = std::nullopt,
              const FitOptions& options = {});

/// Posterior mean of q(theta) for one document with the model frozen.
/// An empty (all-OOV) document returns the uniform prior mean.
Vector infer_theta(const TopicModel& model, const Document& doc);

struct WordScore {
  std::string term;
  double probability;
};

/// The n most probable words of topic k, descending; ties by vocabulary order.
/// Throws std::out_of_range if k >= K.
std::vector<WordScore> top_words(const TopicModel& model, std::size_t k, std::size_t n);

// ---- persistence -----------------------------------------------------------

std::string checkpoint_to_string(const TopicModel& model);
TopicModel checkpoint_from_string(const std::string& text);
void save_checkpoint(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_checkpoint(const std::filesystem::path& path);

/// CSV with header `epoch,elbo,nll,kl,sim_loss,total`.
std::string loss_reports_csv(std::span<const EtmLossReport> reports);

}  // namespace eccot::etm
