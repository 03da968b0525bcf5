#pragma once

// Siamese linear projection head over precomputed sentence embeddings, trained
// with a two-case contrastive loss over (question, rationale, answer) triples.
//
// With f(u) = Wu / |Wu| and d(u, v) = 1 - cos(f(u), f(v)):
//   y = 1:  L_qr = d(q, r),              L_ra = d(r, a),              loss = L_qr + L_ra
//   y = 0:  L_qr = max(0, m - d(q, r)),  L_ra = max(0, m - d(r, a)),  loss = max(L_qr, L_ra)
// A batch loss is the mean of the per-sample losses.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eccot/corpus.hpp"
#include "eccot/types.hpp"

namespace eccot::causal {

using corpus::CotTriple;

struct ProjectionHead {
  Matrix weight;  // d_out x d_in

  [[nodiscard]] std::size_t d_in() const noexcept { return static_cast<std::size_t>(weight.cols()); }
  [[nodiscard]] std::size_t d_out() const noexcept { return static_cast<std::size_t>(weight.rows()); }

  static ProjectionHead identity(std::size_t dim);
};

enum class NegativeStrategy { kLabeled, kShuffleRationale };

struct ContrastiveConfig {
  double margin = 0.5;
  double lr = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  NegativeStrategy negative_strategy = NegativeStrategy::kShuffleRationale;
  /// 0 means d_out = d_in.
  std::size_t d_out = 0;

  /// Throws ConfigError naming the first violated bound.
  void validate() const;
};

struct TripleBatch {
  Matrix q;  // B x d_in
  Matrix r;
  Matrix a;
  std::vector<int> y;

  [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
};

struct LinkLosses {
  double qr = 0.0;
  double ra = 0.0;
};

/// Unit-normalized projection. Throws std::domain_error if the input or its
/// projection is the zero vector.
Vector project(const ProjectionHead& head, const Vector& v);

LinkLosses link_losses(const ProjectionHead& head, const Vector& q, const Vector& r, const Vector& a, int y,
                       double margin);

/// Mean per-sample loss. Throws ContractViolation on an empty or ragged batch.
double contrastive_loss(const ProjectionHead& head, const TripleBatch& batch, double margin);

struct LossAndGradient {
  double loss = 0.0;
  Matrix grad;  // d_out x d_in
};

/// Batch loss and its gradient with respect to the head weight.
LossAndGradient contrastive_loss_gradient(const ProjectionHead& head, const TripleBatch& batch, double margin);

/// Stacks triples (which must carry embeddings and labels) into a batch;
/// a missing label counts as y = 1.
TripleBatch make_batch(std::span<const CotTriple> triples);

/// kShuffleRationale: one negative per positive (label absent or 1), built by
/// a seeded derangement of rationales; ids get a ".neg" suffix.
/// kLabeled: the input rows already labeled 0.
/// Throws DataError if fewer than 2 positives are available for shuffling.
std::vector<CotTriple> make_negatives(std::span<const CotTriple> triples, NegativeStrategy strategy,
                                      std::uint64_t seed);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double pos_mean_cos_qr = 0.0;
  double pos_mean_cos_ra = 0.0;
  double neg_mean_cos_qr = 0.0;
  double neg_mean_cos_ra = 0.0;
  /// Mean of min(cos_qr, cos_ra) over positives / negatives.
  double pos_mean_min_cos = 0.0;
  double neg_mean_min_cos = 0.0;
};

struct TrainResult {
  ProjectionHead head;
  /// Row 0 evaluates the initial head; row e evaluates the head after epoch e.
  std::vector<EpochStats> curve;
};

/// Full-dataset statistics for `head` over positives and negatives.
EpochStats evaluate(const ProjectionHead& head, std::span<const CotTriple> positives,
                    std::span<const CotTriple> negatives, double margin);

/// Seeded mini-batch gradient descent on contrastive_loss. The head starts at
/// the identity when d_out == d_in, otherwise from a seeded Gaussian.
/// Throws NumericError naming the epoch if the loss becomes non-finite.
TrainResult train_projection(const ContrastiveConfig& config, std::span<const CotTriple> positives,
                             std::span<const CotTriple> negatives);

struct ProjectedTriple {
  Vector q;
  Vector r;
  Vector a;
};

ProjectedTriple embed_triple(const ProjectionHead& head, const CotTriple& triple);

std::string head_to_string(const ProjectionHead& head);
ProjectionHead head_from_string(const std::string& text);
void save_head(const ProjectionHead& head, const std::filesystem::path& path);
ProjectionHead load_head(const std::filesystem::path& path);

/// CSV with header `epoch,mean_loss,pos_mean_cos_qr,pos_mean_cos_ra,neg_mean_cos_qr,neg_mean_cos_ra`.
std::string curve_csv(std::span<const EpochStats> curve);

}  // namespace eccot::causal
