#pragma once

// Per-chain cognition coefficients, their empirical distribution, and
// rank-count truncation of the weakest chains.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eccot/causal_embed.hpp"
#include "eccot/types.hpp"

namespace eccot::rank {

struct LinkCosines {
  double cos_qr = 0.0;
  double cos_ra = 0.0;
  /// min(cos_qr, cos_ra): a chain is only as strong as its weakest link.
  double coefficient = 0.0;
};

struct CognitionScore {
  std::string triple_id;
  double cos_qr = 0.0;
  double cos_ra = 0.0;
  double coefficient = 0.0;
  std::size_t rank = 0;  // 1-based, ascending by coefficient, ties by triple_id
  bool kept = true;
};

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
};

struct ScoreDistribution {
  std::vector<double> sorted_coefficients;
  std::vector<std::pair<double, double>> quantiles;  // (p, value)
  std::vector<HistogramBin> histogram;
};

struct FilterConfig {
  double tau = 0.2;

  /// Throws ConfigError unless 0 <= tau < 1.
  void validate() const;
};

inline constexpr std::size_t kHistogramBins = 40;
inline constexpr double kUnitNormTolerance = 1e-6;

/// Throws ContractViolation if an input is not unit norm within 1e-6.
LinkCosines similarity_coefficient(const Vector& q_hat, const Vector& r_hat, const Vector& a_hat);

/// Builds one score per triple and assigns ranks. Every triple must carry
/// embeddings.
std::vector<CognitionScore> score_triples(const causal::ProjectionHead& head, std::span<const causal::CotTriple> triples);

/// Reassigns ranks 1..N (ascending coefficient, ties by triple_id) in place.
void assign_ranks(std::vector<CognitionScore>& scores);

/// Quantile p in [0, 1] is the order statistic at 1-based index max(1, ceil(pN)).
/// Throws DataError on empty input and ConfigError on p outside [0, 1].
ScoreDistribution score_distribution(std::span<const CognitionScore> scores, std::span<const double> quantiles);

/// Number of chains truncate() drops: floor(tau * N).
std::size_t drop_count(double tau, std::size_t n);

struct Truncation {
  std::vector<CognitionScore> kept;     // ascending rank
  std::vector<CognitionScore> dropped;  // ascending rank
};

/// Drops exactly floor(tau * N) lowest-ranked chains.
Truncation truncate(std::span<const CognitionScore> scores, const FilterConfig& config);

/// CSV `triple_id,cos_qr,cos_ra,coefficient,rank,kept`, rows in input order.
std::string scores_csv(std::span<const CognitionScore> scores);
/// CSV `bin_low,bin_high,count`.
std::string histogram_csv(std::span<const HistogramBin> bins);

}  // namespace eccot::rank
