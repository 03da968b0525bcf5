#include "eccot/rank_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "eccot/errors.hpp"
#include "jsonl.hpp"

namespace eccot::rank {
namespace {

bool rank_less(const CognitionScore& a, const CognitionScore& b) {
  if (a.coefficient != b.coefficient) return a.coefficient < b.coefficient;
  return a.triple_id < b.triple_id;
}

void require_unit(const Vector& v, const char* name) {
  if (std::abs(v.norm() - 1.0) > kUnitNormTolerance) {
    throw_contract(std::string("similarity_coefficient: ") + name + " is not unit norm");
  }
}

}  // namespace

void FilterConfig::validate() const {
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("tau must be in [0, 1)");
}

LinkCosines similarity_coefficient(const Vector& q_hat, const Vector& r_hat, const Vector& a_hat) {
  require_unit(q_hat, "q");
  require_unit(r_hat, "r");
  require_unit(a_hat, "a");
  LinkCosines c;
  c.cos_qr = q_hat.dot(r_hat);
  c.cos_ra = r_hat.dot(a_hat);
  c.coefficient = std::min(c.cos_qr, c.cos_ra);
  return c;
}

void assign_ranks(std::vector<CognitionScore>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rank_less(scores[a], scores[b]); });
  for (std::size_t r = 0; r < order.size(); ++r) scores[order[r]].rank = r + 1;
}

std::vector<CognitionScore> score_triples(const causal::ProjectionHead& head,
                                          std::span<const causal::CotTriple> triples) {
  std::vector<CognitionScore> scores;
  scores.reserve(triples.size());
  for (const auto& t : triples) {
    const auto p = causal::embed_triple(head, t);
    const auto c = similarity_coefficient(p.q, p.r, p.a);
    scores.push_back({t.id, c.cos_qr, c.cos_ra, c.coefficient, 0, true});
  }
  assign_ranks(scores);
  return scores;
}

ScoreDistribution score_distribution(std::span<const CognitionScore> scores, std::span<const double> quantiles) {
  if (scores.empty()) throw DataError("score_distribution: no scores");
  std::vector<CognitionScore> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), rank_less);

  ScoreDistribution dist;
  dist.sorted_coefficients.reserve(sorted.size());
  for (const auto& s : sorted) dist.sorted_coefficients.push_back(s.coefficient);

  const auto n = dist.sorted_coefficients.size();
  for (const double p : quantiles) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level must be in [0, 1]");
    const auto idx = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(p * static_cast<double>(n))));
    dist.quantiles.emplace_back(p, dist.sorted_coefficients[std::min(idx, n) - 1]);
  }

  const double width = 2.0 / static_cast<double>(kHistogramBins);
  dist.histogram.resize(kHistogramBins);
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    dist.histogram[b].low = -1.0 + width * static_cast<double>(b);
    dist.histogram[b].high = b + 1 == kHistogramBins ? 1.0 : -1.0 + width * static_cast<double>(b + 1);
  }
  for (const double c : dist.sorted_coefficients) {
    // Cosines can stray a few ulps outside [-1, 1]; clamp into the end bins.
    const double pos = (std::clamp(c, -1.0, 1.0) + 1.0) / width;
    const auto b = std::min(kHistogramBins - 1, static_cast<std::size_t>(std::floor(pos)));
    ++dist.histogram[b].count;
  }
  return dist;
}

std::size_t drop_count(double tau, std::size_t n) {
  // The epsilon absorbs binary rounding of tau (e.g. 0.2 * 10).
  return static_cast<std::size_t>(std::floor(tau * static_cast<double>(n) + 1e-9));
}

Truncation truncate(std::span<const CognitionScore> scores, const FilterConfig& config) {
  config.validate();
  if (scores.empty()) throw DataError("truncate: no scores");
  std::vector<CognitionScore> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), rank_less);
  const auto k = drop_count(config.tau, sorted.size());
  Truncation out;
  out.dropped.reserve(k);
  out.kept.reserve(sorted.size() - k);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    sorted[i].rank = i + 1;
    sorted[i].kept = i >= k;
    (sorted[i].kept ? out.kept : out.dropped).push_back(std::move(sorted[i]));
  }
  return out;
}

std::string scores_csv(std::span<const CognitionScore> scores) {
  std::ostringstream out;
  out << "triple_id,cos_qr,cos_ra,coefficient,rank,kept\n";
  for (const auto& s : scores) {
    out << io::csv_field(s.triple_id) << ',' << io::format_double(s.cos_qr) << ',' << io::format_double(s.cos_ra) << ','
        << io::format_double(s.coefficient) << ',' << s.rank << ',' << (s.kept ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string histogram_csv(std::span<const HistogramBin> bins) {
  std::ostringstream out;
  out << "bin_low,bin_high,count\n";
  for (const auto& b : bins) {
    out << io::format_double(b.low) << ',' << io::format_double(b.high) << ',' << b.count << '\n';
  }
  return out.str();
}

}  // namespace eccot::rank
