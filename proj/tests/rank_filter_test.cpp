#include "eccot/rank_filter.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "eccot/errors.hpp"

namespace {

using namespace eccot::rank;
using eccot::Vector;

CognitionScore score(std::string id, double c) { return {std::move(id), c, c, c, 0, true}; }

std::vector<CognitionScore> scores_of(const std::vector<double>& cs) {
  std::vector<CognitionScore> out;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "t%03zu", i);
    out.push_back(score(id, cs[i]));
  }
  return out;
}

Vector unit(double angle) {
  Vector v(2);
  v << std::cos(angle), std::sin(angle);
  return v;
}

TEST(Coefficient, IdenticalVectors) {
  const Vector u = unit(0.3);
  const auto c = similarity_coefficient(u, u, u);
  EXPECT_NEAR(c.cos_qr, 1.0, 1e-15);
  EXPECT_NEAR(c.cos_ra, 1.0, 1e-15);
  EXPECT_NEAR(c.coefficient, 1.0, 1e-15);
}

TEST(Coefficient, OrthogonalLinkGivesZero) {
  Vector q(3), r(3), a(3);
  r << 1, 0, 0;
  q << 0.9, std::sqrt(1 - 0.81), 0;
  a << 0, 0, 1;
  const auto c = similarity_coefficient(q, r, a);
  EXPECT_NEAR(c.cos_qr, 0.9, 1e-15);
  EXPECT_EQ(c.coefficient, 0.0);
}

TEST(Coefficient, TakesMinimum) {
  const Vector r = unit(0.0);
  const auto c = similarity_coefficient(unit(std::acos(0.9)), r, unit(-std::acos(0.4)));
  EXPECT_NEAR(c.coefficient, 0.4, 1e-15);
}

TEST(Coefficient, NonUnitIsContractViolation) {
  Vector v(2);
  v << 1.0, 1.0;
  EXPECT_THROW(similarity_coefficient(v, unit(0), unit(0)), eccot::ContractViolation);
}

TEST(Coefficient, NonDecreasingInEachLink) {
  const Vector r = unit(0.0);
  for (double qa = 0.0; qa < 3.0; qa += 0.25) {
    double prev = -2.0;
    for (double aa = 3.0; aa >= 0.0; aa -= 0.25) {  // cos_ra increasing
      const double c = similarity_coefficient(unit(qa), r, unit(aa)).coefficient;
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(Distribution, MiddleAndBoundaryQuantiles) {
  const auto s = scores_of({0.9, 0.1, 0.5});
  const std::vector<double> ps{0.5, 1e-9, 0.0, 1.0};
  const auto d = score_distribution(s, ps);
  EXPECT_EQ(d.sorted_coefficients, (std::vector<double>{0.1, 0.5, 0.9}));
  EXPECT_EQ(d.quantiles[0].second, 0.5);
  EXPECT_EQ(d.quantiles[1].second, 0.1);
  EXPECT_EQ(d.quantiles[2].second, 0.1);
  EXPECT_EQ(d.quantiles[3].second, 0.9);
}

TEST(Distribution, DegenerateAndErrors) {
  const auto s = scores_of(std::vector<double>(7, 0.42));
  const std::vector<double> ps{0.1, 0.5, 0.99};
  for (const auto& [p, v] : score_distribution(s, ps).quantiles) EXPECT_EQ(v, 0.42);
  EXPECT_THROW(score_distribution(std::vector<CognitionScore>{}, ps), eccot::DataError);
  const std::vector<double> bad{1.5};
  EXPECT_THROW(score_distribution(s, bad), eccot::ConfigError);
}

TEST(Distribution, HistogramCoversRange) {
  const auto s = scores_of({-1.0, -0.94, 0.0, 0.999, 1.0, 1.0 + 1e-15});
  const auto d = score_distribution(s, {});
  ASSERT_EQ(d.histogram.size(), kHistogramBins);
  EXPECT_EQ(d.histogram.front().low, -1.0);
  EXPECT_EQ(d.histogram.back().high, 1.0);
  std::size_t total = 0;
  for (const auto& b : d.histogram) total += b.count;
  EXPECT_EQ(total, s.size());
  EXPECT_EQ(d.histogram[0].count, 1u);
  EXPECT_EQ(d.histogram[1].count, 1u);
  EXPECT_EQ(d.histogram[20].count, 1u);
  EXPECT_EQ(d.histogram[39].count, 3u);
}

TEST(Truncate, DropsLowest) {
  const auto t = truncate(scores_of({0.9, 0.5, 0.1}), FilterConfig{1.0 / 3.0});
  ASSERT_EQ(t.dropped.size(), 1u);
  EXPECT_EQ(t.dropped[0].coefficient, 0.1);
  EXPECT_FALSE(t.dropped[0].kept);
  EXPECT_EQ(t.kept.size(), 2u);
}

TEST(Truncate, TauZeroKeepsAll) {
  const auto t = truncate(scores_of({0.3, 0.2}), FilterConfig{0.0});
  EXPECT_EQ(t.kept.size(), 2u);
  EXPECT_TRUE(t.dropped.empty());
}

TEST(Truncate, TiesBrokenById) {
  const auto t = truncate(scores_of(std::vector<double>(10, 0.5)), FilterConfig{0.3});
  ASSERT_EQ(t.dropped.size(), 3u);
  EXPECT_EQ(t.dropped[0].triple_id, "t000");
  EXPECT_EQ(t.dropped[1].triple_id, "t001");
  EXPECT_EQ(t.dropped[2].triple_id, "t002");
}

TEST(Truncate, InvalidTau) {
  const auto s = scores_of({0.1});
  EXPECT_THROW(truncate(s, FilterConfig{1.0}), eccot::ConfigError);
  EXPECT_THROW(truncate(s, FilterConfig{-0.1}), eccot::ConfigError);
  EXPECT_THROW(truncate(std::vector<CognitionScore>{}, FilterConfig{}), eccot::DataError);
}

TEST(Truncate, PartitionInvariantsOnRandomInputs) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> coarse(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 60;
    std::vector<double> cs(n);
    for (auto& c : cs) c = trial % 2 ? u(rng) : coarse(rng) / 3.0;  // odd trials: many ties
    const double tau = (trial % 10) / 10.0;
    auto input = scores_of(cs);
    std::shuffle(input.begin(), input.end(), rng);
    const auto t = truncate(input, FilterConfig{tau});
    EXPECT_EQ(t.dropped.size(), static_cast<std::size_t>(std::floor(tau * n + 1e-9)));
    EXPECT_EQ(t.dropped.size() + t.kept.size(), n);
    std::set<std::string> ids;
    for (const auto& s : t.dropped) ids.insert(s.triple_id);
    for (const auto& s : t.kept) ids.insert(s.triple_id);
    EXPECT_EQ(ids.size(), n);
    if (!t.dropped.empty() && !t.kept.empty()) {
      EXPECT_LE(t.dropped.back().coefficient, t.kept.front().coefficient);
    }
    for (std::size_t i = 0; i < t.kept.size(); ++i) EXPECT_EQ(t.kept[i].rank, t.dropped.size() + i + 1);
  }
}

TEST(Ranks, PermutationWithTieBreak) {
  auto s = scores_of({0.5, 0.2, 0.5, -0.1});
  s[0].triple_id = "b";
  s[2].triple_id = "a";
  assign_ranks(s);
  EXPECT_EQ(s[3].rank, 1u);
  EXPECT_EQ(s[1].rank, 2u);
  EXPECT_EQ(s[2].rank, 3u);
  EXPECT_EQ(s[0].rank, 4u);
}

TEST(Ranks, CoefficientIndependentOfDatasetOrder) {
  const auto h = eccot::causal::ProjectionHead::identity(2);
  std::vector<eccot::corpus::CotTriple> ts(3);
  for (int i = 0; i < 3; ++i) {
    ts[i].id = "t" + std::to_string(i);
    ts[i].embeddings = eccot::corpus::TripleEmbeddings{unit(i), unit(0.5 * i), unit(0.1)};
  }
  const auto a = score_triples(h, ts);
  std::reverse(ts.begin(), ts.end());
  const auto b = score_triples(h, ts);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].triple_id, b[2 - i].triple_id);
    EXPECT_EQ(a[i].coefficient, b[2 - i].coefficient);
    EXPECT_EQ(a[i].rank, b[2 - i].rank);
  }
}

TEST(Csv, Formats) {
  auto s = scores_of({0.25});
  s[0].rank = 1;
  s[0].kept = false;
  s[0].triple_id = "a,b";
  EXPECT_EQ(scores_csv(s), "triple_id,cos_qr,cos_ra,coefficient,rank,kept\n\"a,b\",0.25,0.25,0.25,1,0\n");
  const std::vector<HistogramBin> bins{{-1.0, -0.95, 3}};
  EXPECT_EQ(histogram_csv(bins), "bin_low,bin_high,count\n-1,-0.95,3\n");
}

}  // namespace
