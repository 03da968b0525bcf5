#include "eccot/causal_embed.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "eccot/errors.hpp"
#include "eccot/synthetic.hpp"
#include "oracles/finite_difference.hpp"
#include "oracles/instances.hpp"

namespace {

using namespace eccot::causal;
using eccot::Matrix;
using eccot::Vector;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const double x : xs) v(i++) = x;
  return v;
}

CotTriple triple(std::string id, Vector q, Vector r, Vector a, std::optional<int> label = std::nullopt) {
  CotTriple t;
  t.id = std::move(id);
  t.rationale = "rationale of " + t.id;
  t.label = label;
  t.embeddings = eccot::corpus::TripleEmbeddings{std::move(q), std::move(r), std::move(a)};
  return t;
}

// ---- link losses -----------------------------------------------------------

TEST(LinkLosses, PositiveIdentical) {
  const auto h = ProjectionHead::identity(3);
  const Vector v = vec({1, 2, 3});
  const auto l = link_losses(h, v, 2.0 * v, v, 1, 0.5);
  EXPECT_NEAR(l.qr, 0.0, 1e-15);
  EXPECT_NEAR(l.ra, 0.0, 1e-15);
}

TEST(LinkLosses, NegativeIdenticalHitsMargin) {
  const auto h = ProjectionHead::identity(2);
  const Vector v = vec({0.3, -0.4});
  const auto l = link_losses(h, v, v, v, 0, 0.5);
  EXPECT_NEAR(l.qr, 0.5, 1e-15);
  EXPECT_NEAR(l.ra, 0.5, 1e-15);
}

TEST(LinkLosses, PositiveArithmetic) {
  const auto h = ProjectionHead::identity(2);
  const Vector r = vec({1, 0});
  const Vector q = vec({0.8, 0.6});
  const Vector a = vec({0.6, 0.8});
  const auto l = link_losses(h, q, r, a, 1, 0.5);
  EXPECT_NEAR(l.qr, 0.2, 1e-15);
  EXPECT_NEAR(l.ra, 0.4, 1e-15);
}

TEST(LinkLosses, ZeroVectorIsDomainError) {
  const auto h = ProjectionHead::identity(2);
  EXPECT_THROW(link_losses(h, Vector::Zero(2), vec({1, 0}), vec({1, 0}), 1, 0.5), std::domain_error);
}

// ---- batch loss ------------------------------------------------------------

TripleBatch batch_of(std::vector<CotTriple> ts) { return make_batch(ts); }

TEST(ContrastiveLoss, Examples) {
  const auto h = ProjectionHead::identity(2);
  const Vector v = vec({1, 1});
  const auto pos = triple("p", v, v, v, 1);
  const auto neg = triple("n", v, v, v, 0);
  EXPECT_NEAR(contrastive_loss(h, batch_of({pos}), 0.5), 0.0, 1e-15);
  EXPECT_NEAR(contrastive_loss(h, batch_of({neg}), 0.5), 0.5, 1e-15);
  EXPECT_NEAR(contrastive_loss(h, batch_of({pos, neg}), 0.5), 0.25, 1e-15);
}

TEST(ContrastiveLoss, EmptyBatchIsContractViolation) {
  EXPECT_THROW(contrastive_loss(ProjectionHead::identity(2), TripleBatch{}, 0.5), eccot::ContractViolation);
}

TEST(ContrastiveLoss, NonNegativeAndZeroExactlyWhenSeparated) {
  const auto h = ProjectionHead::identity(2);
  // Negative with both links at distance 2 >= m: zero loss.
  const auto neg = triple("n", vec({1, 0}), vec({-1, 0}), vec({1, 0}), 0);
  EXPECT_EQ(contrastive_loss(h, batch_of({neg}), 0.5), 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    std::vector<CotTriple> ts;
    for (int j = 0; j < 4; ++j) {
      ts.push_back(triple("t" + std::to_string(j), vec({g(rng), g(rng), g(rng)}), vec({g(rng), g(rng), g(rng)}),
                          vec({g(rng), g(rng), g(rng)}), j % 2));
    }
    Matrix w(3, 3);
    for (Eigen::Index r = 0; r < 3; ++r)
      for (Eigen::Index c = 0; c < 3; ++c) w(r, c) = g(rng);
    EXPECT_GE(contrastive_loss(ProjectionHead{w}, batch_of(ts), 0.7), 0.0);
  }
}

TEST(ContrastiveGradient, FiniteDifferenceRandomInstances) {
  std::mt19937_64 rng(2);
  int checked = 0;
  for (int attempt = 0; checked < 25 && attempt < 1000; ++attempt) {
    const Eigen::Index d_in = 2 + attempt % 5;  // <= 6
    const Eigen::Index d_out = 2 + (attempt / 5) % 5;
    const std::size_t batch = 1 + attempt % 4;  // <= 4
    const auto b = eccot::testing::random_batch(rng, batch, d_in, attempt);
    const Matrix w = eccot::testing::gaussian(rng, d_out, d_in, 1.0);
    const double margin = 1.2;
    const ProjectionHead head{w};
    if (!eccot::testing::away_from_kinks(head, b, margin, 1e-3)) continue;

    const auto lg = contrastive_loss_gradient(head, b, margin);
    EXPECT_NEAR(lg.loss, contrastive_loss(head, b, margin), 1e-14);
    const Matrix fd = eccot::oracle::central_difference(
        w, [&](const Matrix& x) { return contrastive_loss(ProjectionHead{x}, b, margin); });
    EXPECT_LT(eccot::oracle::max_relative_error(lg.grad, fd), 1e-4) << "attempt " << attempt;
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

// ---- negatives -------------------------------------------------------------

TEST(Negatives, TwoTriplesSwapRationales) {
  const std::vector<CotTriple> ts{triple("a", vec({1, 0}), vec({0, 1}), vec({1, 1})),
                                  triple("b", vec({2, 0}), vec({0, 2}), vec({2, 2}))};
  const auto neg = make_negatives(ts, NegativeStrategy::kShuffleRationale, 7);
  ASSERT_EQ(neg.size(), 2u);
  EXPECT_EQ(neg[0].id, "a.neg");
  EXPECT_EQ(neg[0].label, 0);
  EXPECT_EQ(neg[0].embeddings->q, ts[0].embeddings->q);
  EXPECT_EQ(neg[0].embeddings->a, ts[0].embeddings->a);
  EXPECT_EQ(neg[0].embeddings->r, ts[1].embeddings->r);
  EXPECT_EQ(neg[0].rationale, ts[1].rationale);
  EXPECT_EQ(neg[1].embeddings->r, ts[0].embeddings->r);
}

TEST(Negatives, ShuffleIsDerangementWithOnePerPositive) {
  eccot::synthetic::CausalTripleSpec spec;
  spec.num_positives = 37;
  const auto ts = eccot::synthetic::make_causal_triples(spec);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto neg = make_negatives(ts, NegativeStrategy::kShuffleRationale, seed);
    ASSERT_EQ(neg.size(), ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_NE(neg[i].embeddings->r, ts[i].embeddings->r);
  }
  EXPECT_EQ(make_negatives(ts, NegativeStrategy::kShuffleRationale, 3)[5].embeddings->r,
            make_negatives(ts, NegativeStrategy::kShuffleRationale, 3)[5].embeddings->r);
}

TEST(Negatives, LabeledPassesThroughZeros) {
  const std::vector<CotTriple> ts{triple("a", vec({1}), vec({1}), vec({1}), 1),
                                  triple("b", vec({1}), vec({1}), vec({1}), 0),
                                  triple("c", vec({1}), vec({1}), vec({1})),
                                  triple("d", vec({1}), vec({1}), vec({1}), 0)};
  const auto neg = make_negatives(ts, NegativeStrategy::kLabeled, 0);
  ASSERT_EQ(neg.size(), 2u);
  EXPECT_EQ(neg[0].id, "b");
  EXPECT_EQ(neg[1].id, "d");
}

TEST(Negatives, TooFewPositives) {
  const std::vector<CotTriple> ts{triple("a", vec({1}), vec({1}), vec({1}))};
  EXPECT_THROW(make_negatives(ts, NegativeStrategy::kShuffleRationale, 0), eccot::DataError);
}

// ---- training --------------------------------------------------------------

TEST(Train, SeparatedDataIsNoOp) {
  std::vector<CotTriple> pos;
  std::vector<CotTriple> neg;
  for (int i = 0; i < 6; ++i) {
    Vector v = Vector::Zero(4);
    v(i % 4) = 1.0 + i;
    pos.push_back(triple("p" + std::to_string(i), v, 2.0 * v, 0.5 * v, 1));
    neg.push_back(triple("n" + std::to_string(i), v, -v, v, 0));
  }
  ContrastiveConfig cfg;
  cfg.margin = 0.5;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  const auto result = train_projection(cfg, pos, neg);
  EXPECT_LT(result.curve.front().mean_loss, 1e-6);
  EXPECT_LT((result.head.weight - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Train, DeterministicAndImproves) {
  eccot::synthetic::CausalTripleSpec spec;
  spec.num_positives = 40;
  spec.seed = 5;
  const auto pos = eccot::synthetic::make_causal_triples(spec);
  const auto neg = make_negatives(pos, NegativeStrategy::kShuffleRationale, 6);
  ContrastiveConfig cfg;
  cfg.epochs = 20;
  cfg.lr = 0.05;
  cfg.seed = 9;
  const auto a = train_projection(cfg, pos, neg);
  const auto b = train_projection(cfg, pos, neg);
  EXPECT_EQ(a.head.weight, b.head.weight);
  ASSERT_EQ(a.curve.size(), cfg.epochs + 1);
  for (const auto& e : a.curve) EXPECT_TRUE(std::isfinite(e.mean_loss));
  EXPECT_LE(a.curve.back().mean_loss, a.curve.front().mean_loss);
}

TEST(Train, ReducedOutputDimension) {
  eccot::synthetic::CausalTripleSpec spec;
  spec.num_positives = 10;
  const auto pos = eccot::synthetic::make_causal_triples(spec);
  const auto neg = make_negatives(pos, NegativeStrategy::kShuffleRationale, 1);
  ContrastiveConfig cfg;
  cfg.epochs = 2;
  cfg.d_out = 5;
  const auto r = train_projection(cfg, pos, neg);
  EXPECT_EQ(r.head.d_out(), 5u);
  EXPECT_EQ(r.head.d_in(), 32u);
}

TEST(Train, InvalidConfig) {
  ContrastiveConfig cfg;
  cfg.margin = 0.0;
  EXPECT_THROW(cfg.validate(), eccot::ConfigError);
  cfg = {};
  cfg.margin = 2.5;
  EXPECT_THROW(cfg.validate(), eccot::ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), eccot::ConfigError);
}

// ---- embedding ---------------------------------------------------------------

TEST(EmbedTriple, IdentityOnUnitInput) {
  const Vector u = vec({0.6, 0.8, 0.0});
  const auto p = embed_triple(ProjectionHead::identity(3), triple("t", u, u, u));
  EXPECT_NEAR((p.q - u).norm(), 0.0, 1e-15);
}

TEST(EmbedTriple, UnitNormAndScaleInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix w(3, 4);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) w(r, c) = g(rng);
  const ProjectionHead h{w};
  const Vector q = vec({g(rng), g(rng), g(rng), g(rng)});
  const Vector r = vec({g(rng), g(rng), g(rng), g(rng)});
  const Vector a = vec({g(rng), g(rng), g(rng), g(rng)});
  const auto p = embed_triple(h, triple("t", q, r, a));
  const auto s = embed_triple(h, triple("t", 3.0 * q, r, a));
  EXPECT_NEAR(p.q.norm(), 1.0, 1e-9);
  EXPECT_NEAR(p.r.norm(), 1.0, 1e-9);
  EXPECT_NEAR(p.a.norm(), 1.0, 1e-9);
  EXPECT_NEAR((p.q - s.q).norm(), 0.0, 1e-12);
}

TEST(EmbedTriple, MissingEmbeddingsIsContractViolation) {
  CotTriple t;
  t.id = "x";
  EXPECT_THROW(embed_triple(ProjectionHead::identity(2), t), eccot::ContractViolation);
}

// ---- persistence -------------------------------------------------------------

TEST(HeadIo, RoundTripIsBitIdentical) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Matrix w(2, 3);
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) w(r, c) = g(rng) / 3.0;
  const ProjectionHead h{w};
  const auto text = head_to_string(h);
  const auto back = head_from_string(text);
  EXPECT_EQ(back.weight, h.weight);
  const Vector v = vec({0.1, 0.7, -0.3});
  EXPECT_EQ(project(back, v), project(h, v));
  EXPECT_NE(text.find("\"format\":\"causal-head/1\""), std::string::npos);
  EXPECT_THROW(head_from_string("{\"format\":\"causal-head/1\",\"d_in\":2,\"d_out\":1,\"weight\":[[1]]}"),
               eccot::DataError);
}

TEST(CurveCsv, Header) {
  const std::vector<EpochStats> c{{0, 0.5, 0.1, 0.2, 0.3, 0.4, 0.0, 0.0}};
  EXPECT_EQ(curve_csv(c),
            "epoch,mean_loss,pos_mean_cos_qr,pos_mean_cos_ra,neg_mean_cos_qr,neg_mean_cos_ra\n0,0.5,0.1,0.2,0.3,0.4\n");
}

}  // namespace
