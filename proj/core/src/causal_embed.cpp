#include "eccot/causal_embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "eccot/errors.hpp"
#include "jsonl.hpp"

namespace eccot::causal {
namespace {

constexpr const char* kFormat = "causal-head/1";

struct Projection {
  Vector unit;
  double norm;
};

Projection project_raw(const Matrix& weight, const Eigen::Ref<const Vector>& v) {
  if (v.size() != weight.cols()) throw std::domain_error("project: input dimension does not match the head");
  if (v.norm() == 0.0) throw std::domain_error("project: zero input vector");
  Vector p = weight * v;
  const double n = p.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("project: projection has zero or non-finite norm");
  return {p / n, n};
}

struct RowProjections {
  Matrix unit;  // B x d_out
  Vector norm;  // B
};

// Projects every row of `x` at once: one GEMM instead of B matrix-vector products.
RowProjections project_rows(const Matrix& weight, const Matrix& x) {
  if (x.cols() != weight.cols()) throw std::domain_error("project: input dimension does not match the head");
  RowProjections out{x * weight.transpose(), Vector(x.rows())};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (x.row(i).squaredNorm() == 0.0) throw std::domain_error("project: zero input vector");
    const double n = out.unit.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("project: projection has zero or non-finite norm");
    out.unit.row(i) /= n;
    out.norm(i) = n;
  }
  return out;
}

struct SampleGrad {
  double loss = 0.0;
  double dq_r = 0.0;  // dL / d cos(q, r)
  double dr_a = 0.0;  // dL / d cos(r, a)
};

SampleGrad sample_loss(double cos_qr, double cos_ra, int y, double margin) {
  SampleGrad s;
  if (y == 1) {
    s.loss = (1.0 - cos_qr) + (1.0 - cos_ra);
    s.dq_r = -1.0;
    s.dr_a = -1.0;
    return s;
  }
  const double h_qr = std::max(0.0, margin - (1.0 - cos_qr));
  const double h_ra = std::max(0.0, margin - (1.0 - cos_ra));
  if (h_qr >= h_ra) {
    s.loss = h_qr;
    if (h_qr > 0.0) s.dq_r = 1.0;
  } else {
    s.loss = h_ra;
    s.dr_a = 1.0;
  }
  return s;
}

void check_batch(const TripleBatch& batch) {
  require(batch.size() > 0, "contrastive_loss: batch must not be empty");
  const auto B = static_cast<Eigen::Index>(batch.size());
  require(batch.q.rows() == B && batch.r.rows() == B && batch.a.rows() == B,
          "contrastive_loss: q, r, a and y must have equal row counts");
  for (const int y : batch.y) require(y == 0 || y == 1, "contrastive_loss: labels must be 0 or 1");
}

const corpus::TripleEmbeddings& embeddings_of(const CotTriple& t) {
  if (!t.embeddings) throw ContractViolation("triple \"" + t.id + "\" has no embeddings");
  return *t.embeddings;
}

int label_of(const CotTriple& t) { return t.label.value_or(1); }

}  // namespace

ProjectionHead ProjectionHead::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return ProjectionHead{Matrix::Identity(d, d)};
}

void ContrastiveConfig::validate() const {
  if (!(margin > 0.0 && margin <= 2.0)) throw ConfigError("margin must be in (0, 2]");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

Vector project(const ProjectionHead& head, const Vector& v) { return project_raw(head.weight, v).unit; }

LinkLosses link_losses(const ProjectionHead& head, const Vector& q, const Vector& r, const Vector& a, int y,
                       double margin) {
  const Vector fq = project(head, q);
  const Vector fr = project(head, r);
  const Vector fa = project(head, a);
  const double d_qr = 1.0 - fq.dot(fr);
  const double d_ra = 1.0 - fr.dot(fa);
  if (y == 1) return {d_qr, d_ra};
  return {std::max(0.0, margin - d_qr), std::max(0.0, margin - d_ra)};
}

LossAndGradient contrastive_loss_gradient(const ProjectionHead& head, const TripleBatch& batch, double margin) {
  check_batch(batch);
  const auto pq = project_rows(head.weight, batch.q);
  const auto pr = project_rows(head.weight, batch.r);
  const auto pa = project_rows(head.weight, batch.a);
  const auto B = pq.unit.rows();

  // Row i of gq/gr/ga is dL_i / d(W x_i) for x = q, r, a.
  Matrix gq = Matrix::Zero(B, pq.unit.cols());
  Matrix gr = Matrix::Zero(B, pq.unit.cols());
  Matrix ga = Matrix::Zero(B, pq.unit.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const double c_qr = pq.unit.row(i).dot(pr.unit.row(i));
    const double c_ra = pr.unit.row(i).dot(pa.unit.row(i));
    const auto s = sample_loss(c_qr, c_ra, batch.y[static_cast<std::size_t>(i)], margin);
    loss += s.loss;
    if (s.dq_r == 0.0 && s.dr_a == 0.0) continue;
    // d cos(f(x), f(z)) / d (Wx) = (f(z) - cos * f(x)) / |Wx|
    gq.row(i) = s.dq_r * (pr.unit.row(i) - c_qr * pq.unit.row(i)) / pq.norm(i);
    gr.row(i) = (s.dq_r * (pq.unit.row(i) - c_qr * pr.unit.row(i)) + s.dr_a * (pa.unit.row(i) - c_ra * pr.unit.row(i))) /
                pr.norm(i);
    ga.row(i) = s.dr_a * (pr.unit.row(i) - c_ra * pa.unit.row(i)) / pa.norm(i);
  }
  const double inv = 1.0 / static_cast<double>(B);
  LossAndGradient out{loss * inv, Matrix(head.weight.rows(), head.weight.cols())};
  out.grad.noalias() = gq.transpose() * batch.q;
  out.grad.noalias() += gr.transpose() * batch.r;
  out.grad.noalias() += ga.transpose() * batch.a;
  out.grad *= inv;
  return out;
}

double contrastive_loss(const ProjectionHead& head, const TripleBatch& batch, double margin) {
  check_batch(batch);
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Vector fq = project(head, batch.q.row(row).transpose());
    const Vector fr = project(head, batch.r.row(row).transpose());
    const Vector fa = project(head, batch.a.row(row).transpose());
    sum += sample_loss(fq.dot(fr), fr.dot(fa), batch.y[i], margin).loss;
  }
  return sum / static_cast<double>(batch.size());
}

TripleBatch make_batch(std::span<const CotTriple> triples) {
  require(!triples.empty(), "make_batch: no triples");
  const auto dim = embeddings_of(triples.front()).q.size();
  const auto B = static_cast<Eigen::Index>(triples.size());
  TripleBatch batch{Matrix(B, dim), Matrix(B, dim), Matrix(B, dim), {}};
  batch.y.reserve(triples.size());
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto& t = triples[static_cast<std::size_t>(i)];
    const auto& e = embeddings_of(t);
    require(e.q.size() == dim && e.r.size() == dim && e.a.size() == dim, "make_batch: inconsistent dimensions");
    batch.q.row(i) = e.q.transpose();
    batch.r.row(i) = e.r.transpose();
    batch.a.row(i) = e.a.transpose();
    batch.y.push_back(label_of(t));
  }
  return batch;
}

std::vector<CotTriple> make_negatives(std::span<const CotTriple> triples, NegativeStrategy strategy,
                                      std::uint64_t seed) {
  std::vector<CotTriple> out;
  if (strategy == NegativeStrategy::kLabeled) {
    for (const auto& t : triples) {
      if (t.label && *t.label == 0) out.push_back(t);
    }
    return out;
  }

  std::vector<const CotTriple*> positives;
  for (const auto& t : triples) {
    if (label_of(t) == 1) positives.push_back(&t);
  }
  if (positives.size() < 2) throw DataError("shuffle_rationale needs at least 2 positive triples");

  // Sattolo's algorithm yields a uniformly random cyclic permutation, which is
  // always a derangement.
  std::vector<std::size_t> perm(positives.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }

  out.reserve(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& src = *positives[i];
    const auto& donor = *positives[perm[i]];
    CotTriple neg = src;
    neg.id = src.id + ".neg";
    neg.rationale = donor.rationale;
    neg.label = 0;
    if (src.embeddings && donor.embeddings) {
      neg.embeddings->r = donor.embeddings->r;
    } else {
      neg.embeddings.reset();
    }
    out.push_back(std::move(neg));
  }
  return out;
}

EpochStats evaluate(const ProjectionHead& head, std::span<const CotTriple> positives,
                    std::span<const CotTriple> negatives, double margin) {
  EpochStats s;
  double loss = 0.0;
  auto accumulate = [&](std::span<const CotTriple> set, int y, double& cqr, double& cra, double& cmin) {
    for (const auto& t : set) {
      const auto p = embed_triple(head, t);
      const double c_qr = p.q.dot(p.r);
      const double c_ra = p.r.dot(p.a);
      cqr += c_qr;
      cra += c_ra;
      cmin += std::min(c_qr, c_ra);
      loss += sample_loss(c_qr, c_ra, y, margin).loss;
    }
    if (!set.empty()) {
      const auto n = static_cast<double>(set.size());
      cqr /= n;
      cra /= n;
      cmin /= n;
    }
  };
  accumulate(positives, 1, s.pos_mean_cos_qr, s.pos_mean_cos_ra, s.pos_mean_min_cos);
  accumulate(negatives, 0, s.neg_mean_cos_qr, s.neg_mean_cos_ra, s.neg_mean_min_cos);
  const auto total = positives.size() + negatives.size();
  s.mean_loss = total == 0 ? 0.0 : loss / static_cast<double>(total);
  return s;
}

TrainResult train_projection(const ContrastiveConfig& config, std::span<const CotTriple> positives,
                             std::span<const CotTriple> negatives) {
  config.validate();
  std::vector<CotTriple> data;
  data.reserve(positives.size() + negatives.size());
  for (const auto& t : positives) {
    data.push_back(t);
    data.back().label = 1;
  }
  for (const auto& t : negatives) {
    data.push_back(t);
    data.back().label = 0;
  }
  if (data.empty()) throw DataError("no training triples");
  const auto d_in = static_cast<std::size_t>(embeddings_of(data.front()).q.size());
  for (const auto& t : data) {
    const auto& e = embeddings_of(t);
    if (static_cast<std::size_t>(e.q.size()) != d_in || static_cast<std::size_t>(e.r.size()) != d_in ||
        static_cast<std::size_t>(e.a.size()) != d_in) {
      throw DataError("triple \"" + t.id + "\" has inconsistent embedding dimensions");
    }
  }
  const std::size_t d_out = config.d_out == 0 ? d_in : config.d_out;

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  if (d_out == d_in) {
    result.head = ProjectionHead::identity(d_in);
  } else {
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
    result.head.weight.resize(static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in));
    for (Eigen::Index i = 0; i < result.head.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < result.head.weight.cols(); ++j) result.head.weight(i, j) = gauss(rng);
    }
  }

  result.curve.push_back(evaluate(result.head, positives, negatives, config.margin));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<CotTriple> chunk;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      chunk.clear();
      for (std::size_t i = start; i < end; ++i) chunk.push_back(data[order[i]]);
      const auto lg = contrastive_loss_gradient(result.head, make_batch(chunk), config.margin);
      if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
        throw NumericError("contrastive training diverged at epoch " + std::to_string(epoch));
      }
      result.head.weight -= config.lr * lg.grad;
    }
    auto stats = evaluate(result.head, positives, negatives, config.margin);
    if (!std::isfinite(stats.mean_loss)) {
      throw NumericError("contrastive training diverged at epoch " + std::to_string(epoch));
    }
    stats.epoch = epoch;
    result.curve.push_back(stats);
  }
  return result;
}

ProjectedTriple embed_triple(const ProjectionHead& head, const CotTriple& triple) {
  const auto& e = embeddings_of(triple);
  return {project(head, e.q), project(head, e.r), project(head, e.a)};
}

std::string head_to_string(const ProjectionHead& head) {
  io::Json weight = io::Json::array();
  for (Eigen::Index i = 0; i < head.weight.rows(); ++i) {
    io::Json row = io::Json::array();
    for (Eigen::Index j = 0; j < head.weight.cols(); ++j) row.push_back(head.weight(i, j));
    weight.push_back(std::move(row));
  }
  io::Json j{{"format", kFormat}, {"d_in", head.d_in()}, {"d_out", head.d_out()}, {"weight", std::move(weight)}};
  return j.dump() + "\n";
}

ProjectionHead head_from_string(const std::string& text) {
  try {
    const auto j = io::Json::parse(text);
    if (j.value("format", "") != kFormat) throw DataError(std::string("head checkpoint: expected format ") + kFormat);
    const auto d_in = j.at("d_in").get<std::size_t>();
    const auto d_out = j.at("d_out").get<std::size_t>();
    const auto& w = j.at("weight");
    if (d_in == 0 || d_out == 0 || !w.is_array() || w.size() != d_out) {
      throw DataError("head checkpoint: weight must be d_out x d_in");
    }
    ProjectionHead head{Matrix(static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in))};
    for (std::size_t i = 0; i < d_out; ++i) {
      if (!w[i].is_array() || w[i].size() != d_in) throw DataError("head checkpoint: weight must be d_out x d_in");
      for (std::size_t k = 0; k < d_in; ++k) {
        head.weight(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = w[i][k].get<double>();
      }
    }
    if (!head.weight.allFinite()) throw DataError("head checkpoint: non-finite weight");
    return head;
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("head checkpoint: ") + e.what());
  }
}

void save_head(const ProjectionHead& head, const std::filesystem::path& path) {
  io::write_file(path, head_to_string(head));
}

ProjectionHead load_head(const std::filesystem::path& path) { return head_from_string(io::read_file(path)); }

std::string curve_csv(std::span<const EpochStats> curve) {
  std::ostringstream out;
  out << "epoch,mean_loss,pos_mean_cos_qr,pos_mean_cos_ra,neg_mean_cos_qr,neg_mean_cos_ra\n";
  for (const auto& s : curve) {
    out << s.epoch << ',' << io::format_double(s.mean_loss) << ',' << io::format_double(s.pos_mean_cos_qr) << ','
        << io::format_double(s.pos_mean_cos_ra) << ',' << io::format_double(s.neg_mean_cos_qr) << ','
        << io::format_double(s.neg_mean_cos_ra) << '\n';
  }
  return out.str();
}

}  // namespace eccot::causal
