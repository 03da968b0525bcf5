#include <sstream>

#include "eccot/mrf_etm.hpp"
#include "jsonl.hpp"

namespace eccot::etm {
namespace {

constexpr const char* kFormat = "mrf-etm/1";

io::Json matrix_to_json(const Matrix& m) {
  io::Json rows = io::Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    io::Json row = io::Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const io::Json& rows, std::size_t expect_rows, std::size_t expect_cols, const char* name) {
  if (!rows.is_array() || rows.size() != expect_rows) {
    throw DataError(std::string("checkpoint: \"") + name + "\" must have " + std::to_string(expect_rows) + " rows");
  }
  Matrix m(static_cast<Eigen::Index>(expect_rows), static_cast<Eigen::Index>(expect_cols));
  for (std::size_t r = 0; r < expect_rows; ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || row.size() != expect_cols) {
      throw DataError(std::string("checkpoint: \"") + name + "\" row " + std::to_string(r) + " must have " +
                      std::to_string(expect_cols) + " entries");
    }
    for (std::size_t c = 0; c < expect_cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  if (!m.allFinite()) throw DataError(std::string("checkpoint: non-finite entries in \"") + name + "\"");
  return m;
}

io::Json config_to_json(const MrfEtmConfig& c) {
  return io::Json{{"num_topics", c.num_topics},     {"embed_dim", c.embed_dim},
                  {"dirichlet_alpha", c.alpha()},   {"lambda", c.lambda},
                  {"e_step_tol", c.e_step_tol},     {"max_e_sweeps", c.max_e_sweeps},
                  {"m_step_lr", c.m_step_lr},       {"m_steps_per_epoch", c.m_steps_per_epoch},
                  {"grad_clip_norm", c.grad_clip_norm}, {"epochs", c.epochs},
                  {"seed", c.seed}};
}

MrfEtmConfig config_from_json(const io::Json& j) {
  MrfEtmConfig c;
  c.num_topics = j.at("num_topics").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.dirichlet_alpha = j.at("dirichlet_alpha").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.e_step_tol = j.at("e_step_tol").get<double>();
  c.max_e_sweeps = j.at("max_e_sweeps").get<std::size_t>();
  c.m_step_lr = j.at("m_step_lr").get<double>();
  c.m_steps_per_epoch = j.at("m_steps_per_epoch").get<std::size_t>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string checkpoint_to_string(const TopicModel& model) {
  io::Json j;
  j["format"] = kFormat;
  j["config"] = config_to_json(model.config);
  j["vocabulary"] = model.vocabulary.terms();
  j["rho"] = matrix_to_json(model.rho);
  j["topic_emb"] = matrix_to_json(model.topic_emb);
  return j.dump() + "\n";
}

TopicModel checkpoint_from_string(const std::string& text) {
  io::Json j;
  try {
    j = io::Json::parse(text);
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != kFormat) throw DataError(std::string("checkpoint: expected format ") + kFormat);
    TopicModel model;
    model.config = config_from_json(j.at("config"));
    model.config.validate();
    model.vocabulary = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>());
    model.rho = matrix_from_json(j.at("rho"), model.vocabulary.size(), model.config.embed_dim, "rho");
    model.topic_emb = matrix_from_json(j.at("topic_emb"), model.config.num_topics, model.config.embed_dim, "topic_emb");
    return model;
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TopicModel& model, const std::filesystem::path& path) {
  io::write_file(path, checkpoint_to_string(model));
}

TopicModel load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(io::read_file(path));
}

std::string loss_reports_csv(std::span<const EtmLossReport> reports) {
  std::ostringstream out;
  out << "epoch,elbo,nll,kl,sim_loss,total\n";
  for (const auto& r : reports) {
    out << r.epoch << ',' << io::format_double(r.elbo) << ',' << io::format_double(r.nll) << ','
        << io::format_double(r.kl) << ',' << io::format_double(r.sim_loss) << ',' << io::format_double(r.total)
        << '\n';
  }
  return out.str();
}

}  // namespace eccot::etm
