#pragma once

// Literal term-by-term evaluation of the mean-field objective, written
// independently of the library path: plain loops, no log-space tricks, and
// Boost.Math for digamma / lgamma.

#include <cmath>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "eccot/mrf_etm.hpp"

namespace eccot::oracle {

struct ElboOracle {
  double sum_likelihood = 0.0;
  double sum_prior = 0.0;
  double sum_q_theta = 0.0;
  double sum_phi_log_phi = 0.0;
  double sum_assignment = 0.0;
  double sum_normalizers = 0.0;

  double four_sum() const { return sum_likelihood + sum_prior - sum_q_theta - sum_phi_log_phi; }
  double elbo() const { return four_sum() + sum_assignment + sum_normalizers; }
};

inline std::vector<std::vector<double>> naive_beta(const Matrix& rho, const Matrix& topic_emb) {
  const auto K = topic_emb.rows();
  const auto V = rho.rows();
  std::vector<std::vector<double>> beta(K, std::vector<double>(V));
  for (Eigen::Index k = 0; k < K; ++k) {
    double z = 0.0;
    for (Eigen::Index v = 0; v < V; ++v) {
      double dot = 0.0;
      for (Eigen::Index d = 0; d < rho.cols(); ++d) dot += rho(v, d) * topic_emb(k, d);
      beta[k][v] = std::exp(dot);
      z += beta[k][v];
    }
    for (auto& b : beta[k]) b /= z;
  }
  return beta;
}

inline ElboOracle literal_elbo(const Matrix& rho, const Matrix& topic_emb, double alpha,
                               const std::vector<corpus::Document>& docs, const etm::VariationalState& state) {
  using boost::math::digamma;
  using boost::math::lgamma;
  const auto beta = naive_beta(rho, topic_emb);
  const auto K = topic_emb.rows();
  ElboOracle o;

  // sum_i sum_j sum_k phi_ijk log beta_{k, w_ij}
  for (std::size_t i = 0; i < docs.size(); ++i)
    for (std::size_t j = 0; j < docs[i].tokens.size(); ++j)
      for (Eigen::Index k = 0; k < K; ++k)
        o.sum_likelihood += state.phi[i](j, k) * std::log(beta[k][docs[i].tokens[j]]);

  // sum_i sum_k (alpha - 1)(psi(eta_ik) - psi(sum_k eta_ik))
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double eta_sum = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) eta_sum += state.eta(i, k);
    for (Eigen::Index k = 0; k < K; ++k)
      o.sum_prior += (alpha - 1.0) * (digamma(state.eta(i, k)) - digamma(eta_sum));
  }

  // sum_i sum_k (eta_ik - 1)(psi(eta_ik) - psi(sum_k eta_ik))
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double eta_sum = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) eta_sum += state.eta(i, k);
    for (Eigen::Index k = 0; k < K; ++k)
      o.sum_q_theta += (state.eta(i, k) - 1.0) * (digamma(state.eta(i, k)) - digamma(eta_sum));
  }

  // sum_i sum_j sum_k phi_ijk log phi_ijk
  for (std::size_t i = 0; i < docs.size(); ++i)
    for (std::size_t j = 0; j < docs[i].tokens.size(); ++j)
      for (Eigen::Index k = 0; k < K; ++k) {
        const double p = state.phi[i](j, k);
        if (p > 0.0) o.sum_phi_log_phi += p * std::log(p);
      }

  // Completion terms of E_q[log p(w, theta, z)] - E_q[log q(theta, z)]:
  // E[log p(z | theta)] and the Dirichlet log-normalizers.
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double eta_sum = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) eta_sum += state.eta(i, k);
    for (std::size_t j = 0; j < docs[i].tokens.size(); ++j)
      for (Eigen::Index k = 0; k < K; ++k)
        o.sum_assignment += state.phi[i](j, k) * (digamma(state.eta(i, k)) - digamma(eta_sum));
    o.sum_normalizers += lgamma(K * alpha) - K * lgamma(alpha) - lgamma(eta_sum);
    for (Eigen::Index k = 0; k < K; ++k) o.sum_normalizers += lgamma(state.eta(i, k));
  }
  return o;
}

}  // namespace eccot::oracle
