#pragma once

// Brute-force related-pair oracle: enumerate every ordered position pair in
// every document and recompute counts and PMI from scratch.

#include <cmath>
#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "eccot/corpus.hpp"

namespace eccot::oracle {

inline std::set<std::pair<corpus::TermId, corpus::TermId>> brute_force_pairs(
    const std::vector<corpus::Document>& docs, std::size_t vocab_size, std::size_t window, std::size_t min_cooc) {
  std::vector<std::vector<double>> joint(vocab_size, std::vector<double>(vocab_size, 0.0));
  std::vector<double> unigram(vocab_size, 0.0);
  double tokens = 0.0;
  double windows = 0.0;
  for (const auto& d : docs) {
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      unigram[d.tokens[i]] += 1.0;
      tokens += 1.0;
      for (std::size_t j = 0; j < d.tokens.size(); ++j) {
        if (j <= i || j - i >= window) continue;
        windows += 1.0;
        const auto a = d.tokens[i];
        const auto b = d.tokens[j];
        if (a != b) {
          joint[a][b] += 1.0;
          joint[b][a] += 1.0;
        }
      }
    }
  }
  std::set<std::pair<corpus::TermId, corpus::TermId>> out;
  for (std::size_t m = 0; m < vocab_size; ++m) {
    for (std::size_t n = m + 1; n < vocab_size; ++n) {
      if (joint[m][n] < static_cast<double>(min_cooc) || joint[m][n] == 0.0) continue;
      const double pmi = std::log((joint[m][n] / windows) / ((unigram[m] / tokens) * (unigram[n] / tokens)));
      if (pmi > 0.0) out.emplace(static_cast<corpus::TermId>(m), static_cast<corpus::TermId>(n));
    }
  }
  return out;
}

}  // namespace eccot::oracle
