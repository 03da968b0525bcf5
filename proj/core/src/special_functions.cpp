#include "eccot/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eccot::math {

double digamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) throw std::domain_error("digamma: argument must be finite and > 0");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number series: 1/12, 1/120, 1/252, 1/240, 1/132, 691/32760.
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))));
  return shift + std::log(x) - 0.5 * inv - series;
}

Vector expected_log_theta(const Vector& eta) {
  if (eta.size() == 0) throw std::domain_error("expected_log_theta: empty parameter vector");
  double total = 0.0;
  for (const double e : eta) {
    if (!(e > 0.0) || !std::isfinite(e)) throw std::domain_error("expected_log_theta: entries must be > 0");
    total += e;
  }
  const double psi_total = digamma(total);
  Vector out(eta.size());
  for (Eigen::Index k = 0; k < eta.size(); ++k) out[k] = digamma(eta[k]) - psi_total;
  return out;
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (const double v : x) s += std::exp(v - hi);
  return hi + std::log(s);
}

}  // namespace eccot::math
