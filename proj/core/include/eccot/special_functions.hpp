#pragma once

#include <span>

#include "eccot/types.hpp"

namespace eccot::math {

/// Digamma function for x > 0: upward recurrence to x >= 10 followed by the
/// asymptotic series through x^-12 (truncation error below 1e-15 there).
/// Throws std::domain_error for x <= 0 or non-finite x.
double digamma(double x);

/// E_q[log theta_k] = digamma(eta_k) - digamma(sum eta) for theta ~ Dirichlet(eta).
/// Throws std::domain_error if any entry is not strictly positive.
Vector expected_log_theta(const Vector& eta);

/// Numerically stable log(sum(exp(x))).
double log_sum_exp(std::span<const double> x);

}  // namespace eccot::math
