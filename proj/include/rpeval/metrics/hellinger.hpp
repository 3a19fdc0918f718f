#pragma once

#include <span>

namespace rpeval::metrics {

/// Tolerance on |sum(p) - 1| accepted by hellinger().
inline constexpr double kNormalizationTolerance = 1e-9;

/// Hellinger distance between two discrete distributions of equal length:
///   (1/sqrt 2) * sqrt( sum_i (sqrt p_i - sqrt q_i)^2 )
/// Result is clamped to [0, 1]. Throws ContractError on length mismatch,
/// negative entries, or inputs not normalized within kNormalizationTolerance.
double hellinger(std::span<const double> p, std::span<const double> q);

}  // namespace rpeval::metrics
