#include "rpeval/metrics/hellinger.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rpeval/errors.hpp"

namespace rpeval::metrics {
namespace {

void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ContractError(std::string("hellinger: ") + name + " has a negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw ContractError(std::string("hellinger: ") + name + " sums to " + std::to_string(sum) + ", not 1");
  }
}

}  // namespace

double hellinger(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ContractError("hellinger: length mismatch (" + std::to_string(p.size()) + " vs " +
                        std::to_string(q.size()) + ")");
  }
  check_distribution(p, "p");
  check_distribution(q, "q");
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    sq += d * d;
  }
  // exact 1 for disjoint supports
  return std::clamp(std::sqrt(sq / 2.0), 0.0, 1.0);
}

}  // namespace rpeval::metrics
