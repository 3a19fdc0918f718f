#include "rpeval/metrics/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "rpeval/errors.hpp"

namespace rpeval::metrics {

void EmotionDistribution::add(EmotionId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= counts.size()) {
    throw ContractError("EmotionDistribution::add: label out of range");
  }
  ++counts[static_cast<std::size_t>(id)];
  ++total_votes;
}

double EmotionDistribution::probability(EmotionId id) const {
  if (total_votes == 0 || id < 0 || static_cast<std::size_t>(id) >= counts.size()) return 0.0;
  return static_cast<double>(counts[static_cast<std::size_t>(id)]) / static_cast<double>(total_votes);
}

double normalized_entropy(const EmotionDistribution& d) {
  if (d.total_votes == 0 || d.counts.size() < 2) return 0.0;
  double h = 0.0;
  for (int c : d.counts) {
    if (c == 0 || c == d.total_votes) continue;
    const double p = static_cast<double>(c) / static_cast<double>(d.total_votes);
    h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(d.counts.size())), 0.0, 1.0);
}

double emotional_discrepancy(const std::vector<EmotionDistribution>& cells) {
  if (cells.empty()) throw DataError("emotional_discrepancy: no cells");
  double sum = 0.0;
  for (const auto& c : cells) sum += normalized_entropy(c);
  return sum / static_cast<double>(cells.size());
}

}  // namespace rpeval::metrics
