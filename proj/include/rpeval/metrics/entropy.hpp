#pragma once

#include <cstddef>
#include <vector>

#include "rpeval/taxonomy.hpp"

namespace rpeval::metrics {

/// Vote histogram for one (utterance, modality) cell of the expert panel.
struct EmotionDistribution {
  std::vector<int> counts;  ///< indexed by EmotionId, taxonomy-sized
  int total_votes = 0;

  explicit EmotionDistribution(std::size_t n_labels = EmotionTaxonomy::kSize) : counts(n_labels, 0) {}

  void add(EmotionId id);
  double probability(EmotionId id) const;

  bool operator==(const EmotionDistribution&) const = default;
};

/// Shannon entropy (natural log) of the vote shares divided by ln(counts.size()).
/// Zero-vote cells have entropy 0.
double normalized_entropy(const EmotionDistribution& d);

/// Mean normalized entropy over all cells (utterances) of one modality.
/// Throws DataError on empty input.
double emotional_discrepancy(const std::vector<EmotionDistribution>& cells);

}  // namespace rpeval::metrics
