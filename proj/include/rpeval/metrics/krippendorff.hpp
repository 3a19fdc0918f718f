#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace rpeval::metrics {

enum class AlphaMetric { kNominal, kOrdinal, kInterval };

/// raters x units; std::nullopt marks a missing rating. Nominal codes are
/// compared for equality only; ordinal values are ranked by numeric order.
using RatingTable = std::vector<std::vector<std::optional<double>>>;

struct AlphaResult {
  double alpha = 1.0;
  /// True when the pooled pairable values contain a single category, so
  /// expected disagreement is zero and alpha is 1 by convention.
  bool degenerate = false;
  std::size_t pairable_units = 0;
  std::size_t pairable_values = 0;
};

/// Krippendorff's alpha via the coincidence matrix. Units with fewer than two
/// ratings carry no pairing information and are skipped.
///
/// Throws ContractError on ragged rows and DataError when no unit has two
/// ratings.
AlphaResult krippendorff_alpha(const RatingTable& table, AlphaMetric metric);

}  // namespace rpeval::metrics
