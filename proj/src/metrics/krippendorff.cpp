#include "rpeval/metrics/krippendorff.hpp"

#include <algorithm>
#include <string>

#include "rpeval/errors.hpp"

namespace rpeval::metrics {

AlphaResult krippendorff_alpha(const RatingTable& table, AlphaMetric metric) {
  if (table.empty()) throw DataError("krippendorff_alpha: table has no raters");
  const std::size_t n_units = table.front().size();
  for (const auto& row : table) {
    if (row.size() != n_units) throw ContractError("krippendorff_alpha: rater rows differ in length");
  }

  std::vector<double> values;
  for (const auto& row : table) {
    for (const auto& v : row) {
      if (v) values.push_back(*v);
    }
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t k = values.size();
  auto index_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  // Coincidence matrix: o[c][d] = sum_u n_uc * (n_ud - [c == d]) / (m_u - 1).
  std::vector<double> o(k * k, 0.0);
  std::vector<double> unit_counts(k);
  AlphaResult result;
  for (std::size_t u = 0; u < n_units; ++u) {
    std::fill(unit_counts.begin(), unit_counts.end(), 0.0);
    std::size_t m = 0;
    for (const auto& row : table) {
      if (row[u]) {
        unit_counts[index_of(*row[u])] += 1.0;
        ++m;
      }
    }
    if (m < 2) continue;
    ++result.pairable_units;
    result.pairable_values += m;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t c = 0; c < k; ++c) {
      if (unit_counts[c] == 0.0) continue;
      for (std::size_t d = 0; d < k; ++d) {
        const double pairs = unit_counts[c] * (unit_counts[d] - (c == d ? 1.0 : 0.0));
        if (pairs != 0.0) o[c * k + d] += pairs * w;
      }
    }
  }
  if (result.pairable_units == 0) throw DataError("krippendorff_alpha: no unit has two or more ratings");

  std::vector<double> marginals(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) marginals[c] += o[c * k + d];
  }
  const double n = static_cast<double>(result.pairable_values);

  auto delta2 = [&](std::size_t c, std::size_t d) -> double {
    if (c == d) return 0.0;
    switch (metric) {
      case AlphaMetric::kNominal:
        return 1.0;
      case AlphaMetric::kOrdinal: {
        const auto [lo, hi] = std::minmax(c, d);
        double s = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) s += marginals[g];
        s -= (marginals[lo] + marginals[hi]) / 2.0;
        return s * s;
      }
      case AlphaMetric::kInterval: {
        const double diff = values[c] - values[d];
        return diff * diff;
      }
    }
    return 1.0;
  };

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      if (c == d) continue;
      const double dd = delta2(c, d);
      observed += o[c * k + d] * dd;
      expected += marginals[c] * marginals[d] * dd;
    }
  }
  if (expected == 0.0) {
    result.degenerate = true;
    result.alpha = 1.0;
    return result;
  }
  result.alpha = 1.0 - (n - 1.0) * observed / expected;
  return result;
}

}  // namespace rpeval::metrics
