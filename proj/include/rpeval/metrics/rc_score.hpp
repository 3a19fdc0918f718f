#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rpeval::metrics {

/// One evaluator's bidirectional-evidence judgment. Flags are derived from
/// the evidence lists, so agree == !agree_evidence.empty() always holds for
/// values built through from_evidence().
struct RcVerdict {
  bool agree = false;
  bool disagree = false;
  std::vector<std::string> agree_evidence;
  std::vector<std::string> disagree_evidence;

  static RcVerdict from_evidence(std::vector<std::string> agree_evidence, std::vector<std::string> disagree_evidence);

  bool operator==(const RcVerdict&) const = default;
};

/// Maps a verdict to a 1..5 score, or std::nullopt when the verdict is
/// dropped (no evidence either way):
///   (1,0) -> 5; (1,1) with more/equal/fewer agree spans -> 4/3/2; (0,1) -> 1.
std::optional<int> rc_map_score(const RcVerdict& v);

struct RcSampleScore {
  /// Per evaluator: mapped score, or nullopt when dropped or unavailable.
  std::vector<std::optional<int>> per_evaluator;
  /// Mean of the available per-evaluator scores; nullopt drops the sample.
  std::optional<double> score;
};

/// `verdicts[i]` is std::nullopt when evaluator i produced no usable verdict.
RcSampleScore rc_score(std::span<const std::optional<RcVerdict>> verdicts);

}  // namespace rpeval::metrics
