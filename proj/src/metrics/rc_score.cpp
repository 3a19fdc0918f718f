#include "rpeval/metrics/rc_score.hpp"

namespace rpeval::metrics {

RcVerdict RcVerdict::from_evidence(std::vector<std::string> agree_evidence,
                                   std::vector<std::string> disagree_evidence) {
  RcVerdict v;
  v.agree = !agree_evidence.empty();
  v.disagree = !disagree_evidence.empty();
  v.agree_evidence = std::move(agree_evidence);
  v.disagree_evidence = std::move(disagree_evidence);
  return v;
}

std::optional<int> rc_map_score(const RcVerdict& v) {
  if (!v.agree && !v.disagree) return std::nullopt;
  if (v.agree && !v.disagree) return 5;
  if (!v.agree) return 1;
  const auto a = v.agree_evidence.size();
  const auto d = v.disagree_evidence.size();
  if (a > d) return 4;
  if (a == d) return 3;
  return 2;
}

RcSampleScore rc_score(std::span<const std::optional<RcVerdict>> verdicts) {
  RcSampleScore s;
  int sum = 0;
  int n = 0;
  for (const auto& v : verdicts) {
    std::optional<int> mapped;
    if (v) mapped = rc_map_score(*v);
    s.per_evaluator.push_back(mapped);
    if (mapped) {
      sum += *mapped;
      ++n;
    }
  }
  if (n > 0) s.score = static_cast<double>(sum) / static_cast<double>(n);
  return s;
}

}  // namespace rpeval::metrics
