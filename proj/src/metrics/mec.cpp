#include "rpeval/metrics/mec.hpp"

#include "rpeval/errors.hpp"

namespace rpeval::metrics {
namespace {

double ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

MecReport mec_kernel(const std::vector<MecSample>& samples, const std::vector<std::string>& class_names,
                     const std::function<int(EmotionId)>& to_class, SupportMode support) {
  if (samples.empty()) throw DataError("mec: no samples");
  const std::size_t k = class_names.size();
  MecReport report;
  report.samples = samples.size();
  report.classes.resize(k);
  for (std::size_t c = 0; c < k; ++c) report.classes[c].name = class_names[c];

  std::vector<char> in_gt(k);
  std::vector<char> in_pd(k);
  auto cls = [&](EmotionId id) {
    const int c = to_class(id);
    if (c < 0 || static_cast<std::size_t>(c) >= k) throw ContractError("mec: class mapping out of range");
    return static_cast<std::size_t>(c);
  };
  for (const auto& s : samples) {
    std::fill(in_gt.begin(), in_gt.end(), 0);
    std::fill(in_pd.begin(), in_pd.end(), 0);
    for (EmotionId e : s.gt) {
      if (e == kAmbiguous) throw ContractError("mec: ground truth contains the ambiguous sentinel");
      const auto c = cls(e);
      in_gt[c] = 1;
      if (support == SupportMode::kUtterances) ++report.classes[c].support;
    }
    for (EmotionId e : s.predicted) {
      if (e != kAmbiguous) in_pd[cls(e)] = 1;
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto& x = report.classes[c];
      if (in_gt[c] && in_pd[c]) ++x.tp;
      else if (in_gt[c]) ++x.fn;
      else if (in_pd[c]) ++x.fp;
      else ++x.tn;
      if (support == SupportMode::kSamples && in_gt[c]) ++x.support;
    }
  }

  double weighted = 0.0;
  long total_support = 0;
  for (auto& x : report.classes) {
    x.precision = ratio(x.tp, x.tp + x.fp);
    x.recall = ratio(x.tp, x.tp + x.fn);
    x.f1 = ratio(2 * x.tp, 2 * x.tp + x.fp + x.fn);
    weighted += static_cast<double>(x.support) * x.f1;
    total_support += x.support;
  }
  report.mec = total_support == 0 ? 0.0 : weighted / static_cast<double>(total_support);
  return report;
}

MecReport mec(const std::vector<MecSample>& samples, const EmotionTaxonomy& taxonomy, MecLevel level,
              SupportMode support) {
  MecReport r;
  if (level == MecLevel::kLower) {
    r = mec_kernel(samples, taxonomy.labels(), [](EmotionId id) { return id; }, support);
  } else {
    std::vector<std::string> names;
    for (int t = 0; t < kTendencyCount; ++t) names.emplace_back(to_string(static_cast<Tendency>(t)));
    r = mec_kernel(samples, names, [&](EmotionId id) { return static_cast<int>(taxonomy.tendency(id)); }, support);
  }
  r.level = level;
  return r;
}

}  // namespace rpeval::metrics
