#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rpeval/taxonomy.hpp"

namespace rpeval::metrics {

/// One evaluated response: ground-truth labels and recognized fusion labels
/// (which may contain kAmbiguous).
struct MecSample {
  std::vector<EmotionId> gt;
  std::vector<EmotionId> predicted;
};

enum class MecLevel { kLower, kUpper };

/// What n_x counts in the support-weighted mean.
enum class SupportMode { kSamples, kUtterances };

struct ClassScore {
  std::string name;
  long support = 0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MecReport {
  MecLevel level = MecLevel::kLower;
  std::vector<ClassScore> classes;
  double mec = 0.0;
  std::size_t samples = 0;
};

/// Set-membership confusion per class and sample: TP when the class is in
/// both set(GT) and set(PD), FN when only in set(GT), FP when only in
/// set(PD), TN otherwise. Ambiguous predictions are removed before set().
/// F1 uses corpus-summed counts with 0/0 = 0; the result is
/// sum(n_x * F1_x) / sum(n_x).
///
/// `to_class` maps a taxonomy id to [0, class_names.size()).
MecReport mec_kernel(const std::vector<MecSample>& samples, const std::vector<std::string>& class_names,
                     const std::function<int(EmotionId)>& to_class, SupportMode support = SupportMode::kSamples);

/// Lower level scores exact labels; upper level scores tendencies
/// (positive, neutral, negative). Throws DataError on an empty sample list.
MecReport mec(const std::vector<MecSample>& samples, const EmotionTaxonomy& taxonomy, MecLevel level,
              SupportMode support = SupportMode::kSamples);

}  // namespace rpeval::metrics
