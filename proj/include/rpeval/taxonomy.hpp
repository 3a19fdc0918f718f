#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rpeval {

/// Index of an emotion label inside an EmotionTaxonomy.
using EmotionId = int;

/// Recognized label that failed the vote threshold. Never a taxonomy member.
inline constexpr EmotionId kAmbiguous = -1;
inline constexpr std::string_view kAmbiguousLabel = "ambiguous";

enum class Tendency { kPositive = 0, kNeutral = 1, kNegative = 2, kAmbiguous = 3 };

inline constexpr int kTendencyCount = 3;  // excluding kAmbiguous

std::string_view to_string(Tendency t);
Tendency parse_tendency(std::string_view s);

/// The closed emotion label set used for recognition and scoring.
///
/// Exactly 13 distinct labels, each mapped to one tendency. Immutable after
/// construction; `fingerprint()` identifies the label list in every report.
class EmotionTaxonomy {
 public:
  static constexpr std::size_t kSize = 13;

  EmotionTaxonomy(std::vector<std::string> labels, const std::map<std::string, Tendency>& tendencies);

  /// happy, grateful, relaxed, positive-other, neutral, anger, sadness, fear,
  /// depress, disgust, astonished, worried, negative-other.
  static EmotionTaxonomy standard();

  /// Reads {"labels": [...], "tendencies": {label: "positive"|...}}. Missing
  /// keys fall back to the standard taxonomy; a partial tendency map overrides
  /// only the labels it names.
  static EmotionTaxonomy from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(EmotionId id) const;

  /// Label text for an id, including the ambiguous sentinel.
  std::string_view name(EmotionId id) const;

  std::optional<EmotionId> find(std::string_view label) const;
  /// Throws DataError for labels outside the taxonomy. Accepts "ambiguous".
  EmotionId id_of(std::string_view label) const;

  Tendency tendency(EmotionId id) const;
  /// Throws DataError for unknown labels.
  Tendency tendency_of(std::string_view label) const;

  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::vector<std::string> labels_;
  std::vector<Tendency> tendencies_;
  std::string fingerprint_;
};

}  // namespace rpeval
