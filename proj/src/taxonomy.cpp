#include "rpeval/taxonomy.hpp"

#include <algorithm>
#include <set>

#include "rpeval/digest.hpp"
#include "rpeval/errors.hpp"

namespace rpeval {

std::string_view to_string(Tendency t) {
  switch (t) {
    case Tendency::kPositive: return "positive";
    case Tendency::kNeutral: return "neutral";
    case Tendency::kNegative: return "negative";
    case Tendency::kAmbiguous: return "ambiguous";
  }
  return "ambiguous";
}

Tendency parse_tendency(std::string_view s) {
  if (s == "positive") return Tendency::kPositive;
  if (s == "neutral") return Tendency::kNeutral;
  if (s == "negative") return Tendency::kNegative;
  throw ConfigError("unknown tendency '" + std::string(s) + "'");
}

EmotionTaxonomy::EmotionTaxonomy(std::vector<std::string> labels,
                                 const std::map<std::string, Tendency>& tendencies)
    : labels_(std::move(labels)) {
  if (labels_.size() != kSize) {
    throw ConfigError("taxonomy must have exactly 13 labels, got " + std::to_string(labels_.size()));
  }
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw ConfigError("taxonomy label must be non-empty");
    if (l == kAmbiguousLabel) throw ConfigError("'ambiguous' is reserved and cannot be a taxonomy label");
    if (!seen.insert(l).second) throw ConfigError("duplicate taxonomy label '" + l + "'");
    auto it = tendencies.find(l);
    if (it == tendencies.end()) throw ConfigError("no tendency for label '" + l + "'");
    if (it->second == Tendency::kAmbiguous) throw ConfigError("label '" + l + "' cannot map to ambiguous");
    tendencies_.push_back(it->second);
  }
  for (const auto& [l, _] : tendencies) {
    if (!seen.count(l)) throw ConfigError("tendency given for unknown label '" + l + "'");
  }
  std::string joined;
  for (const auto& l : labels_) {
    joined += l;
    joined += '\n';
  }
  fingerprint_ = sha256_hex(joined);
}

EmotionTaxonomy EmotionTaxonomy::standard() {
  std::vector<std::string> labels = {"happy",   "grateful", "relaxed",    "positive-other", "neutral",
                                     "anger",   "sadness",  "fear",       "depress",        "disgust",
                                     "astonished", "worried", "negative-other"};
  std::map<std::string, Tendency> t;
  for (const auto& l : labels) t[l] = Tendency::kNegative;
  for (const char* p : {"happy", "grateful", "relaxed", "positive-other"}) t[p] = Tendency::kPositive;
  t["neutral"] = Tendency::kNeutral;
  return EmotionTaxonomy(std::move(labels), t);
}

EmotionTaxonomy EmotionTaxonomy::from_json(const nlohmann::json& j) {
  if (j.is_null()) return standard();
  if (!j.is_object()) throw ConfigError("taxonomy must be an object");
  EmotionTaxonomy base = standard();
  std::vector<std::string> labels = base.labels_;
  if (j.contains("labels")) {
    if (!j["labels"].is_array()) throw ConfigError("taxonomy.labels must be an array");
    labels.clear();
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw ConfigError("taxonomy.labels entries must be strings");
      labels.push_back(l.get<std::string>());
    }
  }
  std::map<std::string, Tendency> t;
  // Labels shared with the standard taxonomy keep their default tendency.
  for (const auto& l : labels) {
    if (auto id = base.find(l)) t[l] = base.tendency(*id);
  }
  if (j.contains("tendencies")) {
    if (!j["tendencies"].is_object()) throw ConfigError("taxonomy.tendencies must be an object");
    for (const auto& [l, v] : j["tendencies"].items()) {
      if (!v.is_string()) throw ConfigError("tendency for '" + l + "' must be a string");
      t[l] = parse_tendency(v.get<std::string>());
    }
  }
  return EmotionTaxonomy(std::move(labels), t);
}

nlohmann::json EmotionTaxonomy::to_json() const {
  nlohmann::json t = nlohmann::json::object();
  for (std::size_t i = 0; i < labels_.size(); ++i) t[labels_[i]] = std::string(to_string(tendencies_[i]));
  return {{"labels", labels_}, {"tendencies", t}, {"fingerprint", fingerprint_}};
}

const std::string& EmotionTaxonomy::label(EmotionId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= labels_.size()) {
    throw ContractError("emotion id out of range: " + std::to_string(id));
  }
  return labels_[static_cast<std::size_t>(id)];
}

std::string_view EmotionTaxonomy::name(EmotionId id) const {
  if (id == kAmbiguous) return kAmbiguousLabel;
  return label(id);
}

std::optional<EmotionId> EmotionTaxonomy::find(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<EmotionId>(it - labels_.begin());
}

EmotionId EmotionTaxonomy::id_of(std::string_view label) const {
  if (label == kAmbiguousLabel) return kAmbiguous;
  if (auto id = find(label)) return *id;
  throw DataError("emotion label '" + std::string(label) + "' is not in the taxonomy");
}

Tendency EmotionTaxonomy::tendency(EmotionId id) const {
  if (id == kAmbiguous) return Tendency::kAmbiguous;
  label(id);  // range check
  return tendencies_[static_cast<std::size_t>(id)];
}

Tendency EmotionTaxonomy::tendency_of(std::string_view label) const { return tendency(id_of(label)); }

}  // namespace rpeval
