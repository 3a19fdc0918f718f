#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpeval/taxonomy.hpp"

namespace rpeval {

struct RoleCard {
  std::string role_id;
  std::string profile;
  std::string image_ref;
  std::string user_name;

  bool operator==(const RoleCard&) const = default;
};

/// One agent turn: the four semantic channels of a multimodal reply.
struct MultimodalResponse {
  std::string facial_expression;
  std::string body_movement;
  std::string speech_prompt;
  std::string content;

  bool operator==(const MultimodalResponse&) const = default;
};

inline constexpr std::string_view kFacialKey = "facial_expression";
inline constexpr std::string_view kBodyKey = "body_movement";
inline constexpr std::string_view kSpeechKey = "speech_prompt";
inline constexpr std::string_view kContentKey = "content";

/// Alias key -> canonical key. Canonical keys always map to themselves.
using KeyAliases = std::map<std::string, std::string, std::less<>>;

/// face/facial, body/movement/action, speech/tone/intonation, text/response.
const KeyAliases& default_key_aliases();

/// Canonical four-key object.
nlohmann::json to_json(const MultimodalResponse& r);

/// Strict parse: exactly the four fields after alias normalization, all
/// strings, content non-blank. Surrounding whitespace of each field is
/// trimmed. Returns nullopt on any violation; `why` receives the reason.
std::optional<MultimodalResponse> response_from_json(const nlohmann::json& j, const KeyAliases& aliases,
                                                     std::string* why = nullptr);

struct UserTurn {
  std::string content;
  std::string audio_ref;
  std::string video_ref;

  bool operator==(const UserTurn&) const = default;
};

struct HistoryTurn {
  UserTurn user;
  MultimodalResponse agent;

  bool operator==(const HistoryTurn&) const = default;
};

struct DialogueSample {
  std::string sample_id;
  RoleCard role;
  std::string previous_info;
  std::vector<HistoryTurn> history;
  UserTurn user_input;
  MultimodalResponse ground_truth;
  std::vector<EmotionId> gt_emotions;
  /// Explicit dialogue grouping key; when absent, grouping is inferred from
  /// file order (see group_dialogues).
  std::optional<std::string> dialogue_id;

  bool operator==(const DialogueSample&) const = default;
};

struct PredictionRecord {
  std::string sample_id;
  std::string raw_output;
  std::optional<MultimodalResponse> response;
};

// ---------------------------------------------------------------------------
// Utterance segmentation

struct UtteranceSegmentation {
  std::vector<std::string> utterances;
  std::size_t count() const noexcept { return utterances.size(); }
};

/// 。，！？；… and their ASCII counterparts . , ! ? ;
const std::vector<std::string>& default_delimiters();

/// Splits `content` on any delimiter, trims each fragment and drops empty
/// ones. Never returns zero utterances: when nothing survives, the trimmed
/// content is the single utterance.
UtteranceSegmentation segment_utterances(std::string_view content,
                                         const std::vector<std::string>& delimiters = default_delimiters());

/// Trims ASCII whitespace and U+3000 from both ends.
std::string trim_text(std::string_view s);

// ---------------------------------------------------------------------------
// Corpus I/O

struct CorpusOptions {
  std::vector<std::string> delimiters = default_delimiters();
  KeyAliases aliases = default_key_aliases();
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<DialogueSample> samples, const EmotionTaxonomy& taxonomy, const CorpusOptions& opts = {});

  const std::vector<DialogueSample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  const DialogueSample& at(std::size_t i) const { return samples_.at(i); }

  std::optional<std::size_t> index_of(std::string_view sample_id) const;
  const std::map<std::string, RoleCard>& roles() const noexcept { return roles_; }

 private:
  std::vector<DialogueSample> samples_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<std::string, RoleCard> roles_;
};

/// Corpus line object. History/ground-truth responses use the short keys
/// face/body/speech/content.
nlohmann::json to_json(const DialogueSample& s, const EmotionTaxonomy& taxonomy);
DialogueSample sample_from_json(const nlohmann::json& j, const EmotionTaxonomy& taxonomy,
                                const CorpusOptions& opts = {});

/// Reads a JSON-lines corpus. Blank lines are skipped. Errors carry the line
/// number and offending field.
Corpus load_corpus(const std::filesystem::path& path, const EmotionTaxonomy& taxonomy,
                   const CorpusOptions& opts = {});
void write_corpus(const std::filesystem::path& path, const Corpus& corpus, const EmotionTaxonomy& taxonomy);

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path,
                                               const KeyAliases& aliases = default_key_aliases());
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& preds);

/// Throws DataError when a prediction names an unknown or repeated sample.
void check_predictions(const Corpus& corpus, const std::vector<PredictionRecord>& preds);

/// Groups corpus samples into dialogues. Samples sharing an explicit
/// dialogue_id form one dialogue. A sample without one continues the
/// previous sample in file order when both have the same role and its
/// history is exactly one turn longer; otherwise it opens a new dialogue.
/// Each group is ordered by history length (turn position).
std::vector<std::vector<std::size_t>> group_dialogues(const std::vector<DialogueSample>& samples);

}  // namespace rpeval
