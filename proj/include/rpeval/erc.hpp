#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpeval/corpus.hpp"
#include "rpeval/judges.hpp"
#include "rpeval/metrics/entropy.hpp"
#include "rpeval/prompts.hpp"
#include "rpeval/taxonomy.hpp"

namespace rpeval {

enum class Modality { kFace = 0, kBody = 1, kSpeech = 2, kFusion = 3 };
inline constexpr std::size_t kModalityCount = 4;
inline constexpr std::array<Modality, kModalityCount> kModalities = {Modality::kFace, Modality::kBody,
                                                                      Modality::kSpeech, Modality::kFusion};

/// Reply-schema key of a modality: facial_expression, body_movement,
/// speech_prompt, fusion.
std::string_view reply_key(Modality m);

/// One expert's labels for one pass. A modality is std::nullopt when that
/// vote set was dropped (wrong length or off-taxonomy labels after the
/// re-prompt).
struct ErcResult {
  std::string expert_id;
  int pass_index = 1;
  std::array<std::optional<std::vector<EmotionId>>, kModalityCount> labels;

  const std::optional<std::vector<EmotionId>>& of(Modality m) const { return labels[static_cast<std::size_t>(m)]; }
};

struct PanelOptions {
  int passes = 2;
  /// Sampling for pass i (1-based) is pass_sampling[i-1]; missing entries
  /// fall back to `sampling`.
  std::vector<Sampling> pass_sampling;
  Sampling sampling{};
};

struct PanelOutcome {
  std::vector<ErcResult> results;  ///< one per (expert, pass) whose call succeeded
  int failed_calls = 0;            ///< (expert, pass) lost to transport failure
  int reprompts = 0;
  int dropped_vote_sets = 0;       ///< (expert, pass, modality) triples dropped
  std::vector<std::string> log;
};

/// Renders the recognition prompt for one response.
std::string erc_prompt(const MultimodalResponse& resp, const UtteranceSegmentation& seg,
                       const EmotionTaxonomy& taxonomy, const PromptLibrary& prompts,
                       const std::string& correction = {});

struct ParsedErcReply {
  std::array<std::optional<std::vector<EmotionId>>, kModalityCount> labels;
  std::array<std::string, kModalityCount> problems;  ///< empty when the modality parsed
};

/// Parses an expert reply. Labels are matched after trimming and lowercasing.
/// A modality fails when its list is missing, has the wrong length, or holds
/// a label outside the taxonomy.
ParsedErcReply parse_erc_reply(std::string_view text, std::size_t len_utts, const EmotionTaxonomy& taxonomy);

/// Asks every expert for `passes` independent recognitions. A reply with any
/// invalid modality triggers one re-prompt restating the label list and the
/// required length; a modality still invalid after that is dropped.
PanelOutcome run_panel(const MultimodalResponse& resp, const UtteranceSegmentation& seg,
                       std::span<JudgeClient* const> experts, const EmotionTaxonomy& taxonomy,
                       const PromptLibrary& prompts, const PanelOptions& opts = {});

struct AggregatedCell {
  EmotionId final_label = kAmbiguous;
  metrics::EmotionDistribution distribution;
};

struct AggregatedEmotions {
  std::size_t len_utts = 0;
  std::array<std::vector<AggregatedCell>, kModalityCount> cells;

  const std::vector<AggregatedCell>& of(Modality m) const { return cells[static_cast<std::size_t>(m)]; }
  std::vector<EmotionId> final_labels(Modality m) const;
  /// True when every modality received at least one vote per utterance.
  bool complete() const;
};

/// Label chosen by the threshold rule: the unique label whose vote share is
/// at least `tau`, else kAmbiguous.
EmotionId select_label(const metrics::EmotionDistribution& d, double tau);

/// Folds panel results into per-(modality, utterance) vote histograms and
/// final labels. Throws ContractError on empty input, inconsistent lengths
/// or tau outside (0, 1].
AggregatedEmotions aggregate(std::span<const ErcResult> results, double tau, std::size_t n_labels);

}  // namespace rpeval
