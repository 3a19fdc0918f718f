#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "rpeval/corpus.hpp"
#include "rpeval/judges.hpp"
#include "rpeval/prompts.hpp"

namespace rpeval {

enum class FormatStatus { kValidDirect, kRepaired, kUnrepairable };

std::string_view to_string(FormatStatus s);

struct FormatOutcome {
  FormatStatus status = FormatStatus::kUnrepairable;
  std::optional<MultimodalResponse> response;  ///< present unless unrepairable
  int repair_attempts = 0;
  std::string diagnostic;
};

/// Schema description embedded in repair prompts.
const std::string& response_schema_description();

/// Parses raw model output as a four-key response object. When the text as a
/// whole is not JSON, objects embedded in prose or code fences are tried;
/// the response is accepted only if exactly one distinct embedded object
/// satisfies the schema.
std::optional<MultimodalResponse> validate(std::string_view raw, const KeyAliases& aliases = default_key_aliases());

struct RepairOptions {
  int max_attempts = 2;
  KeyAliases aliases = default_key_aliases();
  Sampling sampling{};
};

/// Asks the repair judge to reformat `raw`, re-validating every reply.
/// Attempt n is sent with pass_index n so retried attempts are distinct
/// requests. Throws ContractError when `raw` already validates or
/// max_attempts < 1.
FormatOutcome repair(std::string_view raw, JudgeClient& judge, const PromptLibrary& prompts,
                     const RepairOptions& opts = {});

/// validate() first; repair() only when validation fails and a judge is
/// available.
FormatOutcome format_response(std::string_view raw, JudgeClient* judge, const PromptLibrary& prompts,
                              const RepairOptions& opts = {});

}  // namespace rpeval
