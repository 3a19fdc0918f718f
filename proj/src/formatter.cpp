#include "rpeval/formatter.hpp"

#include "rpeval/errors.hpp"
#include "rpeval/json_extract.hpp"

namespace rpeval {

std::string_view to_string(FormatStatus s) {
  switch (s) {
    case FormatStatus::kValidDirect: return "valid_direct";
    case FormatStatus::kRepaired: return "repaired";
    case FormatStatus::kUnrepairable: return "unrepairable";
  }
  return "unrepairable";
}

const std::string& response_schema_description() {
  static const std::string schema =
      "A JSON object with exactly these four string keys and no others:\n"
      "{\n"
      "  \"facial_expression\": \"description of the facial expression\",\n"
      "  \"body_movement\": \"description of the body movement\",\n"
      "  \"speech_prompt\": \"description of the speech intonation\",\n"
      "  \"content\": \"the text the character says (must not be empty)\"\n"
      "}";
  return schema;
}

std::optional<MultimodalResponse> validate(std::string_view raw, const KeyAliases& aliases) {
  std::optional<MultimodalResponse> found;
  for (const auto& candidate : object_candidates(raw)) {
    auto r = response_from_json(candidate, aliases);
    if (!r) continue;
    if (found && !(*found == *r)) return std::nullopt;  // two different responses: ambiguous
    found = std::move(r);
  }
  return found;
}

FormatOutcome repair(std::string_view raw, JudgeClient& judge, const PromptLibrary& prompts, const RepairOptions& opts) {
  if (opts.max_attempts < 1) throw ContractError("repair: max_attempts must be >= 1");
  if (validate(raw, opts.aliases)) throw ContractError("repair: raw output already validates");

  FormatOutcome out;
  const std::string prompt =
      prompts.render(kRepairPrompt, {{"schema", response_schema_description()}, {"raw", std::string(raw)}});
  for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
    out.repair_attempts = attempt;
    JudgeRequest req{JudgeKind::kRepair, prompt, opts.sampling, attempt};
    try {
      auto reply = judge.call(req);
      if (auto r = validate(reply.text, opts.aliases)) {
        out.status = FormatStatus::kRepaired;
        out.response = std::move(r);
        out.diagnostic = "repaired by " + judge.name() + " on attempt " + std::to_string(attempt);
        return out;
      }
      out.diagnostic = "repair reply " + std::to_string(attempt) + " failed validation";
    } catch (const TransportError& e) {
      out.diagnostic = std::string("repair judge transport failure: ") + e.what();
    }
  }
  out.status = FormatStatus::kUnrepairable;
  return out;
}

FormatOutcome format_response(std::string_view raw, JudgeClient* judge, const PromptLibrary& prompts,
                              const RepairOptions& opts) {
  if (auto r = validate(raw, opts.aliases)) {
    return FormatOutcome{FormatStatus::kValidDirect, std::move(r), 0, "valid"};
  }
  if (!judge) return FormatOutcome{FormatStatus::kUnrepairable, std::nullopt, 0, "invalid and no repair judge configured"};
  return repair(raw, *judge, prompts, opts);
}

}  // namespace rpeval
