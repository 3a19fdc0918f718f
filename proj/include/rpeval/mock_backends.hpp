#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rpeval/judges.hpp"
#include "rpeval/taxonomy.hpp"

namespace rpeval {

/// Text between a "## <Title>" line and the matching "## End of <title>"
/// line (title lowercased) of a rendered prompt. Empty when absent.
std::string prompt_section(std::string_view prompt, std::string_view title);

/// The "[k] text" utterance lines of an ERC prompt, in order.
std::vector<std::string> prompt_utterances(std::string_view prompt);

/// Deterministic offline judge for demos and tests.
///  - erc: labels each utterance with the taxonomy label named in its text
///    (ASCII case-insensitive; earliest, then longest match; "neutral" when
///    none), identically for all four channels.
///  - rc: quotes the response content as the single agreeing span.
///  - repair: returns the raw output unchanged.
///  - generate: replies with the user input as content.
std::shared_ptr<JudgeBackend> make_echo_backend(std::string name, const EmotionTaxonomy& taxonomy);

/// Labels `text` the way the echo backend does.
EmotionId keyword_label(std::string_view text, const EmotionTaxonomy& taxonomy);

}  // namespace rpeval
