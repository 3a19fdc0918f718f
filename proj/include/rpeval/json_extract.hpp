#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rpeval {

/// Top-level brace-balanced `{...}` spans in `text`, in order. Braces inside
/// JSON string literals are ignored. Unterminated objects are not returned.
std::vector<std::string_view> embedded_objects(std::string_view text);

/// Parses `text` as a JSON object, or failing that the objects embedded in
/// it (e.g. inside a fenced block or prose). Returns every candidate that
/// parses as an object; the whole text counts as a single candidate when it
/// parses on its own.
std::vector<nlohmann::json> object_candidates(std::string_view text);

}  // namespace rpeval
