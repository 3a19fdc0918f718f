#include "rpeval/prompts.hpp"

#include <fstream>
#include <sstream>

#include "rpeval/errors.hpp"

namespace rpeval {

// Defined in the generated prompt_assets.cpp.
const std::map<std::string, std::string>& builtin_prompt_assets();

PromptLibrary::PromptLibrary() : templates_(builtin_prompt_assets()) {}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  PromptLibrary lib;
  if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.set(entry.path().stem().string(), ss.str());
  }
  return lib;
}

const std::string& PromptLibrary::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ConfigError("unknown prompt template '" + id + "'");
  return it->second;
}

std::string PromptLibrary::render(const std::string& id, const std::map<std::string, std::string>& vars) const {
  return render_template(get(id), vars);
}

std::string render_template(const std::string& text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto open = text.find("{{", i);
    if (open == std::string::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(text, i, open - i);
    const std::string key = text.substr(open + 2, close - open - 2);
    if (auto it = vars.find(key); it != vars.end()) {
      out += it->second;
    } else {
      out.append(text, open, close + 2 - open);
    }
    i = close + 2;
  }
  out.append(text, i, std::string::npos);
  return out;
}

}  // namespace rpeval
