#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace rpeval {

/// Versioned prompt templates, keyed by id ("erc-v1", "repair-v1", ...).
///
/// Built-in templates are compiled in from assets/prompts. A directory of
/// `<id>.txt` files may override or add templates. Placeholders are written
/// `{{name}}`.
class PromptLibrary {
 public:
  PromptLibrary();

  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  const std::string& get(const std::string& id) const;
  bool contains(const std::string& id) const { return templates_.count(id) != 0; }
  void set(const std::string& id, std::string text) { templates_[id] = std::move(text); }

  /// Substitutes every `{{key}}` found in `vars`. Unknown placeholders are
  /// left untouched.
  std::string render(const std::string& id, const std::map<std::string, std::string>& vars) const;

 private:
  std::map<std::string, std::string> templates_;
};

std::string render_template(const std::string& text, const std::map<std::string, std::string>& vars);

inline constexpr const char* kRepairPrompt = "repair-v1";
inline constexpr const char* kErcPrompt = "erc-v1";
inline constexpr const char* kRcExpPrompt = "rc-exp-v1";
inline constexpr const char* kRcChaPrompt = "rc-cha-v1";
inline constexpr const char* kRcRelPrompt = "rc-rel-v1";
inline constexpr const char* kGeneratePrompt = "generate-v1";

}  // namespace rpeval
