#include "rpeval/mock_backends.hpp"

#include <cctype>
#include <sstream>

#include "rpeval/corpus.hpp"
#include "rpeval/errors.hpp"

namespace rpeval {

using nlohmann::json;

std::string prompt_section(std::string_view prompt, std::string_view title) {
  const std::string open = "## " + std::string(title);
  std::string lowered(title);
  for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const std::string close = "## End of " + lowered;
  auto start = prompt.find(open);
  if (start == std::string_view::npos) return {};
  start = prompt.find('\n', start);
  if (start == std::string_view::npos) return {};
  ++start;
  auto end = prompt.find(close, start);
  if (end == std::string_view::npos) return {};
  std::string_view body = prompt.substr(start, end - start);
  if (body.ends_with('\n')) body.remove_suffix(1);
  return std::string(body);
}

std::vector<std::string> prompt_utterances(std::string_view prompt) {
  std::vector<std::string> out;
  const std::string body = prompt_section(prompt, "Utterances");
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() != '[') continue;
    const auto close = line.find("] ");
    out.push_back(close == std::string::npos ? std::string() : line.substr(close + 2));
  }
  return out;
}

EmotionId keyword_label(std::string_view raw, const EmotionTaxonomy& taxonomy) {
  std::string text(raw);
  for (auto& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t best_pos = std::string_view::npos;
  std::size_t best_len = 0;
  EmotionId best = taxonomy.find("neutral").value_or(0);
  for (std::size_t i = 0; i < taxonomy.size(); ++i) {
    const auto& l = taxonomy.labels()[i];
    const auto pos = text.find(l);
    if (pos == std::string_view::npos) continue;
    if (pos < best_pos || (pos == best_pos && l.size() > best_len)) {
      best_pos = pos;
      best_len = l.size();
      best = static_cast<EmotionId>(i);
    }
  }
  return best;
}

std::shared_ptr<JudgeBackend> make_echo_backend(std::string name, const EmotionTaxonomy& taxonomy) {
  return std::make_shared<FunctionBackend>(std::move(name), [taxonomy](const JudgeRequest& req) -> std::string {
    switch (req.kind) {
      case JudgeKind::kErc: {
        json labels = json::array();
        for (const auto& u : prompt_utterances(req.prompt)) labels.push_back(taxonomy.label(keyword_label(u, taxonomy)));
        return json{{"facial_expression", labels}, {"body_movement", labels}, {"speech_prompt", labels}, {"fusion", labels}}
            .dump();
      }
      case JudgeKind::kRc: {
        auto resp = json::parse(prompt_section(req.prompt, "Response"), nullptr, false);
        json agree = json::array();
        if (resp.is_object() && resp.contains("content") && resp["content"].is_string()) agree.push_back(resp["content"]);
        return json{{"agree_evidence", agree}, {"disagree_evidence", json::array()}}.dump();
      }
      case JudgeKind::kRepair:
        return prompt_section(req.prompt, "Raw output");
      case JudgeKind::kGenerate: {
        std::string input = prompt_section(req.prompt, "User input");
        if (trim_text(input).empty()) input = "……";
        return json{{"facial_expression", "平静"}, {"body_movement", "站着"}, {"speech_prompt", "语气平稳"}, {"content", input}}
            .dump();
      }
    }
    throw PermanentBackendError("echo backend: unsupported request kind");
  });
}

}  // namespace rpeval
