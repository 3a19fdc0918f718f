#include "rpeval/erc.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>

#include "rpeval/errors.hpp"
#include "rpeval/json_extract.hpp"

namespace rpeval {

using nlohmann::json;

std::string_view reply_key(Modality m) {
  switch (m) {
    case Modality::kFace: return "facial_expression";
    case Modality::kBody: return "body_movement";
    case Modality::kSpeech: return "speech_prompt";
    case Modality::kFusion: return "fusion";
  }
  return "fusion";
}

namespace {

const std::vector<std::vector<std::string>>& modality_aliases() {
  static const std::vector<std::vector<std::string>> aliases = {
      {"facial_expression", "emos_f", "face", "facial"},
      {"body_movement", "emos_b", "body", "movement"},
      {"speech_prompt", "emos_s", "speech", "tone"},
      {"fusion", "emos_fusion", "all", "overall"},
  };
  return aliases;
}

std::string normalize_label(std::string_view s) {
  std::string t = trim_text(s);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return t;
}

std::string reply_schema(std::size_t len_utts) {
  std::string list = "[";
  for (std::size_t i = 0; i < len_utts; ++i) list += (i ? ", \"<label>\"" : "\"<label>\"");
  list += "]";
  return "{\"facial_expression\": " + list + ", \"body_movement\": " + list + ", \"speech_prompt\": " + list +
         ", \"fusion\": " + list + "}";
}

}  // namespace

std::string erc_prompt(const MultimodalResponse& resp, const UtteranceSegmentation& seg,
                       const EmotionTaxonomy& taxonomy, const PromptLibrary& prompts, const std::string& correction) {
  std::string labels;
  for (const auto& l : taxonomy.labels()) labels += (labels.empty() ? "" : ", ") + l;
  std::string utts;
  for (std::size_t i = 0; i < seg.count(); ++i) {
    std::string u = seg.utterances[i];
    std::replace(u.begin(), u.end(), '\n', ' ');
    utts += "[" + std::to_string(i + 1) + "] " + u + "\n";
  }
  if (!utts.empty()) utts.pop_back();
  return prompts.render(kErcPrompt, {{"len_utts", std::to_string(seg.count())},
                                     {"labels", labels},
                                     {"response", to_json(resp).dump(2)},
                                     {"utterances", utts},
                                     {"reply_schema", reply_schema(seg.count())},
                                     {"correction", correction}});
}

ParsedErcReply parse_erc_reply(std::string_view text, std::size_t len_utts, const EmotionTaxonomy& taxonomy) {
  ParsedErcReply out;
  auto candidates = object_candidates(text);
  if (candidates.empty()) {
    for (auto& p : out.problems) p = "reply is not a JSON object";
    return out;
  }
  const json& obj = candidates.front();
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    const json* list = nullptr;
    for (const auto& key : modality_aliases()[m]) {
      if (obj.contains(key)) {
        list = &obj.at(key);
        break;
      }
    }
    if (!list) {
      out.problems[m] = "missing list";
      continue;
    }
    if (!list->is_array()) {
      out.problems[m] = "not a list";
      continue;
    }
    if (list->size() != len_utts) {
      out.problems[m] = "expected " + std::to_string(len_utts) + " labels, got " + std::to_string(list->size());
      continue;
    }
    std::vector<EmotionId> ids;
    for (const auto& e : *list) {
      std::optional<EmotionId> id;
      if (e.is_string()) id = taxonomy.find(normalize_label(e.get<std::string>()));
      if (!id) {
        out.problems[m] = "label " + e.dump() + " is not in the label list";
        break;
      }
      ids.push_back(*id);
    }
    if (out.problems[m].empty()) out.labels[m] = std::move(ids);
  }
  return out;
}

PanelOutcome run_panel(const MultimodalResponse& resp, const UtteranceSegmentation& seg,
                       std::span<JudgeClient* const> experts, const EmotionTaxonomy& taxonomy,
                       const PromptLibrary& prompts, const PanelOptions& opts) {
  if (experts.empty()) throw ContractError("run_panel: no experts");
  if (opts.passes < 1) throw ContractError("run_panel: passes must be >= 1");
  PanelOutcome out;
  const std::string prompt = erc_prompt(resp, seg, taxonomy, prompts);
  for (JudgeClient* expert : experts) {
    for (int pass = 1; pass <= opts.passes; ++pass) {
      const Sampling sampling =
          static_cast<std::size_t>(pass) <= opts.pass_sampling.size() ? opts.pass_sampling[pass - 1] : opts.sampling;
      ErcResult result{expert->name(), pass, {}};
      try {
        auto parsed = parse_erc_reply(expert->call({JudgeKind::kErc, prompt, sampling, pass}).text, seg.count(), taxonomy);
        std::string problems;
        for (std::size_t m = 0; m < kModalityCount; ++m) {
          if (!parsed.labels[m]) problems += std::string(reply_key(static_cast<Modality>(m))) + ": " + parsed.problems[m] + "; ";
        }
        if (!problems.empty()) {
          ++out.reprompts;
          std::string labels;
          for (const auto& l : taxonomy.labels()) labels += (labels.empty() ? "" : ", ") + l;
          const std::string correction =
              "\nYour previous reply was rejected (" + problems + "). Each of the four lists must contain exactly " +
              std::to_string(seg.count()) + " label(s), and every label must be one of: " + labels + ".";
          try {
            auto retry = parse_erc_reply(
                expert->call({JudgeKind::kErc, erc_prompt(resp, seg, taxonomy, prompts, correction), sampling, pass})
                    .text,
                seg.count(), taxonomy);
            for (std::size_t m = 0; m < kModalityCount; ++m) {
              if (!parsed.labels[m]) parsed.labels[m] = std::move(retry.labels[m]);
            }
          } catch (const TransportError& e) {
            out.log.push_back(expert->name() + " pass " + std::to_string(pass) + " re-prompt: " + e.what());
          }
        }
        for (std::size_t m = 0; m < kModalityCount; ++m) {
          if (!parsed.labels[m]) {
            ++out.dropped_vote_sets;
            out.log.push_back(expert->name() + " pass " + std::to_string(pass) + " " +
                              std::string(reply_key(static_cast<Modality>(m))) + ": vote set dropped");
          }
        }
        result.labels = std::move(parsed.labels);
        out.results.push_back(std::move(result));
      } catch (const TransportError& e) {
        ++out.failed_calls;
        out.log.push_back(expert->name() + " pass " + std::to_string(pass) + ": " + e.what());
      }
    }
  }
  for (const auto& line : out.log) spdlog::debug("erc: {}", line);
  return out;
}

std::vector<EmotionId> AggregatedEmotions::final_labels(Modality m) const {
  std::vector<EmotionId> out;
  for (const auto& c : of(m)) out.push_back(c.final_label);
  return out;
}

bool AggregatedEmotions::complete() const {
  for (const auto& mod : cells) {
    for (const auto& c : mod) {
      if (c.distribution.total_votes == 0) return false;
    }
  }
  return true;
}

EmotionId select_label(const metrics::EmotionDistribution& d, double tau) {
  if (d.total_votes == 0) return kAmbiguous;
  // 7/10 must meet tau = 0.7
  const double needed = tau * static_cast<double>(d.total_votes) - 1e-9;
  EmotionId chosen = kAmbiguous;
  int qualifying = 0;
  for (std::size_t i = 0; i < d.counts.size(); ++i) {
    if (static_cast<double>(d.counts[i]) >= needed) {
      chosen = static_cast<EmotionId>(i);
      ++qualifying;
    }
  }
  return qualifying == 1 ? chosen : kAmbiguous;
}

AggregatedEmotions aggregate(std::span<const ErcResult> results, double tau, std::size_t n_labels) {
  if (results.empty()) throw ContractError("aggregate: no ERC results");
  if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("aggregate: tau must be in (0, 1]");
  std::optional<std::size_t> len;
  for (const auto& r : results) {
    for (const auto& l : r.labels) {
      if (!l) continue;
      if (len && *len != l->size()) throw ContractError("aggregate: ERC results disagree on utterance count");
      len = l->size();
    }
  }
  if (!len) throw ContractError("aggregate: every vote set was dropped");

  AggregatedEmotions agg;
  agg.len_utts = *len;
  for (auto& mod : agg.cells) {
    mod.assign(*len, AggregatedCell{kAmbiguous, metrics::EmotionDistribution(n_labels)});
  }
  for (const auto& r : results) {
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      if (!r.labels[m]) continue;
      for (std::size_t u = 0; u < *len; ++u) agg.cells[m][u].distribution.add((*r.labels[m])[u]);
    }
  }
  for (auto& mod : agg.cells) {
    for (auto& c : mod) c.final_label = select_label(c.distribution, tau);
  }
  return agg;
}

}  // namespace rpeval
