#include "rpeval/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "rpeval/errors.hpp"

namespace rpeval {

using nlohmann::json;

const KeyAliases& default_key_aliases() {
  static const KeyAliases aliases = {
      {"facial_expression", "facial_expression"},
      {"face", "facial_expression"},
      {"facial", "facial_expression"},
      {"expression", "facial_expression"},
      {"body_movement", "body_movement"},
      {"body", "body_movement"},
      {"movement", "body_movement"},
      {"action", "body_movement"},
      {"speech_prompt", "speech_prompt"},
      {"speech", "speech_prompt"},
      {"tone", "speech_prompt"},
      {"intonation", "speech_prompt"},
      {"content", "content"},
      {"text", "content"},
      {"response", "content"},
  };
  return aliases;
}

json to_json(const MultimodalResponse& r) {
  json j = json::object();
  j[std::string(kFacialKey)] = r.facial_expression;
  j[std::string(kBodyKey)] = r.body_movement;
  j[std::string(kSpeechKey)] = r.speech_prompt;
  j[std::string(kContentKey)] = r.content;
  return j;
}

std::optional<MultimodalResponse> response_from_json(const json& j, const KeyAliases& aliases, std::string* why) {
  auto fail = [&](std::string msg) -> std::optional<MultimodalResponse> {
    if (why) *why = std::move(msg);
    return std::nullopt;
  };
  if (!j.is_object()) return fail("not an object");
  std::map<std::string, std::string> fields;
  for (const auto& [key, value] : j.items()) {
    auto it = aliases.find(key);
    if (it == aliases.end()) return fail("unexpected key '" + key + "'");
    if (!value.is_string()) return fail("value of '" + key + "' is not a string");
    if (!fields.emplace(it->second, trim_text(value.get<std::string>())).second) {
      return fail("key '" + it->second + "' given more than once");
    }
  }
  for (auto k : {kFacialKey, kBodyKey, kSpeechKey, kContentKey}) {
    if (!fields.count(std::string(k))) return fail("missing key '" + std::string(k) + "'");
  }
  MultimodalResponse r{fields["facial_expression"], fields["body_movement"], fields["speech_prompt"],
                       fields["content"]};
  if (r.content.empty()) return fail("content is empty");
  return r;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& default_delimiters() {
  static const std::vector<std::string> d = {"。", "，", "！", "？", "；", "…", ".", ",", "!", "?", ";"};
  return d;
}

namespace {

std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte; step over it
}

constexpr std::string_view kIdeographicSpace = "\xE3\x80\x80";

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string trim_text(std::string_view s) {
  for (;;) {
    if (!s.empty() && is_ascii_space(s.front())) {
      s.remove_prefix(1);
    } else if (s.starts_with(kIdeographicSpace)) {
      s.remove_prefix(kIdeographicSpace.size());
    } else {
      break;
    }
  }
  for (;;) {
    if (!s.empty() && is_ascii_space(s.back())) {
      s.remove_suffix(1);
    } else if (s.ends_with(kIdeographicSpace)) {
      s.remove_suffix(kIdeographicSpace.size());
    } else {
      break;
    }
  }
  return std::string(s);
}

UtteranceSegmentation segment_utterances(std::string_view content, const std::vector<std::string>& delimiters) {
  UtteranceSegmentation seg;
  std::size_t start = 0;
  std::size_t i = 0;
  auto flush = [&](std::size_t end) {
    std::string frag = trim_text(content.substr(start, end - start));
    if (!frag.empty()) seg.utterances.push_back(std::move(frag));
  };
  while (i < content.size()) {
    std::size_t matched = 0;
    for (const auto& d : delimiters) {
      if (!d.empty() && d.size() > matched && content.substr(i).starts_with(d)) matched = d.size();
    }
    if (matched > 0) {
      flush(i);
      i += matched;
      start = i;
    } else {
      i += utf8_len(static_cast<unsigned char>(content[i]));
    }
  }
  flush(std::min(i, content.size()));
  if (seg.utterances.empty()) seg.utterances.push_back(trim_text(content));
  return seg;
}

// ---------------------------------------------------------------------------

namespace {

json response_short_json(const MultimodalResponse& r) {
  return {{"face", r.facial_expression}, {"body", r.body_movement}, {"speech", r.speech_prompt},
          {"content", r.content}};
}

json user_json(const UserTurn& u) {
  json j = {{"content", u.content}};
  if (!u.audio_ref.empty()) j["audio"] = u.audio_ref;
  if (!u.video_ref.empty()) j["video"] = u.video_ref;
  return j;
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  return j.at(key);
}

std::string str_field(const json& j, const char* key, const std::string& where, bool required = true) {
  if (!j.is_object()) throw DataError(where + ": expected an object");
  if (!j.contains(key)) {
    if (required) throw DataError(where + ": missing field '" + key + "'");
    return {};
  }
  const auto& v = j.at(key);
  if (v.is_null() && !required) return {};
  if (!v.is_string()) throw DataError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

UserTurn user_from_json(const json& j, const std::string& where) {
  if (j.is_string()) return UserTurn{j.get<std::string>(), {}, {}};
  UserTurn u;
  u.content = str_field(j, "content", where);
  u.audio_ref = str_field(j, "audio", where, false);
  u.video_ref = str_field(j, "video", where, false);
  return u;
}

MultimodalResponse response_field(const json& j, const std::string& where, const KeyAliases& aliases) {
  std::string why;
  auto r = response_from_json(j, aliases, &why);
  if (!r) throw DataError(where + ": " + why);
  return *r;
}

}  // namespace

json to_json(const DialogueSample& s, const EmotionTaxonomy& taxonomy) {
  json history = json::array();
  for (const auto& h : s.history) history.push_back({{"user", user_json(h.user)}, {"agent", response_short_json(h.agent)}});
  json emotions = json::array();
  for (EmotionId e : s.gt_emotions) emotions.push_back(std::string(taxonomy.name(e)));
  json j = {{"sample_id", s.sample_id},
            {"role",
             {{"role_id", s.role.role_id},
              {"profile", s.role.profile},
              {"image_ref", s.role.image_ref},
              {"user_name", s.role.user_name}}},
            {"previous_info", s.previous_info},
            {"history", history},
            {"user_input", user_json(s.user_input)},
            {"ground_truth", response_short_json(s.ground_truth)},
            {"gt_emotions", emotions}};
  if (s.dialogue_id) j["dialogue_id"] = *s.dialogue_id;
  return j;
}

DialogueSample sample_from_json(const json& j, const EmotionTaxonomy& taxonomy, const CorpusOptions& opts) {
  if (!j.is_object()) throw DataError("record is not an object");
  DialogueSample s;
  s.sample_id = str_field(j, "sample_id", "record");
  if (s.sample_id.empty()) throw DataError("field 'sample_id' is empty");
  const std::string where = "sample '" + s.sample_id + "'";

  const json& role = field(j, "role", where);
  s.role.role_id = str_field(role, "role_id", where + " role");
  if (s.role.role_id.empty()) throw DataError(where + ": field 'role.role_id' is empty");
  s.role.profile = str_field(role, "profile", where + " role", false);
  s.role.image_ref = str_field(role, "image_ref", where + " role", false);
  s.role.user_name = str_field(role, "user_name", where + " role", false);

  s.previous_info = str_field(j, "previous_info", where, false);

  if (j.contains("history")) {
    const json& h = j.at("history");
    if (!h.is_array()) throw DataError(where + ": field 'history' must be an array");
    for (std::size_t i = 0; i < h.size(); ++i) {
      const std::string hw = where + " history[" + std::to_string(i) + "]";
      s.history.push_back({user_from_json(field(h[i], "user", hw), hw + ".user"),
                           response_field(field(h[i], "agent", hw), hw + ".agent", opts.aliases)});
    }
  }
  s.user_input = user_from_json(field(j, "user_input", where), where + " user_input");
  s.ground_truth = response_field(field(j, "ground_truth", where), where + " ground_truth", opts.aliases);

  const json& emos = field(j, "gt_emotions", where);
  if (!emos.is_array()) throw DataError(where + ": field 'gt_emotions' must be an array");
  for (const auto& e : emos) {
    if (!e.is_string()) throw DataError(where + ": field 'gt_emotions' entries must be strings");
    auto id = taxonomy.find(e.get<std::string>());
    if (!id) {
      throw DataError(where + ": field 'gt_emotions': label '" + e.get<std::string>() +
                      "' is not in the taxonomy");
    }
    s.gt_emotions.push_back(*id);
  }
  const std::size_t n_utts = segment_utterances(s.ground_truth.content, opts.delimiters).count();
  if (s.gt_emotions.size() != n_utts) {
    throw DataError(where + ": field 'gt_emotions' has " + std::to_string(s.gt_emotions.size()) +
                    " labels but ground_truth.content has " + std::to_string(n_utts) + " utterances");
  }
  if (j.contains("dialogue_id") && !j.at("dialogue_id").is_null()) {
    s.dialogue_id = str_field(j, "dialogue_id", where);
  }
  return s;
}

Corpus::Corpus(std::vector<DialogueSample> samples, const EmotionTaxonomy& taxonomy, const CorpusOptions& opts)
    : samples_(std::move(samples)) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    const std::string where = "sample '" + s.sample_id + "'";
    if (s.sample_id.empty()) throw DataError("sample at index " + std::to_string(i) + " has an empty sample_id");
    if (!by_id_.emplace(s.sample_id, i).second) throw DataError("duplicate sample_id '" + s.sample_id + "'");
    if (s.role.role_id.empty()) throw DataError(where + ": empty role_id");
    auto [it, inserted] = roles_.emplace(s.role.role_id, s.role);
    if (!inserted && !(it->second == s.role)) {
      throw DataError(where + ": role card for '" + s.role.role_id + "' conflicts with an earlier sample");
    }
    if (trim_text(s.ground_truth.content).empty()) throw DataError(where + ": ground_truth.content is empty");
    for (EmotionId e : s.gt_emotions) {
      if (e < 0 || static_cast<std::size_t>(e) >= taxonomy.size()) {
        throw DataError(where + ": gt_emotions contains a label outside the taxonomy");
      }
    }
    const std::size_t n_utts = segment_utterances(s.ground_truth.content, opts.delimiters).count();
    if (s.gt_emotions.size() != n_utts) {
      throw DataError(where + ": gt_emotions has " + std::to_string(s.gt_emotions.size()) + " labels but " +
                      std::to_string(n_utts) + " utterances");
    }
  }
}

std::optional<std::size_t> Corpus::index_of(std::string_view sample_id) const {
  auto it = by_id_.find(sample_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

namespace {

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_text(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.filename().string() + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    try {
      fn(j);
    } catch (const DataError& e) {
      throw DataError(path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, const EmotionTaxonomy& taxonomy, const CorpusOptions& opts) {
  std::vector<DialogueSample> samples;
  std::set<std::string> ids;
  for_each_line(path, [&](const json& j) {
    samples.push_back(sample_from_json(j, taxonomy, opts));
    if (!ids.insert(samples.back().sample_id).second) {
      throw DataError("duplicate sample_id '" + samples.back().sample_id + "'");
    }
  });
  return Corpus(std::move(samples), taxonomy, opts);
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus, const EmotionTaxonomy& taxonomy) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : corpus.samples()) out << to_json(s, taxonomy).dump() << '\n';
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path, const KeyAliases& aliases) {
  std::vector<PredictionRecord> out;
  for_each_line(path, [&](const json& j) {
    PredictionRecord p;
    p.sample_id = str_field(j, "sample_id", "prediction");
    if (!j.contains("raw_output")) throw DataError("prediction '" + p.sample_id + "': missing field 'raw_output'");
    const json& raw = j.at("raw_output");
    p.raw_output = raw.is_string() ? raw.get<std::string>() : raw.dump();
    if (j.contains("response") && !j.at("response").is_null()) {
      p.response = response_from_json(j.at("response"), aliases);
    }
    out.push_back(std::move(p));
  });
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& preds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : preds) {
    json j = {{"sample_id", p.sample_id}, {"raw_output", p.raw_output}};
    if (p.response) j["response"] = to_json(*p.response);
    out << j.dump() << '\n';
  }
}

void check_predictions(const Corpus& corpus, const std::vector<PredictionRecord>& preds) {
  std::set<std::string> seen;
  for (const auto& p : preds) {
    if (!corpus.index_of(p.sample_id)) {
      throw DataError("prediction sample_id '" + p.sample_id + "' does not resolve to a corpus sample");
    }
    if (!seen.insert(p.sample_id).second) {
      throw DataError("duplicate prediction for sample_id '" + p.sample_id + "'");
    }
  }
}

std::vector<std::vector<std::size_t>> group_dialogues(const std::vector<DialogueSample>& samples) {
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> explicit_groups;
  std::optional<std::size_t> open_group;  // inferred group the previous sample belongs to
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.dialogue_id) {
      auto [it, inserted] = explicit_groups.emplace(*s.dialogue_id, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(i);
      open_group.reset();
      continue;
    }
    bool continues = false;
    if (open_group && i > 0) {
      const auto& prev = samples[i - 1];
      continues = prev.role.role_id == s.role.role_id && s.history.size() == prev.history.size() + 1;
    }
    if (!continues) {
      open_group = groups.size();
      groups.emplace_back();
    }
    groups[*open_group].push_back(i);
  }
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a].history.size() < samples[b].history.size(); });
  }
  return groups;
}

}  // namespace rpeval
