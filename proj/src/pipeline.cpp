#include "rpeval/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "rpeval/digest.hpp"
#include "rpeval/errors.hpp"
#include "rpeval/metrics/entropy.hpp"
#include "rpeval/metrics/rc_score.hpp"
#include "rpeval/mock_backends.hpp"

namespace rpeval {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "1.0.0";

const std::array<const char*, 3> kRcPromptIds = {kRcExpPrompt, kRcChaPrompt, kRcRelPrompt};

std::string_view material_name(RcMaterial m) { return m == RcMaterial::kProfile ? "profile" : "previous_info"; }

RcMaterial parse_material(const std::string& s) {
  if (s == "profile") return RcMaterial::kProfile;
  if (s == "previous_info" || s == "prev") return RcMaterial::kPreviousInfo;
  throw ConfigError("unknown RC material '" + s + "' (expected profile or previous_info)");
}

fs::path resolve(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  if (!j.at(key).is_string()) throw ConfigError(std::string(key) + " must be a string path");
  fs::path p = j.at(key).get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string(key) + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError(std::string(key) + " must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

BackendSpec backend_from_json(const std::string& name, const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("backend '" + name + "' must be an object");
  BackendSpec b;
  b.name = name;
  b.type = j.value("type", "");
  if (b.type == "http") {
    b.http.name = name;
    b.http.endpoint = j.value("endpoint", "");
    b.http.model = j.value("model", "");
    b.http.api_key_env = j.value("api_key_env", "");
    b.http.rate_limit_per_sec = j.value("rate_limit_per_sec", 0.0);
    b.http.timeout_sec = j.value("timeout_sec", 120);
    if (b.http.endpoint.empty()) throw ConfigError("backend '" + name + "': http backends need an endpoint");
    if (b.http.rate_limit_per_sec < 0) throw ConfigError("backend '" + name + "': negative rate limit");
  } else if (b.type == "fixtures") {
    b.fixtures_dir = resolve(j, "dir", base);
    if (b.fixtures_dir.empty()) throw ConfigError("backend '" + name + "': fixtures backends need a dir");
  } else if (b.type != "echo") {
    throw ConfigError("backend '" + name + "': unknown type '" + b.type + "' (expected http, fixtures or echo)");
  }
  return b;
}

json backend_to_json(const BackendSpec& b) {
  json j = {{"type", b.type}};
  if (b.type == "http") {
    j["endpoint"] = b.http.endpoint;
    j["model"] = b.http.model;
    j["api_key_env"] = b.http.api_key_env;
    j["rate_limit_per_sec"] = b.http.rate_limit_per_sec;
    j["timeout_sec"] = b.http.timeout_sec;
  } else if (b.type == "fixtures") {
    j["dir"] = b.fixtures_dir.string();
  }
  return j;
}

std::string corpus_digest(const Corpus& corpus, const EmotionTaxonomy& taxonomy) {
  std::string text;
  for (const auto& s : corpus.samples()) text += to_json(s, taxonomy).dump() + "\n";
  return sha256_hex(text);
}

std::string predictions_digest(const std::vector<PredictionRecord>& preds) {
  std::string text;
  for (const auto& p : preds) text += json{{"sample_id", p.sample_id}, {"raw_output", p.raw_output}}.dump() + "\n";
  return sha256_hex(text);
}

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Everything one worker learns about one prediction.
struct SampleWork {
  std::size_t corpus_index = 0;
  FormatOutcome format;
  bool ec_included = false;
  std::optional<AggregatedEmotions> emotions;
  int erc_failed_calls = 0;
  int erc_successful_calls = 0;
  int erc_reprompts = 0;
  int erc_dropped_vote_sets = 0;
  std::string erc_note;
  // [metric][evaluator]
  std::array<std::vector<std::optional<metrics::RcVerdict>>, 3> verdicts;
  long rc_unavailable = 0;
  long rc_transport_failures = 0;
  long rc_calls = 0;
  double format_seconds = 0;
  double erc_seconds = 0;
  double rc_seconds = 0;
};

std::string render_history(const DialogueSample& s) {
  const std::string user = s.role.user_name.empty() ? "User" : s.role.user_name;
  std::string out;
  for (const auto& t : s.history) {
    out += user + ": " + t.user.content + "\n";
    out += s.role.role_id + ": " + t.agent.content + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::vector<std::string> material_texts(const DialogueSample& s, const std::vector<RcMaterial>& materials) {
  std::vector<std::string> out;
  for (auto m : materials) out.push_back(m == RcMaterial::kProfile ? s.role.profile : s.previous_info);
  return out;
}

std::string render_materials(const DialogueSample& s, const std::vector<RcMaterial>& materials) {
  std::string out;
  for (auto m : materials) {
    if (!out.empty()) out += "\n\n";
    out += m == RcMaterial::kProfile ? "Character profile:\n" + s.role.profile
                                     : "Previous information:\n" + s.previous_info;
  }
  return out;
}

}  // namespace

std::shared_ptr<JudgeBackend> make_backend(const BackendSpec& b, const EmotionTaxonomy& taxonomy) {
  if (b.type == "http") return std::make_shared<HttpBackend>(b.http);
  if (b.type == "fixtures") return std::make_shared<FixtureBackend>(b.name, b.fixtures_dir);
  if (b.type == "echo") return make_echo_backend(b.name, taxonomy);
  throw ConfigError("backend '" + b.name + "': unknown type '" + b.type + "'");
}

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  static const std::set<std::string> known = {
      "corpus",        "predictions", "out_dir",        "cache_dir",          "prompts_dir",   "taxonomy",
      "delimiters",    "key_aliases", "tau",            "passes",             "erc_pass_sampling",
      "judge_sampling", "rpa_sampling", "backends",     "experts",            "rc_evaluators", "repair_backend",
      "repair_max_attempts", "concurrency", "retry",    "divergence",         "mec_support",   "rc_materials",
      "seed",          "sample_limit"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }

  RunConfig c;
  try {
    c.corpus_path = resolve(j, "corpus", base_dir);
    c.predictions_path = resolve(j, "predictions", base_dir);
    c.out_dir = resolve(j, "out_dir", base_dir);
    c.cache_dir = resolve(j, "cache_dir", base_dir);
    c.prompts_dir = resolve(j, "prompts_dir", base_dir);

    if (j.contains("taxonomy")) {
      try {
        c.taxonomy = EmotionTaxonomy::from_json(j.at("taxonomy"));
      } catch (const DataError& e) {
        throw ConfigError(std::string("taxonomy: ") + e.what());
      }
    }
    if (j.contains("delimiters")) {
      c.delimiters = string_list(j.at("delimiters"), "delimiters");
      for (const auto& d : c.delimiters) {
        if (d.empty()) throw ConfigError("delimiters must be non-empty strings");
      }
    }
    if (j.contains("key_aliases")) {
      const auto& a = j.at("key_aliases");
      if (!a.is_object()) throw ConfigError("key_aliases must be an object");
      static const std::set<std::string> canonical = {std::string(kFacialKey), std::string(kBodyKey),
                                                      std::string(kSpeechKey), std::string(kContentKey)};
      for (const auto& [alias, target] : a.items()) {
        if (!target.is_string() || !canonical.count(target.get<std::string>())) {
          throw ConfigError("key_aliases['" + alias + "'] must name one of the four response keys");
        }
        c.key_aliases[alias] = target.get<std::string>();
      }
    }

    c.tau = j.value("tau", c.tau);
    if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
    c.passes = j.value("passes", c.passes);
    if (c.passes < 1) throw ConfigError("passes must be >= 1");
    c.judge_sampling = Sampling::from_json(j.value("judge_sampling", json()), c.judge_sampling);
    c.rpa_sampling = Sampling::from_json(j.value("rpa_sampling", json()), c.rpa_sampling);
    if (j.contains("erc_pass_sampling")) {
      const auto& ps = j.at("erc_pass_sampling");
      if (!ps.is_array()) throw ConfigError("erc_pass_sampling must be a list");
      for (const auto& s : ps) c.erc_pass_sampling.push_back(Sampling::from_json(s, c.judge_sampling));
    }

    if (j.contains("backends")) {
      const auto& bs = j.at("backends");
      if (!bs.is_object()) throw ConfigError("backends must be an object keyed by backend name");
      for (const auto& [name, spec] : bs.items()) c.backends.push_back(backend_from_json(name, spec, base_dir));
    }
    if (j.contains("experts")) c.experts = string_list(j.at("experts"), "experts");
    if (j.contains("rc_evaluators")) c.rc_evaluators = string_list(j.at("rc_evaluators"), "rc_evaluators");
    if (j.contains("repair_backend") && !j.at("repair_backend").is_null()) {
      c.repair_backend = j.at("repair_backend").get<std::string>();
    }
    c.repair_max_attempts = j.value("repair_max_attempts", c.repair_max_attempts);
    if (c.repair_max_attempts < 1) throw ConfigError("repair_max_attempts must be >= 1");

    c.concurrency = j.value("concurrency", c.concurrency);
    if (c.concurrency < 1) throw ConfigError("concurrency must be >= 1");
    c.retry = RetryPolicy::from_json(j.value("retry", json()));

    if (j.contains("divergence")) {
      const auto& d = j.at("divergence");
      const std::string f = d.value("flattening", "global");
      if (f == "global") {
        c.divergence.flattening = metrics::MatrixFlattening::kGlobal;
      } else if (f == "row-wise" || f == "rowwise") {
        c.divergence.flattening = metrics::MatrixFlattening::kRowWise;
      } else {
        throw ConfigError("divergence.flattening must be global or row-wise");
      }
      c.divergence.smoothing = d.value("smoothing", c.divergence.smoothing);
      if (c.divergence.smoothing < 0) throw ConfigError("divergence.smoothing must be >= 0");
    }
    if (j.contains("mec_support")) {
      const std::string s = j.at("mec_support").get<std::string>();
      if (s == "samples") {
        c.mec_support = metrics::SupportMode::kSamples;
      } else if (s == "utterances") {
        c.mec_support = metrics::SupportMode::kUtterances;
      } else {
        throw ConfigError("mec_support must be samples or utterances");
      }
    }
    if (j.contains("rc_materials")) {
      const auto& m = j.at("rc_materials");
      if (!m.is_object()) throw ConfigError("rc_materials must be an object");
      for (std::size_t i = 0; i < kRcMetrics.size(); ++i) {
        const std::string key(kRcMetrics[i]);
        if (!m.contains(key)) continue;
        c.rc_materials[i].clear();
        for (const auto& s : string_list(m.at(key), "rc_materials")) c.rc_materials[i].push_back(parse_material(s));
      }
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("sample_limit") && !j.at("sample_limit").is_null()) {
      c.sample_limit = j.at("sample_limit").get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + " is not valid JSON");
  return from_json(j, path.parent_path());
}

json RunConfig::to_json() const {
  json bs = json::object();
  for (const auto& b : backends) bs[b.name] = backend_to_json(b);
  json aliases = json::object();
  for (const auto& [k, v] : key_aliases) aliases[k] = v;
  json pass_sampling = json::array();
  for (const auto& s : erc_pass_sampling) pass_sampling.push_back(s.to_json());
  json materials = json::object();
  for (std::size_t i = 0; i < kRcMetrics.size(); ++i) {
    json list = json::array();
    for (auto m : rc_materials[i]) list.push_back(material_name(m));
    materials[std::string(kRcMetrics[i])] = list;
  }
  return {
      {"corpus", corpus_path.string()},
      {"predictions", predictions_path.string()},
      {"out_dir", out_dir.string()},
      {"cache_dir", cache_dir.string()},
      {"prompts_dir", prompts_dir.string()},
      {"taxonomy", taxonomy.to_json()},
      {"delimiters", delimiters},
      {"key_aliases", aliases},
      {"tau", tau},
      {"passes", passes},
      {"erc_pass_sampling", pass_sampling},
      {"judge_sampling", judge_sampling.to_json()},
      {"rpa_sampling", rpa_sampling.to_json()},
      {"backends", bs},
      {"experts", experts},
      {"rc_evaluators", rc_evaluators},
      {"repair_backend", repair_backend ? json(*repair_backend) : json(nullptr)},
      {"repair_max_attempts", repair_max_attempts},
      {"concurrency", concurrency},
      {"retry", retry.to_json()},
      {"divergence",
       {{"flattening", divergence.flattening == metrics::MatrixFlattening::kGlobal ? "global" : "row-wise"},
        {"smoothing", divergence.smoothing}}},
      {"mec_support", mec_support == metrics::SupportMode::kSamples ? "samples" : "utterances"},
      {"rc_materials", materials},
      {"seed", seed},
      {"sample_limit", sample_limit ? json(*sample_limit) : json(nullptr)},
  };
}

// ---------------------------------------------------------------------------
// Ground-truth statistics

std::map<std::string, std::vector<metrics::DialogueLabels>> role_dialogues(
    const Corpus& corpus, const std::vector<metrics::ResponseLabels>& labels) {
  if (labels.size() != corpus.size()) throw ContractError("role_dialogues: one label entry per corpus sample required");
  std::map<std::string, std::vector<metrics::DialogueLabels>> out;
  for (const auto& [role, card] : corpus.roles()) out[role];
  for (const auto& group : group_dialogues(corpus.samples())) {
    // An explicit dialogue id may span several roles; each role keeps its own chain.
    std::map<std::string, metrics::DialogueLabels> per_role;
    std::vector<std::string> order;
    for (std::size_t i : group) {
      const auto& role = corpus.at(i).role.role_id;
      if (!per_role.count(role)) order.push_back(role);
      per_role[role].push_back(labels[i]);
    }
    for (const auto& role : order) out[role].push_back(std::move(per_role[role]));
  }
  return out;
}

namespace {

std::pair<metrics::RoleMatrices, metrics::RoleMatrices> role_matrices(
    const std::map<std::string, std::vector<metrics::DialogueLabels>>& dialogues, std::size_t n_labels) {
  metrics::RoleMatrices intra;
  metrics::RoleMatrices inter;
  for (const auto& [role, ds] : dialogues) {
    auto m = metrics::build_transition_matrices(ds, n_labels);
    intra.emplace(role, std::move(m.intra));
    inter.emplace(role, std::move(m.inter));
  }
  return {std::move(intra), std::move(inter)};
}

json matrix_json(const metrics::TransitionMatrix& m) {
  const std::size_t n = m.labels();
  json rows = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < n; ++k) row.push_back(m.counts()[i * n + k]);
    rows.push_back(row);
  }
  return {{"total", m.total()}, {"counts", rows}};
}

json cd_json(const metrics::CdResult& cd) {
  return {{"value", cd.value ? json(*cd.value) : json(nullptr)}, {"roles_used", cd.roles_used}, {"pairs", cd.pairs}};
}

}  // namespace

GtStats evaluate_gt(const Corpus& corpus, const metrics::DivergenceOptions& opts) {
  std::vector<metrics::ResponseLabels> labels;
  labels.reserve(corpus.size());
  for (const auto& s : corpus.samples()) labels.emplace_back(s.gt_emotions);
  std::size_t n = EmotionTaxonomy::kSize;
  auto [intra, inter] = role_matrices(role_dialogues(corpus, labels), n);
  GtStats g;
  g.intra = std::move(intra);
  g.inter = std::move(inter);
  g.cd_intra = metrics::character_discrepancy(g.intra, opts);
  g.cd_inter = metrics::character_discrepancy(g.inter, opts);
  return g;
}

json GtStats::to_json(const EmotionTaxonomy& taxonomy) const {
  json roles = json::object();
  for (const auto& [role, m] : intra) roles[role]["intra"] = matrix_json(m);
  for (const auto& [role, m] : inter) roles[role]["inter"] = matrix_json(m);
  return {{"labels", taxonomy.labels()},
          {"taxonomy_fingerprint", taxonomy.fingerprint()},
          {"roles", roles},
          {"cd", {{"intra", cd_json(cd_intra)}, {"inter", cd_json(cd_inter)}}}};
}

// ---------------------------------------------------------------------------
// Evaluator

Evaluator::Evaluator(RunConfig cfg, std::map<std::string, std::shared_ptr<JudgeBackend>> overrides, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      prompts_(cfg_.prompts_dir.empty() ? PromptLibrary() : PromptLibrary::with_overrides(cfg_.prompts_dir)),
      cache_(std::make_shared<ReplyCache>(cfg_.cache_dir)),
      limiter_(std::make_shared<ConcurrencyLimiter>(cfg_.concurrency)),
      stats_(std::make_shared<CallStats>()),
      sleeper_(std::move(sleeper)) {
  for (const auto& b : cfg_.backends) {
    if (!overrides.count(b.name)) backends_[b.name] = make_backend(b, cfg_.taxonomy);
  }
  for (auto& [name, backend] : overrides) {
    if (!backend) throw ConfigError("backend override '" + name + "' is null");
    backends_[name] = backend;
  }
  auto require = [&](const std::string& name, const char* what) {
    if (!backends_.count(name)) throw ConfigError(std::string(what) + " '" + name + "' is not a declared backend");
  };
  if (cfg_.experts.empty()) throw ConfigError("at least one ERC expert backend is required");
  if (cfg_.rc_evaluators.empty()) throw ConfigError("at least one RC evaluator backend is required");
  for (const auto& e : cfg_.experts) require(e, "expert");
  for (const auto& e : cfg_.rc_evaluators) require(e, "rc evaluator");
  if (cfg_.repair_backend) require(*cfg_.repair_backend, "repair backend");
  for (const auto& id : {kRepairPrompt, kErcPrompt, kRcExpPrompt, kRcChaPrompt, kRcRelPrompt}) {
    if (!prompts_.contains(id)) throw ConfigError(std::string("missing prompt template ") + id);
  }
  for (const auto& [name, backend] : backends_) {
    clients_[name] = std::make_unique<JudgeClient>(backend, cfg_.retry, cache_, limiter_, stats_, sleeper_);
  }
}

JudgeClient& Evaluator::client(const std::string& backend_name) {
  auto it = clients_.find(backend_name);
  if (it == clients_.end()) throw ConfigError("unknown backend '" + backend_name + "'");
  return *it->second;
}

const GtStats& Evaluator::gt_stats(const Corpus& corpus) {
  // keyed by corpus content
  const std::string digest = corpus_digest(corpus, cfg_.taxonomy);
  if (!gt_ || gt_digest_ != digest) {
    gt_ = evaluate_gt(corpus, cfg_.divergence);
    gt_digest_ = digest;
  }
  return *gt_;
}

EvalResult Evaluator::run(const Corpus& corpus, const std::vector<PredictionRecord>& predictions) {
  const auto run_start = Clock::now();
  if (corpus.size() == 0) throw DataError("corpus is empty");
  if (predictions.empty()) throw DataError("no predictions to evaluate");
  check_predictions(corpus, predictions);

  const long requests0 = stats_->requests;
  const long hits0 = stats_->cache_hits;
  const long backend0 = stats_->backend_calls;
  const long remote0 = stats_->remote_calls;
  const long failures0 = stats_->failures;

  // Deterministic work order: sorted by sample_id, optionally a seeded subset.
  std::vector<const PredictionRecord*> preds;
  for (const auto& p : predictions) preds.push_back(&p);
  auto by_id = [](const PredictionRecord* a, const PredictionRecord* b) { return a->sample_id < b->sample_id; };
  std::sort(preds.begin(), preds.end(), by_id);
  if (cfg_.sample_limit && *cfg_.sample_limit < preds.size()) {
    std::mt19937_64 rng(cfg_.seed);
    std::shuffle(preds.begin(), preds.end(), rng);
    preds.resize(*cfg_.sample_limit);
    std::sort(preds.begin(), preds.end(), by_id);
  }

  std::vector<JudgeClient*> experts;
  for (const auto& e : cfg_.experts) experts.push_back(&client(e));
  std::vector<JudgeClient*> evaluators;
  for (const auto& e : cfg_.rc_evaluators) evaluators.push_back(&client(e));
  JudgeClient* repairer = cfg_.repair_backend ? &client(*cfg_.repair_backend) : nullptr;

  RepairOptions repair_opts;
  repair_opts.max_attempts = cfg_.repair_max_attempts;
  repair_opts.aliases = cfg_.key_aliases;
  repair_opts.sampling = cfg_.judge_sampling;
  PanelOptions panel_opts;
  panel_opts.passes = cfg_.passes;
  panel_opts.pass_sampling = cfg_.erc_pass_sampling;
  panel_opts.sampling = cfg_.judge_sampling;

  auto process = [&](const PredictionRecord& pred) {
    SampleWork w;
    w.corpus_index = *corpus.index_of(pred.sample_id);
    const DialogueSample& sample = corpus.at(w.corpus_index);

    auto t0 = Clock::now();
    if (pred.response) {
      w.format = FormatOutcome{FormatStatus::kValidDirect, pred.response, 0, "structured response supplied"};
    } else {
      w.format = format_response(pred.raw_output, repairer, prompts_, repair_opts);
    }
    w.format_seconds = seconds_since(t0);
    if (!w.format.response) return w;
    const MultimodalResponse& resp = *w.format.response;

    t0 = Clock::now();
    const auto seg = segment_utterances(resp.content, cfg_.delimiters);
    auto panel = run_panel(resp, seg, experts, cfg_.taxonomy, prompts_, panel_opts);
    w.erc_failed_calls = panel.failed_calls;
    w.erc_successful_calls = static_cast<int>(panel.results.size());
    w.erc_reprompts = panel.reprompts;
    w.erc_dropped_vote_sets = panel.dropped_vote_sets;
    if (panel.results.empty()) {
      w.erc_note = "no expert returned a recognition";
    } else {
      try {
        auto agg = aggregate(panel.results, cfg_.tau, cfg_.taxonomy.size());
        if (agg.complete()) {
          w.ec_included = true;
          w.emotions = std::move(agg);
        } else {
          w.erc_note = "a modality received no valid votes";
        }
      } catch (const ContractError& e) {
        w.erc_note = e.what();
      }
    }
    w.erc_seconds = seconds_since(t0);

    t0 = Clock::now();
    const std::string response_text = to_json(resp).dump(2);
    for (std::size_t m = 0; m < kRcMetrics.size(); ++m) {
      std::vector<std::string> sources = {resp.facial_expression, resp.body_movement, resp.speech_prompt,
                                          resp.content};
      for (auto& t : material_texts(sample, cfg_.rc_materials[m])) sources.push_back(std::move(t));
      std::map<std::string, std::string> vars = {
          {"role_name", sample.role.role_id},
          {"user_name", sample.role.user_name.empty() ? "the user" : sample.role.user_name},
          {"materials", render_materials(sample, cfg_.rc_materials[m])},
          {"history", render_history(sample)},
          {"user_input", sample.user_input.content},
          {"response", response_text},
          {"correction", ""},
      };
      const std::string prompt = prompts_.render(kRcPromptIds[m], vars);
      for (JudgeClient* ev : evaluators) {
        std::optional<metrics::RcVerdict> verdict;
        try {
          ++w.rc_calls;
          verdict = parse_rc_verdict(ev->call({JudgeKind::kRc, prompt, cfg_.judge_sampling, 1}), sources);
          if (!verdict) {
            vars["correction"] =
                "\nYour previous reply could not be read. Reply with only the JSON object "
                "{\"agree_evidence\": [...], \"disagree_evidence\": [...]} whose items are verbatim quotes.";
            ++w.rc_calls;
            verdict = parse_rc_verdict(
                ev->call({JudgeKind::kRc, prompts_.render(kRcPromptIds[m], vars), cfg_.judge_sampling, 1}), sources);
            vars["correction"].clear();
          }
        } catch (const TransportError& e) {
          ++w.rc_transport_failures;
          spdlog::debug("rc {} {} {}: {}", kRcMetrics[m], ev->name(), pred.sample_id, e.what());
        }
        if (!verdict) ++w.rc_unavailable;
        w.verdicts[m].push_back(std::move(verdict));
      }
    }
    w.rc_seconds = seconds_since(t0);
    return w;
  };

  std::vector<SampleWork> work(preds.size());
  {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
      for (;;) {
        if (stop) return;
        const std::size_t i = next++;
        if (i >= preds.size()) return;
        try {
          work[i] = process(*preds[i]);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          stop = true;
          return;
        }
      }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg_.concurrency), preds.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Single-threaded reduction in sample_id order.
  const auto metrics_start = Clock::now();
  EvalResult result;
  MetricReport& r = result.report;
  r.taxonomy_fingerprint = cfg_.taxonomy.fingerprint();
  for (auto k : kMetricKeys) r.values[std::string(k)] = std::nullopt;
  Tallies& t = r.tallies;
  t.total_predictions = static_cast<long>(work.size());

  long erc_calls_ok = 0;
  long erc_calls_failed = 0;
  long rc_calls = 0;
  long rc_transport = 0;
  double format_s = 0;
  double erc_s = 0;
  double rc_s = 0;

  std::vector<const SampleWork*> ec;
  for (const auto& w : work) {
    format_s += w.format_seconds;
    erc_s += w.erc_seconds;
    rc_s += w.rc_seconds;
    switch (w.format.status) {
      case FormatStatus::kValidDirect: ++t.valid_direct; break;
      case FormatStatus::kRepaired: ++t.repaired; break;
      case FormatStatus::kUnrepairable: ++t.dropped_format; break;
    }
    if (!w.format.response) continue;
    ++t.formatted;
    t.erc_failed_calls += w.erc_failed_calls;
    t.erc_reprompts += w.erc_reprompts;
    t.erc_dropped_vote_sets += w.erc_dropped_vote_sets;
    t.rc_unavailable += w.rc_unavailable;
    erc_calls_ok += w.erc_successful_calls;
    erc_calls_failed += w.erc_failed_calls;
    rc_calls += w.rc_calls;
    rc_transport += w.rc_transport_failures;
    if (w.ec_included) {
      ec.push_back(&w);
    } else {
      ++t.dropped_erc;
    }
  }
  if (erc_calls_failed > 0 && erc_calls_ok == 0) {
    throw TransportError("every ERC expert call failed; no recognition is available", cfg_.retry.max_attempts);
  }
  if (rc_calls > 0 && rc_transport == rc_calls) {
    throw TransportError("every RC evaluator call failed", cfg_.retry.max_attempts);
  }

  // MEC, lower and upper.
  {
    std::vector<metrics::MecSample> samples;
    for (const auto* w : ec) {
      samples.push_back({corpus.at(w->corpus_index).gt_emotions, w->emotions->final_labels(Modality::kFusion)});
    }
    r.denominators.mec = static_cast<long>(samples.size());
    if (!samples.empty()) {
      auto lower = metrics::mec(samples, cfg_.taxonomy, metrics::MecLevel::kLower, cfg_.mec_support);
      auto upper = metrics::mec(samples, cfg_.taxonomy, metrics::MecLevel::kUpper, cfg_.mec_support);
      r.values["mec.lower"] = lower.mec;
      r.values["mec.upper"] = upper.mec;
      r.per_class_lower = std::move(lower.classes);
      r.per_class_upper = std::move(upper.classes);
    }
  }

  // CEC: the four channels as raters over every utterance of the run.
  {
    metrics::RatingTable lower(kModalityCount);
    metrics::RatingTable upper(kModalityCount);
    long samples = 0;
    for (const auto* w : ec) {
      ++samples;
      for (std::size_t m = 0; m < kModalityCount; ++m) {
        for (const auto& cell : w->emotions->cells[m]) {
          if (cell.final_label == kAmbiguous) {
            lower[m].push_back(std::nullopt);
            upper[m].push_back(std::nullopt);
          } else {
            lower[m].push_back(static_cast<double>(cell.final_label));
            upper[m].push_back(static_cast<double>(static_cast<int>(cfg_.taxonomy.tendency(cell.final_label))));
          }
        }
      }
    }
    r.denominators.cec = samples;
    r.denominators.cec_columns = static_cast<long>(lower[0].size());
    auto alpha = [&](const metrics::RatingTable& table, const char* key) {
      if (table[0].empty()) return;
      try {
        auto a = metrics::krippendorff_alpha(table, metrics::AlphaMetric::kNominal);
        r.values[key] = a.alpha;
        if (a.degenerate) r.notes.push_back(std::string(key) + ": single category observed, alpha set to 1");
      } catch (const DataError& e) {
        r.notes.push_back(std::string(key) + ": " + e.what());
      }
    };
    alpha(lower, "cec.lower");
    alpha(upper, "cec.upper");
  }

  // ED per modality.
  {
    const std::array<std::pair<Modality, const char*>, 4> keys = {
        {{Modality::kFusion, "ed.all"}, {Modality::kSpeech, "ed.spe"}, {Modality::kFace, "ed.fac"},
         {Modality::kBody, "ed.bod"}}};
    long samples = 0;
    for ([[maybe_unused]] const auto* w : ec) ++samples;
    r.denominators.ed = samples;
    for (const auto& [m, key] : keys) {
      std::vector<metrics::EmotionDistribution> cells;
      for (const auto* w : ec) {
        for (const auto& c : w->emotions->of(m)) cells.push_back(c.distribution);
      }
      if (m == Modality::kFusion) r.denominators.ed_cells = static_cast<long>(cells.size());
      if (!cells.empty()) r.values[key] = metrics::emotional_discrepancy(cells);
    }
    for (const auto* w : ec) {
      for (const auto& c : w->emotions->of(Modality::kFusion)) {
        if (c.final_label == kAmbiguous) ++t.ambiguous_fusion_utterances;
      }
    }
  }

  // EDD and RCD against the ground-truth matrices of the whole corpus.
  {
    const GtStats& gt = gt_stats(corpus);
    std::vector<metrics::ResponseLabels> labels(corpus.size());
    long samples = 0;
    for (const auto* w : ec) {
      labels[w->corpus_index] = w->emotions->final_labels(Modality::kFusion);
      ++samples;
    }
    r.denominators.transitions = samples;
    auto [intra, inter] = role_matrices(role_dialogues(corpus, labels), cfg_.taxonomy.size());
    auto divergence = [&](const metrics::RoleMatrices& g, const metrics::RoleMatrices& a, const std::string& variant) {
      auto e = metrics::edd(g, a, cfg_.divergence);
      r.values["edd." + variant] = e.value;
      if (!e.roles_excluded.empty()) {
        std::string roles;
        for (const auto& x : e.roles_excluded) roles += (roles.empty() ? "" : ", ") + x;
        r.notes.push_back("edd." + variant + ": roles without transitions excluded: " + roles);
      }
      if (g.size() < 2) {
        r.notes.push_back("rcd." + variant + ": fewer than two roles");
        return;
      }
      auto d = metrics::rcd(g, a, cfg_.divergence);
      r.values["rcd." + variant] = d.rcd;
      r.cd[variant + ".gt"] = d.cd_gt.value;
      r.cd[variant + ".rpa"] = d.cd_rpa.value;
    };
    divergence(gt.intra, intra, "intra");
    divergence(gt.inter, inter, "inter");
  }

  // RC.
  for (std::size_t m = 0; m < kRcMetrics.size(); ++m) {
    const std::string metric(kRcMetrics[m]);
    std::vector<double> sample_scores;
    std::vector<std::vector<double>> per_eval(cfg_.rc_evaluators.size());
    for (const auto& w : work) {
      if (!w.format.response) continue;
      auto s = metrics::rc_score(w.verdicts[m]);
      for (std::size_t e = 0; e < s.per_evaluator.size(); ++e) {
        if (s.per_evaluator[e]) per_eval[e].push_back(*s.per_evaluator[e]);
      }
      if (s.score) {
        sample_scores.push_back(*s.score);
      } else {
        ++t.rc_dropped[m];
      }
    }
    r.values["rc." + metric] = mean_of(sample_scores);
    for (std::size_t e = 0; e < cfg_.rc_evaluators.size(); ++e) {
      r.rc_per_evaluator[metric][cfg_.rc_evaluators[e]] = mean_of(per_eval[e]);
    }
  }

  // Traces.
  for (const auto& w : work) {
    SampleTrace tr;
    tr.sample_id = corpus.at(w.corpus_index).sample_id;
    tr.format_status = w.format.status;
    tr.repair_attempts = w.format.repair_attempts;
    tr.ec_included = w.ec_included;
    tr.erc_note = w.erc_note;
    if (w.emotions) {
      for (auto id : w.emotions->final_labels(Modality::kFusion)) tr.fusion_labels.emplace_back(cfg_.taxonomy.name(id));
    }
    if (w.format.response) {
      for (std::size_t m = 0; m < 3; ++m) tr.rc_scores[m] = metrics::rc_score(w.verdicts[m]).score;
    }
    result.traces.push_back(std::move(tr));
  }
  const double metrics_s = seconds_since(metrics_start);

  const long requests = stats_->requests - requests0;
  const long hits = stats_->cache_hits - hits0;
  json prompt_versions = json::object();
  for (const auto& id : {kRepairPrompt, kErcPrompt, kRcExpPrompt, kRcChaPrompt, kRcRelPrompt}) {
    prompt_versions[id] = sha256_hex(prompts_.get(id));
  }
  result.manifest = {
      {"tool", {{"name", "rpeval"}, {"version", kToolVersion}}},
      {"config", cfg_.to_json()},
      {"inputs",
       {{"corpus_content_sha256", corpus_digest(corpus, cfg_.taxonomy)},
        {"predictions_content_sha256", predictions_digest(predictions)},
        {"evaluated_predictions", work.size()}}},
      {"taxonomy_fingerprint", cfg_.taxonomy.fingerprint()},
      {"prompts", prompt_versions},
      {"tallies", r.to_json()["tallies"]},
      {"denominators", r.to_json()["denominators"]},
      {"stage_seconds",
       {{"format", format_s}, {"erc", erc_s}, {"rc", rc_s}, {"metrics", metrics_s},
        {"wall", seconds_since(run_start)}}},
      {"calls",
       {{"requests", requests},
        {"cache_hits", hits},
        {"cache_hit_ratio", requests > 0 ? static_cast<double>(hits) / static_cast<double>(requests) : 0.0},
        {"backend_calls", stats_->backend_calls - backend0},
        {"remote_calls", stats_->remote_calls - remote0},
        {"failures", stats_->failures - failures0}}},
  };
  return result;
}

EvalResult evaluate(const RunConfig& cfg, std::map<std::string, std::shared_ptr<JudgeBackend>> overrides) {
  if (cfg.corpus_path.empty()) throw ConfigError("no corpus path given");
  if (cfg.predictions_path.empty()) throw ConfigError("no predictions path given");
  CorpusOptions copts;
  copts.delimiters = cfg.delimiters;
  copts.aliases = cfg.key_aliases;
  Corpus corpus = load_corpus(cfg.corpus_path, cfg.taxonomy, copts);
  auto preds = load_predictions(cfg.predictions_path, cfg.key_aliases);

  Evaluator ev(cfg, std::move(overrides));
  EvalResult result = ev.run(corpus, preds);
  result.manifest["inputs"]["corpus"] = {{"path", cfg.corpus_path.string()},
                                         {"sha256", sha256_file(cfg.corpus_path)}};
  result.manifest["inputs"]["predictions"] = {{"path", cfg.predictions_path.string()},
                                              {"sha256", sha256_file(cfg.predictions_path)}};
  if (!cfg.out_dir.empty()) {
    write_report(result.report, ReportFormat::kJson, cfg.out_dir);
    std::ofstream out(cfg.out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (cfg.out_dir / "manifest.json").string());
    out << result.manifest.dump(2) << "\n";
  }
  return result;
}

std::string generation_prompt(const DialogueSample& sample, const PromptLibrary& prompts) {
  return prompts.render(kGeneratePrompt, {{"role_name", sample.role.role_id},
                                          {"user_name", sample.role.user_name.empty() ? "the user" : sample.role.user_name},
                                          {"profile", sample.role.profile},
                                          {"previous_info", sample.previous_info},
                                          {"history", render_history(sample)},
                                          {"user_input", sample.user_input.content}});
}

std::vector<PredictionRecord> generate_predictions(const Corpus& corpus, JudgeClient& agent,
                                                   const PromptLibrary& prompts, const Sampling& sampling,
                                                   std::size_t* failures) {
  std::vector<PredictionRecord> out;
  std::size_t failed = 0;
  for (const auto& s : corpus.samples()) {
    PredictionRecord p;
    p.sample_id = s.sample_id;
    try {
      p.raw_output = agent.call({JudgeKind::kGenerate, generation_prompt(s, prompts), sampling, 1}).text;
    } catch (const TransportError& e) {
      ++failed;
      spdlog::warn("generate {}: {}", s.sample_id, e.what());
    }
    out.push_back(std::move(p));
  }
  if (failures) *failures = failed;
  return out;
}

// ---------------------------------------------------------------------------
// Human agreement

AgreementTable load_agreement_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  AgreementTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = trim_text(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim_text(cell));
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() < 2) throw DataError(path.string() + ":" + std::to_string(lineno) + ": rater with no values");
    table.raters.push_back(cells.front());
    std::vector<std::optional<std::string>> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const auto& v = cells[i];
      if (v.empty() || v == "NA" || v == "*" || v == ".") {
        row.emplace_back(std::nullopt);
      } else {
        row.emplace_back(v);
      }
    }
    if (!table.values.empty() && row.size() != table.values.front().size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(table.values.front().size()) + " values, got " + std::to_string(row.size()));
    }
    table.values.push_back(std::move(row));
  }
  return table;
}

metrics::AlphaResult agreement(metrics::AlphaMetric kind, const AgreementTable& table) {
  if (table.values.size() < 2) throw DataError("agreement needs at least two raters");
  metrics::RatingTable ratings;
  if (kind == metrics::AlphaMetric::kNominal) {
    std::map<std::string, double> codes;
    for (const auto& row : table.values) {
      for (const auto& v : row) {
        if (v) codes.emplace(*v, 0.0);
      }
    }
    double next = 0;
    for (auto& [value, code] : codes) code = next++;
    for (const auto& row : table.values) {
      auto& out = ratings.emplace_back();
      for (const auto& v : row) out.push_back(v ? std::optional<double>(codes.at(*v)) : std::nullopt);
    }
  } else {
    for (const auto& row : table.values) {
      auto& out = ratings.emplace_back();
      for (const auto& v : row) {
        if (!v) {
          out.emplace_back(std::nullopt);
          continue;
        }
        std::size_t used = 0;
        double x = 0;
        try {
          x = std::stod(*v, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != v->size()) throw DataError("value '" + *v + "' is not numeric");
        out.emplace_back(x);
      }
    }
  }
  for (const auto& row : ratings) {
    if (row.size() != ratings.front().size()) throw DataError("agreement table rows differ in length");
  }
  return metrics::krippendorff_alpha(ratings, kind);
}

}  // namespace rpeval
