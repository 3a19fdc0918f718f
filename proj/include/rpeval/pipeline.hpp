#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpeval/corpus.hpp"
#include "rpeval/erc.hpp"
#include "rpeval/formatter.hpp"
#include "rpeval/judges.hpp"
#include "rpeval/metrics/krippendorff.hpp"
#include "rpeval/metrics/mec.hpp"
#include "rpeval/metrics/transition.hpp"
#include "rpeval/prompts.hpp"
#include "rpeval/report.hpp"
#include "rpeval/taxonomy.hpp"

namespace rpeval {

/// Judge backend declaration from the run config.
///   {"type": "http", "endpoint": ..., "model": ..., "api_key_env": ..., "rate_limit_per_sec": ...}
///   {"type": "fixtures", "dir": ...}
///   {"type": "echo"}
struct BackendSpec {
  std::string name;
  std::string type;
  HttpBackendConfig http;
  std::filesystem::path fixtures_dir;
};

/// Instantiates a backend from its declaration.
std::shared_ptr<JudgeBackend> make_backend(const BackendSpec& spec, const EmotionTaxonomy& taxonomy);

enum class RcMaterial { kProfile, kPreviousInfo };

struct RunConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path predictions_path;
  std::filesystem::path out_dir;
  std::filesystem::path cache_dir;    ///< empty: in-memory cache for this process only
  std::filesystem::path prompts_dir;  ///< optional template overrides

  EmotionTaxonomy taxonomy = EmotionTaxonomy::standard();
  std::vector<std::string> delimiters = default_delimiters();
  KeyAliases key_aliases = default_key_aliases();

  double tau = 0.7;
  int passes = 2;
  std::vector<Sampling> erc_pass_sampling;
  Sampling judge_sampling{};
  Sampling rpa_sampling{0.7, 0.95, 1024};

  std::vector<BackendSpec> backends;
  std::vector<std::string> experts;
  std::vector<std::string> rc_evaluators;
  std::optional<std::string> repair_backend;
  int repair_max_attempts = 2;

  int concurrency = 4;
  RetryPolicy retry{};

  metrics::DivergenceOptions divergence{};
  metrics::SupportMode mec_support = metrics::SupportMode::kSamples;
  /// Reference material given to the exp / cha / rel judges.
  std::array<std::vector<RcMaterial>, 3> rc_materials = {std::vector<RcMaterial>{RcMaterial::kPreviousInfo},
                                                         std::vector<RcMaterial>{RcMaterial::kProfile},
                                                         std::vector<RcMaterial>{RcMaterial::kPreviousInfo}};

  std::uint64_t seed = 0;
  std::optional<std::size_t> sample_limit;  ///< evaluate a seeded random subset of predictions

  /// Relative paths in `j` resolve against `base_dir`. Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Ground-truth transition statistics, independent of any agent.
struct GtStats {
  metrics::RoleMatrices intra;
  metrics::RoleMatrices inter;
  metrics::CdResult cd_intra;
  metrics::CdResult cd_inter;

  nlohmann::json to_json(const EmotionTaxonomy& taxonomy) const;
};

/// Builds per-role intra/inter matrices from a corpus's gt_emotions.
GtStats evaluate_gt(const Corpus& corpus, const metrics::DivergenceOptions& opts = {});

/// Per-role fusion-label dialogues. `labels[i]` are the labels of corpus
/// sample i, or std::nullopt when the sample is not part of the run.
std::map<std::string, std::vector<metrics::DialogueLabels>> role_dialogues(
    const Corpus& corpus, const std::vector<metrics::ResponseLabels>& labels);

/// What happened to one prediction, for drill-down.
struct SampleTrace {
  std::string sample_id;
  FormatStatus format_status = FormatStatus::kUnrepairable;
  int repair_attempts = 0;
  bool ec_included = false;
  std::string erc_note;
  std::vector<std::string> fusion_labels;
  std::array<std::optional<double>, 3> rc_scores;
};

struct EvalResult {
  MetricReport report;
  nlohmann::json manifest;
  std::vector<SampleTrace> traces;  ///< sorted by sample_id
};

/// Runs format -> ERC panel -> metrics over one corpus and prediction set.
///
/// Backends are built from the config; entries in `overrides` replace (or
/// add) backends by name, which is how tests inject scripted judges.
class Evaluator {
 public:
  explicit Evaluator(RunConfig cfg, std::map<std::string, std::shared_ptr<JudgeBackend>> overrides = {},
                     Sleeper sleeper = real_sleeper());

  EvalResult run(const Corpus& corpus, const std::vector<PredictionRecord>& predictions);

  /// GT statistics, computed once per corpus and reused across runs.
  const GtStats& gt_stats(const Corpus& corpus);

  const RunConfig& config() const noexcept { return cfg_; }
  const CallStats& stats() const noexcept { return *stats_; }

 private:
  JudgeClient& client(const std::string& backend_name);

  RunConfig cfg_;
  PromptLibrary prompts_;
  std::shared_ptr<ReplyCache> cache_;
  std::shared_ptr<ConcurrencyLimiter> limiter_;
  std::shared_ptr<CallStats> stats_;
  Sleeper sleeper_;
  std::map<std::string, std::shared_ptr<JudgeBackend>> backends_;
  std::map<std::string, std::unique_ptr<JudgeClient>> clients_;
  std::string gt_digest_;
  std::optional<GtStats> gt_;
};

/// File-based evaluation: loads the config's corpus and predictions, runs the
/// Evaluator and writes report.json and manifest.json into cfg.out_dir.
EvalResult evaluate(const RunConfig& cfg, std::map<std::string, std::shared_ptr<JudgeBackend>> overrides = {});

/// Prompt asking a role-playing agent for the next response of `sample`.
std::string generation_prompt(const DialogueSample& sample, const PromptLibrary& prompts);

/// Calls the agent once per corpus sample and keeps its raw replies, so the
/// evaluator only ever reads files. Transport failures leave an empty
/// raw_output (scored as unrepairable) and are counted in `failures`.
std::vector<PredictionRecord> generate_predictions(const Corpus& corpus, JudgeClient& agent,
                                                   const PromptLibrary& prompts, const Sampling& sampling,
                                                   std::size_t* failures = nullptr);

// ---------------------------------------------------------------------------
// Human agreement

/// raters x units; std::nullopt marks a missing entry.
struct AgreementTable {
  std::vector<std::string> raters;
  std::vector<std::vector<std::optional<std::string>>> values;
};

/// One rater per line: `rater,v1,v2,...`. Empty cells, NA, "*" and "." are
/// missing. Lines starting with '#' are skipped.
AgreementTable load_agreement_table(const std::filesystem::path& path);

/// Krippendorff's alpha over a rating table. Nominal tables compare values as
/// strings; ordinal tables must hold numbers. Throws DataError with fewer
/// than two raters, non-numeric ordinal values, or no pairable unit.
metrics::AlphaResult agreement(metrics::AlphaMetric kind, const AgreementTable& table);

}  // namespace rpeval
