#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpeval/metrics/mec.hpp"

namespace rpeval {

/// The fifteen headline columns, in table order.
inline constexpr std::array<std::string_view, 15> kMetricKeys = {
    "mec.lower", "mec.upper", "cec.lower", "cec.upper", "edd.intra", "edd.inter", "rcd.intra", "rcd.inter",
    "ed.all",    "ed.spe",    "ed.fac",    "ed.bod",    "rc.exp",    "rc.cha",    "rc.rel"};

inline constexpr std::array<std::string_view, 3> kRcMetrics = {"exp", "cha", "rel"};

struct Tallies {
  long total_predictions = 0;
  long formatted = 0;
  long valid_direct = 0;
  long repaired = 0;
  long dropped_format = 0;
  long dropped_erc = 0;
  long erc_failed_calls = 0;
  long erc_dropped_vote_sets = 0;
  long erc_reprompts = 0;
  long ambiguous_fusion_utterances = 0;
  std::array<long, 3> rc_dropped{};  ///< per exp/cha/rel: samples with no usable verdict
  long rc_unavailable = 0;           ///< individual verdicts lost to parse or transport failure

  bool operator==(const Tallies&) const = default;
};

/// Number of evaluated samples each EC metric family actually consumed.
struct Denominators {
  long mec = 0;
  long cec = 0;
  long ed = 0;
  long transitions = 0;  ///< samples feeding the agent-side transition matrices
  long cec_columns = 0;
  long ed_cells = 0;

  bool operator==(const Denominators&) const = default;
};

struct MetricReport {
  std::string taxonomy_fingerprint;
  /// Every key of kMetricKeys; std::nullopt when undefined for the run.
  std::map<std::string, std::optional<double>> values;
  std::vector<metrics::ClassScore> per_class_lower;
  std::vector<metrics::ClassScore> per_class_upper;
  /// metric (exp/cha/rel) -> evaluator -> mean mapped score
  std::map<std::string, std::map<std::string, std::optional<double>>> rc_per_evaluator;
  /// intra.gt, intra.rpa, inter.gt, inter.rpa
  std::map<std::string, std::optional<double>> cd;
  Tallies tallies;
  Denominators denominators;
  std::vector<std::string> notes;

  std::optional<double> get(std::string_view key) const;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

enum class ReportFormat { kJson, kTable, kCsv };

ReportFormat parse_report_format(std::string_view s);

/// Pretty-printed JSON, keys sorted, trailing newline.
std::string render_json(const MetricReport& r);
/// Markdown: the fifteen-column table followed by the per-emotion breakdown.
std::string render_table(const MetricReport& r);
/// Header of the fifteen keys and one row of values (%.17g, empty for n/a).
std::string render_csv(const MetricReport& r);
/// label,level,support,tp,fp,fn,tn,precision,recall,f1
std::string render_per_class_csv(const MetricReport& r);

/// Reads render_csv() output back into key -> value.
std::map<std::string, std::optional<double>> parse_metrics_csv(std::string_view text);

/// Writes report.json, report.md, or metrics.csv + per_class.csv into
/// `out_dir` and returns the paths. Throws DataError when unwritable.
std::vector<std::filesystem::path> write_report(const MetricReport& r, ReportFormat format,
                                                const std::filesystem::path& out_dir);

/// Loads a report.json.
MetricReport load_report(const std::filesystem::path& path);

}  // namespace rpeval
