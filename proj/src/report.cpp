#include "rpeval/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rpeval/errors.hpp"

namespace rpeval {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json class_json(const metrics::ClassScore& c) {
  return {{"label", c.name},         {"support", c.support}, {"tp", c.tp},
          {"fp", c.fp},              {"fn", c.fn},           {"tn", c.tn},
          {"precision", c.precision}, {"recall", c.recall},  {"f1", c.f1}};
}

metrics::ClassScore class_from(const json& j) {
  metrics::ClassScore c;
  c.name = j.at("label").get<std::string>();
  c.support = j.at("support").get<long>();
  c.tp = j.at("tp").get<long>();
  c.fp = j.at("fp").get<long>();
  c.fn = j.at("fn").get<long>();
  c.tn = j.at("tn").get<long>();
  c.precision = j.at("precision").get<double>();
  c.recall = j.at("recall").get<double>();
  c.f1 = j.at("f1").get<double>();
  return c;
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed4(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

std::optional<double> MetricReport::get(std::string_view key) const {
  auto it = values.find(std::string(key));
  if (it == values.end()) return std::nullopt;
  return it->second;
}

json MetricReport::to_json() const {
  json j = json::object();
  for (auto key : kMetricKeys) j[std::string(key)] = opt(get(key));
  j["taxonomy_fingerprint"] = taxonomy_fingerprint;
  json lower = json::array();
  for (const auto& c : per_class_lower) lower.push_back(class_json(c));
  json upper = json::array();
  for (const auto& c : per_class_upper) upper.push_back(class_json(c));
  j["per_class"] = {{"lower", lower}, {"upper", upper}};
  json rc = json::object();
  for (const auto& [metric, evals] : rc_per_evaluator) {
    rc[metric] = json::object();
    for (const auto& [name, v] : evals) rc[metric][name] = opt(v);
  }
  j["rc_per_evaluator"] = rc;
  json cdj = json::object();
  for (const auto& [k, v] : cd) cdj[k] = opt(v);
  j["cd"] = cdj;
  j["tallies"] = {{"total_predictions", tallies.total_predictions},
                  {"formatted", tallies.formatted},
                  {"valid_direct", tallies.valid_direct},
                  {"repaired", tallies.repaired},
                  {"dropped_format", tallies.dropped_format},
                  {"dropped_erc", tallies.dropped_erc},
                  {"erc_failed_calls", tallies.erc_failed_calls},
                  {"erc_dropped_vote_sets", tallies.erc_dropped_vote_sets},
                  {"erc_reprompts", tallies.erc_reprompts},
                  {"ambiguous_fusion_utterances", tallies.ambiguous_fusion_utterances},
                  {"rc_dropped",
                   {{"exp", tallies.rc_dropped[0]}, {"cha", tallies.rc_dropped[1]}, {"rel", tallies.rc_dropped[2]}}},
                  {"rc_unavailable", tallies.rc_unavailable}};
  j["denominators"] = {{"mec", denominators.mec},
                       {"cec", denominators.cec},
                       {"ed", denominators.ed},
                       {"transitions", denominators.transitions},
                       {"cec_columns", denominators.cec_columns},
                       {"ed_cells", denominators.ed_cells}};
  j["notes"] = notes;
  return j;
}

MetricReport MetricReport::from_json(const json& j) {
  MetricReport r;
  try {
    for (auto key : kMetricKeys) r.values[std::string(key)] = opt_from(j.at(std::string(key)));
    r.taxonomy_fingerprint = j.value("taxonomy_fingerprint", "");
    if (j.contains("per_class")) {
      const json lower = j["per_class"].value("lower", json::array());
      const json upper = j["per_class"].value("upper", json::array());
      for (const auto& c : lower) r.per_class_lower.push_back(class_from(c));
      for (const auto& c : upper) r.per_class_upper.push_back(class_from(c));
    }
    const json rc = j.value("rc_per_evaluator", json::object());
    for (const auto& [metric, evals] : rc.items()) {
      for (const auto& [name, v] : evals.items()) r.rc_per_evaluator[metric][name] = opt_from(v);
    }
    const json cd = j.value("cd", json::object());
    for (const auto& [k, v] : cd.items()) r.cd[k] = opt_from(v);
    if (j.contains("tallies")) {
      const auto& t = j["tallies"];
      r.tallies.total_predictions = t.value("total_predictions", 0L);
      r.tallies.formatted = t.value("formatted", 0L);
      r.tallies.valid_direct = t.value("valid_direct", 0L);
      r.tallies.repaired = t.value("repaired", 0L);
      r.tallies.dropped_format = t.value("dropped_format", 0L);
      r.tallies.dropped_erc = t.value("dropped_erc", 0L);
      r.tallies.erc_failed_calls = t.value("erc_failed_calls", 0L);
      r.tallies.erc_dropped_vote_sets = t.value("erc_dropped_vote_sets", 0L);
      r.tallies.erc_reprompts = t.value("erc_reprompts", 0L);
      r.tallies.ambiguous_fusion_utterances = t.value("ambiguous_fusion_utterances", 0L);
      if (t.contains("rc_dropped")) {
        for (std::size_t i = 0; i < kRcMetrics.size(); ++i) {
          r.tallies.rc_dropped[i] = t["rc_dropped"].value(std::string(kRcMetrics[i]), 0L);
        }
      }
      r.tallies.rc_unavailable = t.value("rc_unavailable", 0L);
    }
    if (j.contains("denominators")) {
      const auto& d = j["denominators"];
      r.denominators.mec = d.value("mec", 0L);
      r.denominators.cec = d.value("cec", 0L);
      r.denominators.ed = d.value("ed", 0L);
      r.denominators.transitions = d.value("transitions", 0L);
      r.denominators.cec_columns = d.value("cec_columns", 0L);
      r.denominators.ed_cells = d.value("ed_cells", 0L);
    }
    r.notes = j.value("notes", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "md" || s == "table") return ReportFormat::kTable;
  if (s == "csv") return ReportFormat::kCsv;
  throw ConfigError("unknown report format '" + std::string(s) + "' (expected json, md or csv)");
}

std::string render_json(const MetricReport& r) { return r.to_json().dump(2) + "\n"; }

std::string render_table(const MetricReport& r) {
  std::ostringstream out;
  out << "|";
  for (auto k : kMetricKeys) out << " " << k << " |";
  out << "\n|";
  for (std::size_t i = 0; i < kMetricKeys.size(); ++i) out << "---|";
  out << "\n|";
  for (auto k : kMetricKeys) out << " " << fixed4(r.get(k)) << " |";
  out << "\n\n";

  auto breakdown = [&](const char* title, const std::vector<metrics::ClassScore>& classes) {
    out << "### " << title << "\n\n";
    out << "| label | support | precision | recall | f1 |\n|---|---|---|---|---|\n";
    for (const auto& c : classes) {
      out << "| " << c.name << " | " << c.support << " | " << fixed4(c.precision) << " | " << fixed4(c.recall) << " | "
          << fixed4(c.f1) << " |\n";
    }
    out << "\n";
  };
  breakdown("Per-emotion (lower)", r.per_class_lower);
  breakdown("Per-tendency (upper)", r.per_class_upper);

  const auto& t = r.tallies;
  out << "predictions " << t.total_predictions << ", formatted " << t.formatted << " (repaired " << t.repaired
      << "), dropped_format " << t.dropped_format << ", dropped_erc " << t.dropped_erc << ", rc_dropped exp/cha/rel "
      << t.rc_dropped[0] << "/" << t.rc_dropped[1] << "/" << t.rc_dropped[2] << "\n";
  return out.str();
}

std::string render_csv(const MetricReport& r) {
  std::string header;
  std::string row;
  for (std::size_t i = 0; i < kMetricKeys.size(); ++i) {
    if (i) {
      header += ',';
      row += ',';
    }
    header += kMetricKeys[i];
    if (auto v = r.get(kMetricKeys[i])) row += g17(*v);
  }
  return header + "\n" + row + "\n";
}

std::string render_per_class_csv(const MetricReport& r) {
  std::string out = "label,level,support,tp,fp,fn,tn,precision,recall,f1\n";
  auto emit = [&](const std::vector<metrics::ClassScore>& classes, const char* level) {
    for (const auto& c : classes) {
      out += c.name + "," + level + "," + std::to_string(c.support) + "," + std::to_string(c.tp) + "," +
             std::to_string(c.fp) + "," + std::to_string(c.fn) + "," + std::to_string(c.tn) + "," + g17(c.precision) +
             "," + g17(c.recall) + "," + g17(c.f1) + "\n";
    }
  };
  emit(r.per_class_lower, "lower");
  emit(r.per_class_upper, "upper");
  return out;
}

std::map<std::string, std::optional<double>> parse_metrics_csv(std::string_view text) {
  auto split = [](std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  const auto nl = text.find('\n');
  if (nl == std::string_view::npos) throw DataError("metrics csv: missing value row");
  auto header = split(text.substr(0, nl));
  std::string_view rest = text.substr(nl + 1);
  if (rest.ends_with('\n')) rest.remove_suffix(1);
  auto values = split(rest);
  if (header.size() != values.size()) throw DataError("metrics csv: header and row differ in width");
  std::map<std::string, std::optional<double>> out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (values[i].empty()) {
      out[header[i]] = std::nullopt;
    } else {
      try {
        out[header[i]] = std::stod(values[i]);
      } catch (const std::exception&) {
        throw DataError("metrics csv: bad number '" + values[i] + "'");
      }
    }
  }
  return out;
}

std::vector<std::filesystem::path> write_report(const MetricReport& r, ReportFormat format,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  switch (format) {
    case ReportFormat::kJson: files.emplace_back(out_dir / "report.json", render_json(r)); break;
    case ReportFormat::kTable: files.emplace_back(out_dir / "report.md", render_table(r)); break;
    case ReportFormat::kCsv:
      files.emplace_back(out_dir / "metrics.csv", render_csv(r));
      files.emplace_back(out_dir / "per_class.csv", render_per_class_csv(r));
      break;
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [path, text] : files) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
    written.push_back(path);
  }
  return written;
}

MetricReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path.string() + " is not valid JSON");
  return MetricReport::from_json(j);
}

}  // namespace rpeval
