#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "rpeval/errors.hpp"
#include "rpeval/pipeline.hpp"
#include "rpeval/report.hpp"

using namespace rpeval;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : RunConfig::load(path); }

void print_summary(const MetricReport& r) { std::cout << render_table(r); }

int run_evaluate(const std::string& config, const std::string& corpus, const std::string& predictions,
                 const std::string& out, const std::string& cache, int concurrency) {
  RunConfig cfg = RunConfig::load(config);
  if (!corpus.empty()) cfg.corpus_path = corpus;
  if (!predictions.empty()) cfg.predictions_path = predictions;
  if (!out.empty()) cfg.out_dir = out;
  if (!cache.empty()) cfg.cache_dir = cache;
  if (concurrency > 0) cfg.concurrency = concurrency;
  if (cfg.out_dir.empty()) throw ConfigError("no output directory (--out or out_dir)");
  auto result = evaluate(cfg);
  print_summary(result.report);
  const auto& calls = result.manifest["calls"];
  spdlog::info("wrote {} (requests {}, cache hits {}, remote calls {})", (cfg.out_dir / "report.json").string(),
               calls["requests"].get<long>(), calls["cache_hits"].get<long>(), calls["remote_calls"].get<long>());
  return 0;
}

int run_gt_stats(const std::string& config, const std::string& corpus_path, const std::string& out) {
  RunConfig cfg = config_or_default(config);
  if (!corpus_path.empty()) cfg.corpus_path = corpus_path;
  if (cfg.corpus_path.empty()) throw ConfigError("no corpus (--corpus or config corpus)");
  CorpusOptions copts{cfg.delimiters, cfg.key_aliases};
  const Corpus corpus = load_corpus(cfg.corpus_path, cfg.taxonomy, copts);
  const std::string text = evaluate_gt(corpus, cfg.divergence).to_json(cfg.taxonomy).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + out);
    f << text;
  }
  return 0;
}

int run_agreement(const std::string& kind, const std::string& table_path) {
  metrics::AlphaMetric metric;
  if (kind == "nominal") {
    metric = metrics::AlphaMetric::kNominal;
  } else if (kind == "ordinal") {
    metric = metrics::AlphaMetric::kOrdinal;
  } else if (kind == "interval") {
    metric = metrics::AlphaMetric::kInterval;
  } else {
    throw ConfigError("--kind must be nominal, ordinal or interval");
  }
  const auto table = load_agreement_table(table_path);
  const auto a = agreement(metric, table);
  json j = {{"kind", kind},
            {"alpha", a.alpha},
            {"degenerate", a.degenerate},
            {"raters", table.raters.size()},
            {"pairable_units", a.pairable_units},
            {"pairable_values", a.pairable_values}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_generate(const std::string& config, const std::string& backend_name, const std::string& corpus_path,
                 const std::string& out) {
  RunConfig cfg = RunConfig::load(config);
  if (!corpus_path.empty()) cfg.corpus_path = corpus_path;
  if (cfg.corpus_path.empty()) throw ConfigError("no corpus (--corpus or config corpus)");
  const BackendSpec* spec = nullptr;
  for (const auto& b : cfg.backends) {
    if (b.name == backend_name) spec = &b;
  }
  if (!spec) throw ConfigError("backend '" + backend_name + "' is not declared in the config");
  CorpusOptions copts{cfg.delimiters, cfg.key_aliases};
  const Corpus corpus = load_corpus(cfg.corpus_path, cfg.taxonomy, copts);
  const PromptLibrary prompts =
      cfg.prompts_dir.empty() ? PromptLibrary() : PromptLibrary::with_overrides(cfg.prompts_dir);
  JudgeClient agent(make_backend(*spec, cfg.taxonomy), cfg.retry, std::make_shared<ReplyCache>(cfg.cache_dir));
  std::size_t failures = 0;
  auto preds = generate_predictions(corpus, agent, prompts, cfg.rpa_sampling, &failures);
  if (failures == preds.size()) throw TransportError("every generation call failed", cfg.retry.max_attempts);
  write_predictions(out, preds);
  spdlog::info("wrote {} predictions to {} ({} failed)", preds.size(), out, failures);
  return 0;
}

int run_report(const std::string& in, const std::string& format, const std::string& out) {
  const auto report = load_report(in);
  const auto fmt = parse_report_format(format);
  if (out.empty()) {
    switch (fmt) {
      case ReportFormat::kJson: std::cout << render_json(report); break;
      case ReportFormat::kTable: std::cout << render_table(report); break;
      case ReportFormat::kCsv: std::cout << render_csv(report); break;
    }
    return 0;
  }
  for (const auto& p : write_report(report, fmt, out)) spdlog::info("wrote {}", p.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("rpeval"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Emotion and role consistency evaluation for multimodal role-playing agents"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config, corpus, predictions, out, cache, backend, kind, table, format = "json", in;
  int concurrency = 0;

  auto* eval = app.add_subcommand("evaluate", "Score a predictions file against a corpus");
  eval->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", corpus, "Corpus (JSON lines); overrides the config");
  eval->add_option("--predictions", predictions, "Predictions (JSON lines); overrides the config");
  eval->add_option("--out", out, "Output directory for report.json and manifest.json");
  eval->add_option("--cache", cache, "Judge reply cache directory; overrides the config");
  eval->add_option("--concurrency", concurrency, "In-flight judge call limit; overrides the config");

  auto* gt = app.add_subcommand("gt-stats", "Ground-truth transition matrices and character discrepancy");
  gt->add_option("--config", config, "Run config (JSON)")->check(CLI::ExistingFile);
  gt->add_option("--corpus", corpus, "Corpus (JSON lines)");
  gt->add_option("--out", out, "Write JSON here instead of stdout");

  auto* agree = app.add_subcommand("agreement", "Krippendorff's alpha over a rater table");
  agree->add_option("--kind", kind, "nominal, ordinal or interval")->required();
  agree->add_option("--table", table, "CSV: rater,v1,v2,...")->required()->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("generate", "Collect agent replies into a predictions file");
  gen->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--backend", backend, "Backend declared in the config")->required();
  gen->add_option("--corpus", corpus, "Corpus (JSON lines); overrides the config");
  gen->add_option("--out", out, "Predictions file to write")->required();

  auto* rep = app.add_subcommand("report", "Render a report.json as json, md or csv");
  rep->add_option("--in", in, "report.json")->required()->check(CLI::ExistingFile);
  rep->add_option("--format", format, "json, md or csv");
  rep->add_option("--out", out, "Output directory; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*eval) return run_evaluate(config, corpus, predictions, out, cache, concurrency);
    if (*gt) return run_gt_stats(config, corpus, out);
    if (*agree) return run_agreement(kind, table);
    if (*gen) return run_generate(config, backend, corpus, out);
    if (*rep) return run_report(in, format, out);
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const DataError& e) {
    spdlog::error("data: {}", e.what());
    return 3;
  } catch (const TransportError& e) {
    spdlog::error("backend: {} (after {} attempt(s))", e.what(), e.attempts());
    return 4;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
