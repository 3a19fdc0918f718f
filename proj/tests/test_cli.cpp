#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "rpeval/corpus.hpp"
#include "synthetic.hpp"

using nlohmann::json;

namespace {

int run(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(RPEVAL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Workspace {
  synth::TempDir dir;
  Workspace() {
    synth::CorpusSpec spec;
    spec.samples = 8;
    auto corpus = synth::make_corpus(spec);
    rpeval::write_corpus(dir / "corpus.jsonl", corpus, rpeval::EmotionTaxonomy::standard());
    rpeval::write_predictions(dir / "preds.jsonl", synth::ground_truth_predictions(corpus));
    json cfg = {{"corpus", "corpus.jsonl"},
                {"predictions", "preds.jsonl"},
                {"backends", {{"a", {{"type", "echo"}}}, {"b", {{"type", "echo"}}}}},
                {"experts", {"a", "b"}},
                {"rc_evaluators", {"a"}},
                {"repair_backend", "a"}};
    std::ofstream(dir / "config.json") << cfg.dump(2);
    json down = cfg;
    down["backends"]["a"] = {{"type", "http"}, {"endpoint", "http://127.0.0.1:1/v1/chat/completions"}, {"model", "m"}};
    down["backends"]["b"] = down["backends"]["a"];
    down["retry"] = {{"max_attempts", 1}, {"base_delay_ms", 0}};
    std::ofstream(dir / "down.json") << down.dump(2);
  }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("evaluate and report") {
  Workspace ws;
  CHECK(run("evaluate --config " + ws.p("config.json") + " --out " + ws.p("out"), ws.dir / "log") == 0);
  CHECK(std::filesystem::exists(ws.dir / "out" / "report.json"));
  CHECK(std::filesystem::exists(ws.dir / "out" / "manifest.json"));
  CHECK(synth::read_file(ws.dir / "log").find("mec.lower") != std::string::npos);

  CHECK(run("report --in " + ws.p("out/report.json") + " --format csv --out " + ws.p("csv"), ws.dir / "log") == 0);
  CHECK(std::filesystem::exists(ws.dir / "csv" / "metrics.csv"));
  CHECK(run("report --in " + ws.p("out/report.json") + " --format md", ws.dir / "log") == 0);
  CHECK(synth::read_file(ws.dir / "log").find("### Per-emotion (lower)") != std::string::npos);
  CHECK(run("report --in " + ws.p("out/report.json") + " --format xml", ws.dir / "log") == 2);
}

TEST_CASE("gt-stats, agreement and generate") {
  Workspace ws;
  CHECK(run("gt-stats --corpus " + ws.p("corpus.jsonl") + " --out " + ws.p("gt.json"), ws.dir / "log") == 0);
  auto gt = json::parse(synth::read_file(ws.dir / "gt.json"));
  CHECK(gt.contains("cd"));

  std::ofstream(ws.dir / "table.csv") << "r1,5,1\nr2,4,2\nr3,5,1\n";
  CHECK(run("agreement --kind ordinal --table " + ws.p("table.csv"), ws.dir / "log") == 0);
  auto a = json::parse(synth::read_file(ws.dir / "log"));
  CHECK(a["alpha"].get<double>() == doctest::Approx(0.7727272727272727));
  CHECK(run("agreement --kind cardinal --table " + ws.p("table.csv"), ws.dir / "log") == 2);

  CHECK(run("generate --config " + ws.p("config.json") + " --backend a --out " + ws.p("gen.jsonl"), ws.dir / "log") ==
        0);
  CHECK(rpeval::load_predictions(ws.dir / "gen.jsonl").size() == 8);
}

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(run("", ws.dir / "log") == 2);
  CHECK(run("evaluate", ws.dir / "log") == 2);
  CHECK(run("evaluate --config " + ws.p("missing.json") + " --out " + ws.p("o"), ws.dir / "log") == 2);

  std::ofstream(ws.dir / "bad.jsonl") << "{not json\n";
  CHECK(run("evaluate --config " + ws.p("config.json") + " --corpus " + ws.p("bad.jsonl") + " --out " + ws.p("o"),
            ws.dir / "log") == 3);

  CHECK(run("evaluate --config " + ws.p("down.json") + " --out " + ws.p("o"), ws.dir / "log") == 4);
  CHECK(run("--help", ws.dir / "log") == 0);
}
