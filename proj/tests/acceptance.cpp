// One line per acceptance criterion: PASS/FAIL, number, name, wall time, detail.
// Exit status is nonzero when any criterion fails.

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "oracles.hpp"
#include "rpeval/erc.hpp"
#include "rpeval/errors.hpp"
#include "rpeval/judges.hpp"
#include "rpeval/metrics/entropy.hpp"
#include "rpeval/metrics/hellinger.hpp"
#include "rpeval/metrics/krippendorff.hpp"
#include "rpeval/metrics/mec.hpp"
#include "rpeval/metrics/rc_score.hpp"
#include "rpeval/metrics/transition.hpp"
#include "rpeval/mock_backends.hpp"
#include "rpeval/pipeline.hpp"
#include "synthetic.hpp"

using namespace rpeval;
using namespace rpeval::metrics;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

int failures = 0;

void criterion(int number, const char* name, double budget_sec, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.fail(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.pass && budget_sec > 0 && secs > budget_sec) o.fail("over time budget");
  if (!o.pass) ++failures;
  std::printf("%s %2d %-34s %7.3fs  %s\n", o.pass ? "PASS" : "FAIL", number, name, secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// 1 ------------------------------------------------------------------------

Outcome rc_mapping() {
  Outcome o;
  // The six columns, written out.
  struct Column {
    bool agree, disagree;
    int cmp;  // sign(n_agree - n_disagree), only meaningful when both flags are set
    int score;
  };
  const Column table[] = {{false, false, 0, 0}, {true, false, 0, 5}, {true, true, 1, 4},
                          {true, true, 0, 3},   {true, true, -1, 2}, {false, true, 0, 1}};
  long combos = 0;
  for (int na = 0; na <= 5; ++na) {
    for (int nd = 0; nd <= 5; ++nd) {
      std::vector<std::string> agree(na), disagree(nd);
      for (int i = 0; i < na; ++i) agree[i] = "agree span " + std::to_string(i);
      for (int i = 0; i < nd; ++i) disagree[i] = "disagree span " + std::to_string(i);
      int expect = -1;
      for (const auto& c : table) {
        const bool both = c.agree && c.disagree;
        if (c.agree == (na > 0) && c.disagree == (nd > 0) && (!both || c.cmp == (na > nd) - (na < nd))) expect = c.score;
      }
      const auto direct = rc_map_score(RcVerdict::from_evidence(agree, disagree));
      json reply = {{"agree_evidence", agree}, {"disagree_evidence", disagree}};
      const auto parsed = parse_rc_verdict(JudgeReply{reply.dump(), Provenance::kMock, {}, 1});
      const int got = direct.value_or(0);
      const int via_text = parsed ? rc_map_score(*parsed).value_or(0) : -1;
      if (got != expect || via_text != expect || oracle::rc_table(na > 0, nd > 0, na, nd) != expect) {
        o.fail("mismatch at agree=" + std::to_string(na) + " disagree=" + std::to_string(nd));
      }
      ++combos;
    }
  }
  o.detail = std::to_string(combos) + " evidence-count combinations";
  return o;
}

// 2 ------------------------------------------------------------------------

Outcome hellinger_kernel() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 2 + rng() % 168;
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = u(rng) < 0.3 ? 0.0 : u(rng);
      q[k] = u(rng) < 0.3 ? 0.0 : u(rng);
      sp += p[k];
      sq += q[k];
    }
    if (sp == 0) p[0] = sp = 1;
    if (sq == 0) q[n - 1] = sq = 1;
    for (auto& x : p) x /= sp;
    for (auto& x : q) x /= sq;
    worst = std::max(worst, std::abs(hellinger(p, q) - oracle::bhattacharyya_hellinger(p, q)));
    if (hellinger(p, p) != 0.0) o.fail("identity is not exactly 0");
    std::vector<double> a(n, 0.0), b(n, 0.0);
    a[0] = 1;
    b[n - 1] = 1;
    if (hellinger(a, b) != 1.0) o.fail("disjoint support is not exactly 1");
  }
  if (worst > 1e-12) o.fail(fmt("max deviation %.3g", worst));
  if (o.pass) o.detail = fmt("10000 pairs, max |H - oracle| = %.3g", worst);
  return o;
}

// 3 ------------------------------------------------------------------------

Outcome alpha_kernel() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int tables = 0;
  double worst = 0;
  while (tables < 1000) {
    const int raters = 2 + rng() % 5;
    const int units = 1 + rng() % 20;
    const int cats = 2 + rng() % 5;
    const double missing = u(rng) * 0.4;
    RatingTable t(raters, std::vector<std::optional<double>>(units));
    for (auto& row : t) {
      for (auto& v : row) {
        if (u(rng) >= missing) v = static_cast<double>(1 + rng() % cats);
      }
    }
    bool pairable = false;
    for (int k = 0; k < units; ++k) {
      int n = 0;
      for (const auto& row : t) n += row[k].has_value();
      pairable |= n >= 2;
    }
    if (!pairable) continue;
    ++tables;
    worst = std::max(worst, std::abs(krippendorff_alpha(t, AlphaMetric::kNominal).alpha -
                                     oracle::alpha_by_pairs(t, oracle::Delta::kNominal)));
    worst = std::max(worst, std::abs(krippendorff_alpha(t, AlphaMetric::kOrdinal).alpha -
                                     oracle::alpha_by_pairs(t, oracle::Delta::kOrdinal)));

    RatingTable same(raters, std::vector<std::optional<double>>(units));
    for (int k = 0; k < units; ++k) {
      const double v = static_cast<double>(1 + k % cats);
      for (auto& row : same) row[k] = v;
    }
    if (krippendorff_alpha(same, AlphaMetric::kNominal).alpha != 1.0 ||
        krippendorff_alpha(same, AlphaMetric::kOrdinal).alpha != 1.0) {
      o.fail("perfect agreement is not exactly 1");
    }
  }
  if (worst > 1e-9) o.fail(fmt("max deviation %.3g", worst));
  if (o.pass) o.detail = fmt("1000 tables x {nominal, ordinal}, max deviation %.3g", worst);
  return o;
}

// 4 ------------------------------------------------------------------------

Outcome tau_voting() {
  Outcome o;
  long splits = 0;
  long selected = 0;
  std::vector<int> counts(13, 0);
  std::function<void(int, int)> rec = [&](int label, int left) {
    if (label == 12) {
      counts[12] = left;
      EmotionDistribution d(13);
      for (int l = 0; l < 13; ++l) {
        for (int k = 0; k < counts[l]; ++k) d.add(l);
      }
      EmotionId expect = kAmbiguous;
      for (int l = 0; l < 13; ++l) {
        if (counts[l] >= 7) expect = l;
      }
      if (select_label(d, 0.7) != expect) o.fail("split " + std::to_string(splits) + " disagrees");
      selected += expect != kAmbiguous;
      ++splits;
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[label] = c;
      rec(label + 1, left - c);
    }
  };
  rec(0, 10);
  if (splits != 646646) o.fail("enumerated " + std::to_string(splits) + " splits");

  // The same rule through the panel aggregator.
  auto panel = [](int first, int second) {
    std::vector<ErcResult> rs;
    for (int i = 0; i < 10; ++i) {
      ErcResult r;
      r.expert_id = "e" + std::to_string(i / 2);
      r.pass_index = 1 + i % 2;
      for (auto& l : r.labels) l = std::vector<EmotionId>{i < first ? 0 : (i < first + second ? 6 : 7)};
      rs.push_back(r);
    }
    return aggregate(rs, 0.7, 13).of(Modality::kFusion)[0].final_label;
  };
  if (panel(7, 3) != 0) o.fail("7/10 not selected");
  if (panel(6, 4) != kAmbiguous) o.fail("6/10 not ambiguous");
  if (panel(6, 2) != kAmbiguous) o.fail("6/2/2 not ambiguous");
  if (o.pass) o.detail = std::to_string(splits) + " splits, " + std::to_string(selected) + " with a selected label";
  return o;
}

// 5 ------------------------------------------------------------------------

Outcome mec_rule() {
  Outcome o;
  std::mt19937_64 rng(55);
  const auto tax = EmotionTaxonomy::standard();
  for (int c = 0; c < 500; ++c) {
    std::vector<MecSample> samples(1 + rng() % 20);
    std::vector<std::vector<int>> gt, pd;
    for (auto& s : samples) {
      const int n = 1 + rng() % 4;
      for (int u = 0; u < n; ++u) {
        s.gt.push_back(rng() % 13);
        s.predicted.push_back(rng() % 8 == 0 ? kAmbiguous : static_cast<int>(rng() % 13));
      }
      gt.push_back(s.gt);
      pd.push_back(s.predicted);
    }
    for (auto level : {MecLevel::kLower, MecLevel::kUpper}) {
      const bool upper = level == MecLevel::kUpper;
      const auto report = mec(samples, tax, level);
      const auto expect = upper ? oracle::confusion_counts(gt, pd, 3, +[](int id) {
        return static_cast<int>(EmotionTaxonomy::standard().tendency(id));
      })
                                : oracle::confusion_counts(gt, pd, 13);
      for (std::size_t k = 0; k < expect.size(); ++k) {
        const auto& a = report.classes[k];
        const auto& b = expect[k];
        if (a.tp != b.tp || a.fp != b.fp || a.fn != b.fn || a.tn != b.tn || a.support != b.support) {
          o.fail("cell counts differ in corpus " + std::to_string(c));
        }
      }
      if (std::abs(report.mec - oracle::weighted_f1(expect)) > 1e-12) o.fail("weighted F1 differs");
      if (!(report.mec >= 0.0 && report.mec <= 1.0)) o.fail("MEC out of [0,1]");
    }
    auto perfect = samples;
    for (auto& s : perfect) s.predicted = s.gt;
    if (mec(perfect, tax, MecLevel::kLower).mec != 1.0 || mec(perfect, tax, MecLevel::kUpper).mec != 1.0) {
      o.fail("perfect prediction is not 1");
    }
  }
  if (o.pass) o.detail = "500 corpora, both levels, cells and F1 match";
  return o;
}

// 6 ------------------------------------------------------------------------

Outcome transitions() {
  Outcome o;
  std::mt19937_64 rng(66);
  long breaks = 0;
  for (int i = 0; i < 500; ++i) {
    std::vector<std::optional<std::vector<int>>> d(1 + rng() % 6);
    for (auto& r : d) {
      if (rng() % 7 == 0) continue;
      std::vector<int> labels(1 + rng() % 5);
      for (auto& l : labels) {
        l = rng() % 6 == 0 ? kAmbiguous : static_cast<int>(rng() % 13);
        breaks += l == kAmbiguous;
      }
      r = labels;
    }
    std::vector<oracle::Pair> intra, inter;
    oracle::enumerate_pairs(d, intra, inter);
    const auto m = build_transition_matrices({DialogueLabels(d.begin(), d.end())});
    TransitionMatrix ei(TransitionVariant::kIntra), ee(TransitionVariant::kInter);
    for (auto p : intra) ei.add(p.from, p.to);
    for (auto p : inter) ee.add(p.from, p.to);
    if (!(m.intra == ei) || !(m.inter == ee)) o.fail("dialogue " + std::to_string(i) + " differs");
  }
  if (o.pass) o.detail = "500 dialogues, " + std::to_string(breaks) + " ambiguous labels";
  return o;
}

// 7 ------------------------------------------------------------------------

Outcome gt_fixed_point() {
  Outcome o;
  synth::CorpusSpec spec;
  spec.roles = 3;
  spec.samples = 30;
  auto corpus = synth::make_corpus(spec);
  auto res = Evaluator(synth::echo_config()).run(corpus, synth::ground_truth_predictions(corpus));
  const auto& r = res.report;
  auto exact = [&](const char* key, double v) {
    const auto got = r.get(key);
    if (!got || *got != v) o.fail(std::string(key) + " = " + (got ? fmt("%.17g", *got) : "n/a"));
  };
  for (auto key : {"mec.lower", "mec.upper", "cec.lower", "cec.upper"}) exact(key, 1.0);
  for (auto key : {"edd.intra", "edd.inter", "rcd.intra", "rcd.inter", "ed.all", "ed.spe", "ed.fac", "ed.bod"}) {
    exact(key, 0.0);
  }
  if (r.tallies.dropped_format != 0 || r.tallies.dropped_erc != 0) o.fail("unexpected drops");
  if (o.pass) o.detail = "3 roles, 30 samples";
  return o;
}

// 8 ------------------------------------------------------------------------

Outcome fuzz_bounds() {
  Outcome o;
  const auto tax = EmotionTaxonomy::standard();
  long transport = 0;
  long samples = 0;
  for (int run = 0; run < 1000 && o.pass; ++run) {
    std::mt19937_64 rng(run);
    synth::CorpusSpec spec;
    spec.roles = 1 + rng() % 3;
    spec.samples = 3 + rng() % 8;
    spec.seed = run + 1;
    auto corpus = synth::make_corpus(spec, tax);
    auto preds = synth::ground_truth_predictions(corpus);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      switch (rng() % 5) {
        case 0: preds[i].raw_output = synth::garbage_output(static_cast<int>(i)); break;
        case 1: preds[i].raw_output = to_json(corpus.at(rng() % corpus.size()).ground_truth).dump(); break;
        default: break;
      }
    }
    samples += static_cast<long>(preds.size());
    auto cfg = synth::echo_config();
    cfg.concurrency = 1;
    cfg.seed = run;
    Evaluator ev(cfg,
                 {{"echo-a", synth::make_adversarial_backend("echo-a", tax, run)},
                  {"echo-b", synth::make_adversarial_backend("echo-b", tax, run + 7919)}},
                 [](std::chrono::milliseconds) {});
    MetricReport r;
    try {
      r = ev.run(corpus, preds).report;
    } catch (const TransportError&) {
      ++transport;
      continue;
    }
    auto within = [&](const char* key, double lo, double hi) {
      if (auto v = r.get(key); v && !(*v >= lo && *v <= hi)) o.fail(std::string(key) + fmt(" = %.17g in run %g", *v, run));
    };
    for (auto key : {"edd.intra", "edd.inter", "ed.all", "ed.spe", "ed.fac", "ed.bod", "mec.lower", "mec.upper"}) {
      within(key, 0.0, 1.0);
    }
    within("rcd.intra", -1.0, 1.0);
    within("rcd.inter", -1.0, 1.0);
    for (auto key : {"rc.exp", "rc.cha", "rc.rel"}) within(key, 1.0, 5.0);
    if (r.tallies.formatted + r.tallies.dropped_format != r.tallies.total_predictions) o.fail("tallies do not add up");
  }
  if (o.pass) {
    o.detail = "1000 runs, " + std::to_string(samples) + " predictions, " + std::to_string(transport) +
               " runs with every judge call failing";
  }
  return o;
}

// 9 ------------------------------------------------------------------------

Outcome cache_transparency() {
  Outcome o;
  const auto tax = EmotionTaxonomy::standard();
  auto echo = make_echo_backend("loopback", tax);
  httplib::Server server;
  std::atomic<long> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const auto body = json::parse(req.body);
    const std::string prompt = body["messages"][0]["content"];
    JudgeKind kind = JudgeKind::kGenerate;
    if (prompt.find("## Utterances") != std::string::npos) {
      kind = JudgeKind::kErc;
    } else if (prompt.find("## Raw output") != std::string::npos) {
      kind = JudgeKind::kRepair;
    } else if (prompt.find("## Reference material") != std::string::npos) {
      kind = JudgeKind::kRc;
    }
    const std::string text = echo->complete({kind, prompt, {}, 1});
    res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump(),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  synth::TempDir dir;
  auto cfg = RunConfig::load(std::filesystem::path(RPEVAL_SOURCE_DIR) / "assets" / "toy" / "config.json");
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  for (auto& b : cfg.backends) {
    b.type = "http";
    b.http = {b.name, endpoint, "toy-judge", "", 0.0, 30};
  }
  cfg.cache_dir = dir / "cache";
  cfg.out_dir = dir / "run1";
  const auto first = evaluate(cfg);
  const long first_hits = hits;
  cfg.out_dir = dir / "run2";
  const auto second = evaluate(cfg);
  server.stop();
  th.join();

  const auto a = synth::read_file(dir / "run1" / "report.json");
  const auto b = synth::read_file(dir / "run2" / "report.json");
  if (a != b) o.fail("report.json differs between runs");
  if (first_hits == 0 || first.manifest["calls"]["remote_calls"].get<long>() == 0) o.fail("first run made no calls");
  if (second.manifest["calls"]["remote_calls"].get<long>() != 0 || hits != first_hits) {
    o.fail("second run reached the server");
  }
  if (o.pass) {
    o.detail = std::to_string(first_hits) + " remote calls, then 0; " + std::to_string(a.size()) +
               " identical report bytes";
  }
  return o;
}

// 10 -----------------------------------------------------------------------

Outcome exclusion_accounting() {
  Outcome o;
  synth::CorpusSpec spec;
  spec.samples = 20;
  auto corpus = synth::make_corpus(spec);
  const long n = static_cast<long>(corpus.size());
  for (int k : {0, 1, 3}) {
    auto preds = synth::ground_truth_predictions(corpus);
    for (int i = 0; i < k; ++i) preds[i * 5].raw_output = synth::garbage_output(i);
    const auto r = Evaluator(synth::echo_config()).run(corpus, preds).report;
    const auto& d = r.denominators;
    if (r.tallies.dropped_format != k) o.fail("k=" + std::to_string(k) + ": dropped_format wrong");
    if (d.mec != n - k || d.cec != n - k || d.ed != n - k || d.transitions != n - k) {
      o.fail("k=" + std::to_string(k) + ": denominators are not n-k");
    }
  }
  if (o.pass) o.detail = "n=20, k in {0,1,3}";
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  criterion(1, "rc mapping table", 1, rc_mapping);
  criterion(2, "hellinger kernel", 5, hellinger_kernel);
  criterion(3, "krippendorff alpha", 10, alpha_kernel);
  criterion(4, "tau voting", 5, tau_voting);
  criterion(5, "mec confusion rule", 10, mec_rule);
  criterion(6, "transition decomposition", 10, transitions);
  criterion(7, "ground-truth fixed point", 30, gt_fixed_point);
  criterion(8, "fuzzed metric bounds", 60, fuzz_bounds);
  criterion(9, "determinism and cache", 0, cache_transparency);
  criterion(10, "exclusion accounting", 0, exclusion_accounting);
  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
