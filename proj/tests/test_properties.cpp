#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rpeval/corpus.hpp"
#include "rpeval/errors.hpp"
#include "rpeval/metrics/entropy.hpp"
#include "rpeval/metrics/hellinger.hpp"
#include "rpeval/metrics/krippendorff.hpp"
#include "rpeval/metrics/mec.hpp"
#include "rpeval/metrics/rc_score.hpp"
#include "rpeval/metrics/transition.hpp"
#include "synthetic.hpp"

using namespace rpeval;
using namespace rpeval::metrics;

namespace {

std::vector<double> random_distribution(std::mt19937& rng, std::size_t n, double zero_rate = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double sum = 0;
  for (auto& x : p) {
    x = u(rng) < zero_rate ? 0.0 : u(rng);
    sum += x;
  }
  if (sum == 0) {
    p[0] = 1;
    sum = 1;
  }
  for (auto& x : p) x /= sum;
  return p;
}

RatingTable random_table(std::mt19937& rng, int raters, int units, int categories, double missing) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RatingTable t(raters, std::vector<std::optional<double>>(units));
  for (auto& row : t) {
    for (auto& v : row) {
      if (u(rng) >= missing) v = static_cast<double>(rng() % categories);
    }
  }
  return t;
}

bool pairable(const RatingTable& t) {
  for (std::size_t u = 0; u < t[0].size(); ++u) {
    int n = 0;
    for (const auto& row : t) n += row[u].has_value();
    if (n >= 2) return true;
  }
  return false;
}

std::vector<std::optional<std::vector<int>>> random_dialogue(std::mt19937& rng) {
  std::vector<std::optional<std::vector<int>>> d(1 + rng() % 5);
  for (auto& r : d) {
    if (rng() % 6 == 0) continue;
    std::vector<int> labels(1 + rng() % 4);
    for (auto& l : labels) l = rng() % 8 == 0 ? kAmbiguous : static_cast<int>(rng() % 13);
    r = labels;
  }
  return d;
}

RoleMatrices random_roles(std::mt19937& rng, int roles) {
  RoleMatrices out;
  for (int r = 0; r < roles; ++r) {
    TransitionMatrix m;
    const int n = 1 + rng() % 30;
    for (int i = 0; i < n; ++i) m.add(rng() % 13, rng() % 13);
    out["r" + std::to_string(r)] = m;
  }
  return out;
}

}  // namespace

TEST_CASE("hellinger: metric axioms and oracle agreement") {
  std::mt19937 rng(1);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng() % 20;
    auto p = random_distribution(rng, n);
    auto q = random_distribution(rng, n);
    auto r = random_distribution(rng, n);
    const double pq = hellinger(p, q);
    CHECK(pq >= 0.0);
    CHECK(pq <= 1.0);
    CHECK(pq == doctest::Approx(hellinger(q, p)).epsilon(1e-15));
    CHECK(hellinger(p, p) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(pq <= hellinger(p, r) + hellinger(r, q) + 1e-12);
    CHECK(std::abs(pq - oracle::bhattacharyya_hellinger(p, q)) < 1e-12);
  }
}

TEST_CASE("transitions: counts match the literal pair enumeration") {
  std::mt19937 rng(2);
  for (int i = 0; i < 300; ++i) {
    std::vector<DialogueLabels> dialogues;
    std::vector<oracle::Pair> intra;
    std::vector<oracle::Pair> inter;
    const int nd = 1 + rng() % 4;
    for (int k = 0; k < nd; ++k) {
      auto d = random_dialogue(rng);
      oracle::enumerate_pairs(d, intra, inter);
      dialogues.push_back(DialogueLabels(d.begin(), d.end()));
    }
    auto m = build_transition_matrices(dialogues);
    TransitionMatrix expect_intra(TransitionVariant::kIntra);
    for (auto p : intra) expect_intra.add(p.from, p.to);
    TransitionMatrix expect_inter(TransitionVariant::kInter);
    for (auto p : inter) expect_inter.add(p.from, p.to);
    CHECK(m.intra == expect_intra);
    CHECK(m.inter == expect_inter);
  }
}

TEST_CASE("edd and rcd vanish when the agent matches ground truth") {
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    auto gt = random_roles(rng, 2 + rng() % 4);
    auto e = edd(gt, gt);
    REQUIRE(e.value);
    CHECK(*e.value == doctest::Approx(0.0).epsilon(1e-7));
    auto r = rcd(gt, gt);
    REQUIRE(r.rcd);
    CHECK(*r.rcd == 0.0);
    auto other = random_roles(rng, static_cast<int>(gt.size()));
    auto e2 = edd(gt, other);
    CHECK(*e2.value >= 0.0);
    CHECK(*e2.value <= 1.0);
  }
}

TEST_CASE("alpha: oracle agreement, rater permutation, unit duplication") {
  std::mt19937 rng(4);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    auto t = random_table(rng, 2 + rng() % 4, 1 + rng() % 12, 2 + rng() % 4, 0.2);
    if (!pairable(t)) continue;
    ++checked;
    for (auto [metric, delta] : {std::pair{AlphaMetric::kNominal, oracle::Delta::kNominal},
                                 std::pair{AlphaMetric::kOrdinal, oracle::Delta::kOrdinal}}) {
      const auto a = krippendorff_alpha(t, metric);
      CHECK(std::abs(a.alpha - oracle::alpha_by_pairs(t, delta)) < 1e-9);

      auto permuted = t;
      std::shuffle(permuted.begin(), permuted.end(), rng);
      CHECK(krippendorff_alpha(permuted, metric).alpha == doctest::Approx(a.alpha).epsilon(1e-12));

      if (a.degenerate) continue;
      // Every unit doubled.
      auto doubled = t;
      for (auto& row : doubled) row.insert(row.end(), row.begin(), row.end());
      const double n = static_cast<double>(a.pairable_values);
      const double expect = 1.0 - (2 * n - 1) / (2 * (n - 1)) * (1.0 - a.alpha);
      CHECK(krippendorff_alpha(doubled, metric).alpha == doctest::Approx(expect).epsilon(1e-9));
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("mec: oracle agreement and level relations") {
  std::mt19937 rng(5);
  const auto tax = EmotionTaxonomy::standard();
  auto tendency_of = [](int id) { return static_cast<int>(EmotionTaxonomy::standard().tendency(id)); };
  for (int i = 0; i < 200; ++i) {
    std::vector<MecSample> samples(1 + rng() % 15);
    std::vector<std::vector<int>> gt;
    std::vector<std::vector<int>> pd;
    for (auto& s : samples) {
      const std::size_t n = 1 + rng() % 4;
      for (std::size_t u = 0; u < n; ++u) {
        s.gt.push_back(rng() % 13);
        s.predicted.push_back(rng() % 7 == 0 ? kAmbiguous : static_cast<int>(rng() % 13));
      }
      gt.push_back(s.gt);
      pd.push_back(s.predicted);
    }
    const auto lower = mec(samples, tax, MecLevel::kLower);
    CHECK(std::abs(lower.mec - oracle::weighted_f1(oracle::confusion_counts(gt, pd, 13))) < 1e-12);
    const auto upper = mec(samples, tax, MecLevel::kUpper);
    CHECK(std::abs(upper.mec - oracle::weighted_f1(oracle::confusion_counts(gt, pd, 3, +[](int id) {
                     return static_cast<int>(EmotionTaxonomy::standard().tendency(id));
                   }))) < 1e-12);
    CHECK(lower.mec >= 0.0);
    CHECK(lower.mec <= 1.0);

    // An injective relabelling leaves the kernel unchanged.
    std::vector<std::string> names(tax.labels().begin(), tax.labels().end());
    const auto identity = mec_kernel(samples, names, [](EmotionId id) { return id; });
    CHECK(identity.mec == doctest::Approx(lower.mec).epsilon(1e-15));

    // Swapping labels within a tendency cannot hurt the upper level.
    auto swapped = samples;
    for (auto& s : swapped) {
      s.predicted = s.gt;
      for (auto& l : s.predicted) {
        std::vector<int> same;
        for (int k = 0; k < 13; ++k) {
          if (tendency_of(k) == tendency_of(l)) same.push_back(k);
        }
        l = same[rng() % same.size()];
      }
    }
    CHECK(mec(swapped, tax, MecLevel::kUpper).mec == 1.0);
    CHECK(mec(swapped, tax, MecLevel::kUpper).mec >= mec(swapped, tax, MecLevel::kLower).mec);
  }
}

TEST_CASE("ed: bounded and equal to the entropy oracle") {
  std::mt19937 rng(6);
  for (int i = 0; i < 300; ++i) {
    EmotionDistribution d(13);
    const int votes = 1 + rng() % 12;
    for (int v = 0; v < votes; ++v) d.add(rng() % 13);
    const double h = normalized_entropy(d);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0 + 1e-15);
    CHECK(std::abs(h - oracle::normalized_entropy(d.counts)) < 1e-12);
  }
}

TEST_CASE("rc mapping is total over evidence counts") {
  for (int na = 0; na <= 6; ++na) {
    for (int nd = 0; nd <= 6; ++nd) {
      auto v = RcVerdict::from_evidence(std::vector<std::string>(na, "a"), std::vector<std::string>(nd, "d"));
      auto s = rc_map_score(v);
      CHECK(s.has_value() == (na + nd > 0));
      if (s) {
        CHECK(*s >= 1);
        CHECK(*s <= 5);
      }
      CHECK(s.value_or(0) == oracle::rc_table(na > 0, nd > 0, na, nd));
    }
  }
}

TEST_CASE("segmentation is idempotent on its own output") {
  std::mt19937 rng(7);
  const std::vector<std::string> pieces = {"a", "bc", " ", "。", "，", "！", "？", "；", "…", ".", ",", "!",
                                           "?", ";", "好", "\n", "\t", "\xE3\x80\x80", "x y"};
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    const int n = rng() % 12;
    for (int k = 0; k < n; ++k) s += pieces[rng() % pieces.size()];
    const auto seg = segment_utterances(s);
    REQUIRE(seg.count() >= 1);
    for (const auto& u : seg.utterances) {
      const auto again = segment_utterances(u);
      REQUIRE(again.count() == 1);
      CHECK(again.utterances[0] == u);
    }
  }
}

TEST_CASE("corpus round-trip preserves every sample") {
  const auto tax = EmotionTaxonomy::standard();
  for (bool explicit_ids : {false, true}) {
    synth::CorpusSpec spec;
    spec.samples = 40;
    spec.seed = 9;
    spec.explicit_dialogue_ids = explicit_ids;
    auto corpus = synth::make_corpus(spec, tax);
    synth::TempDir dir;
    write_corpus(dir / "c.jsonl", corpus, tax);
    auto back = load_corpus(dir / "c.jsonl", tax);
    CHECK(back.samples() == corpus.samples());
  }
}

TEST_CASE("dialogue grouping: inferred and explicit ids agree on synthetic corpora") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    synth::CorpusSpec spec;
    spec.seed = seed;
    spec.roles = 1 + seed % 3;
    auto inferred = synth::make_corpus(spec);
    spec.explicit_dialogue_ids = true;
    auto explicit_ = synth::make_corpus(spec);
    CHECK(group_dialogues(inferred.samples()) == group_dialogues(explicit_.samples()));
  }
}
