#include <doctest.h>

#include "rpeval/digest.hpp"
#include "rpeval/errors.hpp"
#include "rpeval/taxonomy.hpp"

using namespace rpeval;

TEST_CASE("standard taxonomy has thirteen labels and the default tendencies") {
  const auto t = EmotionTaxonomy::standard();
  CHECK(t.size() == 13);
  CHECK(t.tendency_of("happy") == Tendency::kPositive);
  CHECK(t.tendency_of("neutral") == Tendency::kNeutral);
  CHECK(t.tendency_of("depress") == Tendency::kNegative);
  CHECK(t.tendency_of("astonished") == Tendency::kNegative);
  CHECK(t.tendency_of("ambiguous") == Tendency::kAmbiguous);
  CHECK_THROWS_AS(t.tendency_of("ecstatic"), DataError);
  CHECK(t.name(kAmbiguous) == "ambiguous");
  CHECK(t.id_of("ambiguous") == kAmbiguous);
  CHECK(t.id_of("fear") == 7);
  CHECK_FALSE(t.find("ambiguous").has_value());
}

TEST_CASE("fingerprint is the digest of the newline-joined labels") {
  const auto t = EmotionTaxonomy::standard();
  std::string joined;
  for (const auto& l : t.labels()) joined += l + "\n";
  CHECK(t.fingerprint() == sha256_hex(joined));
  CHECK(t.fingerprint().size() == 64);
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("taxonomy construction rejects invalid label sets") {
  auto base = EmotionTaxonomy::standard();
  std::map<std::string, Tendency> tend;
  for (std::size_t i = 0; i < base.size(); ++i) tend[base.labels()[i]] = base.tendency(static_cast<EmotionId>(i));

  auto twelve = base.labels();
  twelve.pop_back();
  CHECK_THROWS_AS(EmotionTaxonomy(twelve, tend), ConfigError);

  auto dup = base.labels();
  dup[1] = dup[0];
  CHECK_THROWS_AS(EmotionTaxonomy(dup, tend), ConfigError);

  auto reserved = base.labels();
  reserved[12] = "ambiguous";
  auto t2 = tend;
  t2.erase("negative-other");
  t2["ambiguous"] = Tendency::kNegative;
  CHECK_THROWS_AS(EmotionTaxonomy(reserved, t2), ConfigError);

  auto missing = tend;
  missing.erase("fear");
  CHECK_THROWS_AS(EmotionTaxonomy(base.labels(), missing), ConfigError);
}

TEST_CASE("taxonomy from_json overrides tendencies and round-trips") {
  auto t = EmotionTaxonomy::from_json({{"tendencies", {{"astonished", "positive"}}}});
  CHECK(t.tendency_of("astonished") == Tendency::kPositive);
  CHECK(t.tendency_of("fear") == Tendency::kNegative);
  auto again = EmotionTaxonomy::from_json(t.to_json());
  CHECK(again.labels() == t.labels());
  CHECK(again.tendency_of("astonished") == Tendency::kPositive);
  CHECK(again.fingerprint() == t.fingerprint());
  CHECK_THROWS_AS(EmotionTaxonomy::from_json({{"tendencies", {{"fear", "sideways"}}}}), ConfigError);
}
