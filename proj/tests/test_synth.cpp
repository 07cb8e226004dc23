#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "ddatr/synth.hpp"

using namespace ddatr;

namespace {

CorpusConfig small_cfg(std::uint64_t seed = 0, std::size_t patients = 40,
                       std::size_t visits = 2, double fraction = 0.5) {
  CorpusConfig cfg;
  cfg.seed = seed;
  cfg.n_patients = patients;
  cfg.visits_per_patient = visits;
  cfg.prior_fraction = fraction;
  return cfg;
}

}  // namespace

TEST_CASE("zero prior fraction yields no prior fields at all") {
  const auto onto = SyntheticOntology::standard();
  auto records = generate_corpus(small_cfg(1, 20, 2, 0.0), onto);
  REQUIRE(records.size() == 40);
  for (const auto& r : records) {
    CHECK_FALSE(r.has_prior);
    CHECK(r.prior_image.empty());
    CHECK(r.prior_report.empty());
  }
}

TEST_CASE("same seed produces a byte-identical corpus") {
  const auto onto = SyntheticOntology::standard();
  auto a = generate_corpus(small_cfg(7), onto);
  auto b = generate_corpus(small_cfg(7), onto);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].report == b[i].report);
    CHECK(a[i].has_prior == b[i].has_prior);
  }
  auto c = generate_corpus(small_cfg(8), onto);
  CHECK(a[0].image != c[0].image);
}

TEST_CASE("requested prior fraction is hit exactly") {
  const auto onto = SyntheticOntology::standard();
  auto records = generate_corpus(small_cfg(3, 500, 2, 0.5), onto);
  std::size_t with_prior = 0;
  for (const auto& r : records) with_prior += r.has_prior;
  CHECK(records.size() == 1000);
  CHECK(with_prior == 500);

  auto records2 = generate_corpus(small_cfg(3, 100, 3, 0.3), onto);
  std::size_t wp2 = 0;
  for (const auto& r : records2) wp2 += r.has_prior;
  CHECK(wp2 == 90);  // round(0.3 * 300)
}

TEST_CASE("unachievable prior fraction is rejected") {
  const auto onto = SyntheticOntology::standard();
  CHECK_THROWS_AS(generate_corpus(small_cfg(0, 10, 2, 1.0), onto), std::invalid_argument);
  CHECK_THROWS_AS(generate_corpus(small_cfg(0, 10, 2, 1.5), onto), std::invalid_argument);
}

TEST_CASE("label round-trip: rule_label recovers the gold labels on every record") {
  const auto onto = SyntheticOntology::standard();
  auto records = generate_corpus(small_cfg(11, 100, 2, 0.5), onto);
  for (const auto& r : records) {
    CAPTURE(r.report);
    CHECK(rule_label(onto, r.report) == r.labels_cur);
  }
}

TEST_CASE("rule_label handles the canonical cue sentences") {
  const auto onto = SyntheticOntology::standard();
  const int cons = onto.finding_index("consolidation");
  const int eff = onto.finding_index("effusion");
  REQUIRE(cons >= 0);
  REQUIRE(eff >= 0);

  auto l1 = rule_label(onto, "no focal consolidation .");
  CHECK(l1[cons] == Attribute::kNegative);

  auto l2 = rule_label(onto, "possible small effusion .");
  CHECK(l2[eff] == Attribute::kUncertain);

  auto l3 = rule_label(onto, "effusion has increased .");
  CHECK(l3[eff] == Attribute::kPositive);

  auto l4 = rule_label(onto, "effusion has resolved .");
  CHECK(l4[eff] == Attribute::kNegative);

  auto l5 = rule_label(onto, "completely unrelated text .");
  for (auto a : l5) CHECK(a == Attribute::kBlank);
}

TEST_CASE("progression consistency holds corpus-wide") {
  const auto onto = SyntheticOntology::standard();
  auto records = generate_corpus(small_cfg(13, 150, 2, 0.5), onto);
  for (const auto& r : records) {
    if (!r.has_prior) continue;
    for (std::size_t d = 0; d < kNumFindings; ++d) {
      CAPTURE(r.study_id);
      CAPTURE(d);
      switch (r.progressions[d]) {
        case Progression::kNew:
          CHECK(r.labels_prior[d] != Attribute::kPositive);
          CHECK(r.labels_cur[d] == Attribute::kPositive);
          break;
        case Progression::kResolved:
          // map_attributes semantics: positive side includes uncertain
          CHECK((r.labels_prior[d] == Attribute::kPositive ||
                 r.labels_prior[d] == Attribute::kUncertain));
          CHECK((r.labels_cur[d] == Attribute::kNegative ||
                 r.labels_cur[d] == Attribute::kBlank));
          break;
        case Progression::kIncreased:
        case Progression::kDecreased:
          CHECK(r.labels_cur[d] == Attribute::kPositive);
          break;
        case Progression::kUnchanged:
          break;
      }
    }
  }
}

TEST_CASE("prior image of visit n is exactly the stored image of visit n-1") {
  const auto onto = SyntheticOntology::standard();
  auto records = generate_corpus(small_cfg(17, 60, 3, 0.6), onto);
  // index records by study id
  std::map<std::string, const StudyRecord*> by_id;
  for (const auto& r : records) by_id[r.study_id] = &r;
  std::size_t checked = 0;
  for (const auto& r : records) {
    if (!r.has_prior) continue;
    const std::string prev_id = r.patient_id + "_v" + std::to_string(r.visit - 1);
    REQUIRE(by_id.count(prev_id));
    CHECK(r.prior_image == by_id[prev_id]->image);
    CHECK(r.prior_report == by_id[prev_id]->report);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("images stay in the unit interval") {
  const auto onto = SyntheticOntology::standard();
  auto records = generate_corpus(small_cfg(19, 10, 2, 0.5), onto);
  for (const auto& r : records) {
    for (float v : r.image) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("corpus round-trips through the directory layout") {
  const auto onto = SyntheticOntology::standard();
  CorpusConfig cfg = small_cfg(23, 12, 2, 0.5);
  auto records = generate_corpus(cfg, onto);
  const std::string dir = "synth_roundtrip_test";
  save_corpus(dir, records, onto, cfg);
  Corpus loaded = load_corpus(dir);
  std::filesystem::remove_all(dir);

  REQUIRE(loaded.records.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded.records[i].study_id == records[i].study_id);
    CHECK(loaded.records[i].image == records[i].image);
    CHECK(loaded.records[i].report == records[i].report);
    CHECK(loaded.records[i].labels_cur == records[i].labels_cur);
    CHECK(loaded.records[i].has_prior == records[i].has_prior);
    if (records[i].has_prior) {
      CHECK(loaded.records[i].prior_image == records[i].prior_image);
      CHECK(loaded.records[i].prior_report == records[i].prior_report);
      CHECK(loaded.records[i].labels_prior == records[i].labels_prior);
      CHECK(loaded.records[i].progressions == records[i].progressions);
    }
  }
  // The vocabulary covers every word the grammar can emit.
  for (const auto& r : records) {
    for (const auto& w : split_words(r.report)) {
      CAPTURE(w);
      CHECK(loaded.vocab.contains(w));
    }
  }
}

TEST_CASE("the ontology has exactly 14 uniquely named single-word findings") {
  const auto onto = SyntheticOntology::standard();
  std::set<std::string> names;
  for (const auto& f : onto.findings) {
    CHECK(f.name.find(' ') == std::string::npos);
    names.insert(f.name);
  }
  CHECK(names.size() == kNumFindings);
}
