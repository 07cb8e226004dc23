#include <doctest.h>

#include <cmath>

#include "ddatr/metrics.hpp"
#include "ddatr/rng.hpp"

using namespace ddatr;

namespace {

std::array<bool, kNumFindings> row_of(std::initializer_list<int> positives) {
  std::array<bool, kNumFindings> r{};
  for (int i : positives) r[std::size_t(i)] = true;
  return r;
}

// Brute-force TP/FP/FN counting oracle, per disease and pooled.
struct CountOracle {
  std::size_t tp[kNumFindings] = {}, fp[kNumFindings] = {}, fn[kNumFindings] = {};

  void add(const std::array<bool, kNumFindings>& p, const std::array<bool, kNumFindings>& g) {
    for (std::size_t d = 0; d < kNumFindings; ++d) {
      if (p[d] && g[d]) tp[d]++;
      if (p[d] && !g[d]) fp[d]++;
      if (!p[d] && g[d]) fn[d]++;
    }
  }
  static double safe_div(double a, double b) { return b == 0 ? 0.0 : a / b; }
  CeScores scores() const {
    CeScores s;
    std::size_t TP = 0, FP = 0, FN = 0;
    for (std::size_t d = 0; d < kNumFindings; ++d) {
      const double p = safe_div(double(tp[d]), double(tp[d] + fp[d]));
      const double r = safe_div(double(tp[d]), double(tp[d] + fn[d]));
      s.precision_macro += p / kNumFindings;
      s.recall_macro += r / kNumFindings;
      s.f1_macro += (p + r == 0 ? 0.0 : 2 * p * r / (p + r)) / kNumFindings;
      TP += tp[d];
      FP += fp[d];
      FN += fn[d];
    }
    s.precision_micro = safe_div(double(TP), double(TP + FP));
    s.recall_micro = safe_div(double(TP), double(TP + FN));
    s.f1_micro = s.precision_micro + s.recall_micro == 0
                     ? 0.0
                     : 2 * s.precision_micro * s.recall_micro /
                           (s.precision_micro + s.recall_micro);
    return s;
  }
};

std::vector<std::string> toks(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("perfect predictions score 1.0 everywhere") {
  BinaryLabelMatrix pred, gold;
  pred.append(row_of({0, 3}));
  gold.append(row_of({0, 3}));
  pred.append(row_of({7}));
  gold.append(row_of({7}));
  const CeScores s = ce_scores(pred, gold);
  CHECK(s.precision_micro == 1.0);
  CHECK(s.recall_micro == 1.0);
  CHECK(s.f1_micro == 1.0);
}

TEST_CASE("all-negative predictions against positive gold hit the zero conventions") {
  BinaryLabelMatrix pred, gold;
  pred.append(row_of({}));
  gold.append(row_of({1, 2}));
  const CeScores s = ce_scores(pred, gold);
  CHECK(s.recall_micro == 0.0);
  CHECK(s.precision_micro == 0.0);
  CHECK(s.f1_micro == 0.0);
}

TEST_CASE("ce_scores matches the brute-force counting oracle on random cases") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    BinaryLabelMatrix pred, gold;
    CountOracle oracle;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      std::array<bool, kNumFindings> p{}, g{};
      for (std::size_t d = 0; d < kNumFindings; ++d) {
        p[d] = rng.bernoulli(0.3);
        g[d] = rng.bernoulli(0.3);
      }
      pred.append(p);
      gold.append(g);
      oracle.add(p, g);
    }
    const CeScores got = ce_scores(pred, gold);
    const CeScores want = oracle.scores();
    CHECK(got.precision_macro == doctest::Approx(want.precision_macro).epsilon(1e-12));
    CHECK(got.recall_macro == doctest::Approx(want.recall_macro).epsilon(1e-12));
    CHECK(got.f1_macro == doctest::Approx(want.f1_macro).epsilon(1e-12));
    CHECK(got.precision_micro == doctest::Approx(want.precision_micro).epsilon(1e-12));
    CHECK(got.recall_micro == doctest::Approx(want.recall_micro).epsilon(1e-12));
    CHECK(got.f1_micro == doctest::Approx(want.f1_micro).epsilon(1e-12));
  }
}

TEST_CASE("micro scores are invariant to identical column permutations") {
  Rng rng(7);
  BinaryLabelMatrix pred, gold, pred_perm, gold_perm;
  std::array<std::size_t, kNumFindings> perm{};
  for (std::size_t i = 0; i < kNumFindings; ++i) perm[i] = (i * 5 + 3) % kNumFindings;
  for (int i = 0; i < 10; ++i) {
    std::array<bool, kNumFindings> p{}, g{}, pp{}, gp{};
    for (std::size_t d = 0; d < kNumFindings; ++d) {
      p[d] = rng.bernoulli(0.4);
      g[d] = rng.bernoulli(0.4);
    }
    for (std::size_t d = 0; d < kNumFindings; ++d) {
      pp[d] = p[perm[d]];
      gp[d] = g[perm[d]];
    }
    pred.append(p);
    gold.append(g);
    pred_perm.append(pp);
    gold_perm.append(gp);
  }
  const CeScores a = ce_scores(pred, gold);
  const CeScores b = ce_scores(pred_perm, gold_perm);
  CHECK(a.f1_micro == doctest::Approx(b.f1_micro).epsilon(1e-12));
  CHECK(a.f1_macro == doctest::Approx(b.f1_macro).epsilon(1e-12));
}

TEST_CASE("micro counts recombine across dataset partitions") {
  Rng rng(9);
  BinaryLabelMatrix full_p, full_g, part1_p, part1_g, part2_p, part2_g;
  for (int i = 0; i < 12; ++i) {
    std::array<bool, kNumFindings> p{}, g{};
    for (std::size_t d = 0; d < kNumFindings; ++d) {
      p[d] = rng.bernoulli(0.35);
      g[d] = rng.bernoulli(0.35);
    }
    full_p.append(p);
    full_g.append(g);
    if (i < 5) {
      part1_p.append(p);
      part1_g.append(g);
    } else {
      part2_p.append(p);
      part2_g.append(g);
    }
  }
  const MicroCounts whole = micro_counts(full_p, full_g);
  const MicroCounts a = micro_counts(part1_p, part1_g);
  const MicroCounts b = micro_counts(part2_p, part2_g);
  CHECK(whole.tp == a.tp + b.tp);
  CHECK(whole.fp == a.fp + b.fp);
  CHECK(whole.fn == a.fn + b.fn);
  const CeScores s = ce_scores(full_p, full_g);
  CHECK(whole.f1() == doctest::Approx(s.f1_micro).epsilon(1e-12));
}

TEST_CASE("identical candidate and reference give BLEU 1.0") {
  auto c = toks("the lungs are clear");
  CHECK(bleu(c, {c}, 1) == doctest::Approx(1.0));
  CHECK(bleu(c, {c}, 4) == doctest::Approx(1.0));
}

TEST_CASE("disjoint vocabulary gives BLEU 0") {
  CHECK(bleu(toks("a b c"), {toks("x y z")}, 1) == 0.0);
  CHECK(bleu(toks("a b c"), {toks("x y z")}, 4) == 0.0);
}

TEST_CASE("brevity penalty matches the hand-evaluated formula") {
  // unigram precision 1, candidate length 3, reference length 4
  const double got = bleu(toks("the cat sat"), {toks("the cat sat down")}, 1);
  CHECK(got == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("empty candidate scores 0") {
  CHECK(bleu({}, {toks("a b")}, 1) == 0.0);
}

TEST_CASE("corpus BLEU pools clipped counts across pairs") {
  BleuAccumulator acc;
  acc.add(toks("a b"), {toks("a b")});
  acc.add(toks("c d"), {toks("c x")});
  // pooled unigram: clipped 3 (a, b, c), total 4; lengths equal -> BP 1
  CHECK(acc.score(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("identical sequences give ROUGE-L 1.0 and disjoint give 0") {
  auto c = toks("no acute findings");
  CHECK(rouge_l(c, c) == doctest::Approx(1.0));
  CHECK(rouge_l(toks("a b"), toks("x y")) == 0.0);
}

TEST_CASE("ROUGE-L matches the exponential subsequence-enumeration oracle") {
  // Brute-force LCS by enumerating all subsequences of the candidate and
  // checking containment in the reference.
  auto lcs_oracle = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t best = 0;
    const std::size_t n = a.size();
    for (std::size_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<std::string> sub;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) sub.push_back(a[i]);
      }
      // subsequence containment in b
      std::size_t j = 0;
      for (const auto& w : b) {
        if (j < sub.size() && w == sub[j]) ++j;
      }
      if (j == sub.size()) best = std::max(best, sub.size());
    }
    return best;
  };

  auto cand = toks("a b c d");
  auto ref = toks("a c d e");
  CHECK(lcs_oracle(cand, ref) == 3);
  const double p = 3.0 / 4.0, r = 3.0 / 4.0, beta = 1.2;
  const double want = (1 + beta * beta) * r * p / (r + beta * beta * p);
  CHECK(rouge_l(cand, ref) == doctest::Approx(want).epsilon(1e-12));

  // Random short cases against the same oracle.
  Rng rng(11);
  const char* words[4] = {"w0", "w1", "w2", "w3"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> a, b;
    const std::size_t la = 1 + rng.below(6), lb = 1 + rng.below(6);
    for (std::size_t i = 0; i < la; ++i) a.push_back(words[rng.below(4)]);
    for (std::size_t i = 0; i < lb; ++i) b.push_back(words[rng.below(4)]);
    const double lcs = double(lcs_oracle(a, b));
    double want_f = 0.0;
    if (lcs > 0) {
      const double pp = lcs / double(a.size()), rr = lcs / double(b.size());
      want_f = (1 + beta * beta) * rr * pp / (rr + beta * beta * pp);
    }
    CHECK(rouge_l(a, b) == doctest::Approx(want_f).epsilon(1e-12));
  }
}

TEST_CASE("shuffling candidate tokens never raises ROUGE-L against a reference") {
  Rng rng(13);
  const char* words[5] = {"q", "r", "s", "t", "u"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> ref, cand;
    for (int i = 0; i < 6; ++i) ref.push_back(words[rng.below(5)]);
    cand = ref;
    const double base = rouge_l(cand, ref);
    for (std::size_t i = cand.size(); i > 1; --i) std::swap(cand[i - 1], cand[rng.below(i)]);
    CHECK(rouge_l(cand, ref) <= base + 1e-12);
  }
}

TEST_CASE("map_attributes follows the binary mapping rule") {
  LabelVector labels = all_blank_labels();
  auto bin = map_attributes(labels);
  for (bool b : bin) CHECK_FALSE(b);  // all blank -> all negative

  labels[0] = Attribute::kUncertain;
  labels[1] = Attribute::kPositive;
  labels[2] = Attribute::kNegative;
  bin = map_attributes(labels);
  CHECK(bin[0]);
  CHECK(bin[1]);
  CHECK_FALSE(bin[2]);
  CHECK_FALSE(bin[3]);

  // Idempotent when its own output is read back as positive/negative.
  LabelVector reread = all_blank_labels();
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    reread[i] = bin[i] ? Attribute::kPositive : Attribute::kNegative;
  }
  CHECK(map_attributes(reread) == bin);
}
