#include <doctest.h>

#include <cstdio>

#include "ddatr/ops.hpp"
#include "ddatr/text_encoder.hpp"
#include "ddatr/vocab.hpp"

using namespace ddatr;

namespace {

Vocabulary small_vocab() {
  Vocabulary v;
  for (const char* w : {"no", "acute", "findings", ".", "effusion", "stable"}) v.add(w);
  return v;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  Vocabulary v = small_vocab();
  auto ids = tokenize(v, "No acute findings.", 100);
  REQUIRE(ids.size() == 4);
  CHECK(v.token(ids[0]) == "no");
  CHECK(v.token(ids[1]) == "acute");
  CHECK(v.token(ids[2]) == "findings");
  CHECK(v.token(ids[3]) == ".");
}

TEST_CASE("tokenize truncates to the maximum text length") {
  Vocabulary v = small_vocab();
  std::string report;
  for (int i = 0; i < 150; ++i) report += "stable ";
  auto ids = tokenize(v, report, 100);
  CHECK(ids.size() == 100);
}

TEST_CASE("unseen words map to UNK") {
  Vocabulary v = small_vocab();
  auto ids = tokenize(v, "zebra", 100);
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == Vocabulary::kUnk);
}

TEST_CASE("empty text raises a dedicated error") {
  Vocabulary v = small_vocab();
  CHECK_THROWS_AS(tokenize(v, "   \t  ", 100), EmptyTextError);
}

TEST_CASE("vocabulary round-trips through its line format") {
  Vocabulary v = small_vocab();
  const std::string path = "vocab_test.txt";
  v.save(path);
  Vocabulary back = Vocabulary::load(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back.token(i) == v.token(i));
  CHECK(back.id("effusion") == v.id("effusion"));
}

TEST_CASE("encoding is a pure function of seed and tokens") {
  Vocabulary v = small_vocab();
  TextEncoder<double> enc_a(v.size(), 16, 7);
  TextEncoder<double> enc_b(v.size(), 16, 7);
  auto ids = tokenize(v, "no acute findings .", 100);
  auto fa = enc_a.encode(ids);
  auto fb = enc_b.encode(ids);
  CHECK(fa.values() == fb.values());

  TextEncoder<double> enc_c(v.size(), 16, 8);
  CHECK(enc_c.encode(ids).values() != fa.values());
}

TEST_CASE("single token yields a one-column matrix") {
  Vocabulary v = small_vocab();
  TextEncoder<double> enc(v.size(), 16, 7);
  auto f = enc.encode({v.id("effusion")});
  CHECK(f.shape() == Shape{16, 1});
}

TEST_CASE("text parameters never receive gradient") {
  Vocabulary v = small_vocab();
  TextEncoder<double> enc(v.size(), 8, 3);
  auto w = Tensor<double>::full({8, 2}, 0.5, /*requires_grad=*/true);

  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto f = enc.encode({1, 2});
  auto loss = sum(mul(f, w));
  tape.backward(loss);

  CHECK(w.has_grad());
  CHECK_FALSE(enc.embedding_table().has_grad());
  CHECK_FALSE(enc.embedding_table().requires_grad());
}
