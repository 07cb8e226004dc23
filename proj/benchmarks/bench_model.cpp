#include <benchmark/benchmark.h>

#include "ddatr/model.hpp"
#include "ddatr/rng.hpp"
#include "ddatr/synth.hpp"

using namespace ddatr;

namespace {

RunConfig bench_config() {
  RunConfig cfg;
  cfg.backbone.channels = {8, 16, 32, 64};
  cfg.decoder.width = 32;
  cfg.decoder.ffn_width = 64;
  return cfg;
}

struct BenchModel {
  SyntheticOntology onto = SyntheticOntology::standard();
  Vocabulary vocab = onto.build_vocabulary();
  Model<float> model{bench_config(), vocab};
  StudyRecord rec;

  BenchModel() {
    CorpusConfig ccfg;
    ccfg.n_patients = 2;
    ccfg.visits_per_patient = 2;
    ccfg.prior_fraction = 0.5;
    auto records = generate_corpus(ccfg, onto);
    for (auto& r : records) {
      if (r.has_prior) {
        rec = r;
        break;
      }
    }
  }

  Tensor<float> image(const std::vector<float>& img) const {
    std::vector<float> data(img.begin(), img.end());
    return Tensor<float>::from_data({1, 32, 32}, std::move(data));
  }

  LongitudinalEncoder<float>::Inputs inputs() const {
    LongitudinalEncoder<float>::Inputs in;
    in.current_image = image(rec.image);
    in.prior_image = image(rec.prior_image);
    in.prior_text = model.text.encode(tokenize(vocab, rec.prior_report, 100));
    return in;
  }
};

}  // namespace

static void BM_EncodeWithPrior(benchmark::State& state) {
  BenchModel bm;
  auto in = bm.inputs();
  for (auto _ : state) benchmark::DoNotOptimize(bm.model.encoder.encode(in));
}
BENCHMARK(BM_EncodeWithPrior);

static void BM_EncodeTrainStep(benchmark::State& state) {
  BenchModel bm;
  auto in = bm.inputs();
  auto gold = tokenize(bm.vocab, bm.rec.report, 100);
  gold.push_back(Vocabulary::kEos);
  for (auto _ : state) {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    auto out = bm.model.encoder.encode(in);
    auto ce_cur = classification_loss(out.cur_logits, bm.rec.labels_cur);
    auto ce_prior = classification_loss(*out.prior_logits, bm.rec.labels_prior);
    auto lm = bm.model.decoder.decode_train(out.cur_feature,
                                            labels_to_prompt(out.predicted), gold);
    auto total = total_loss(lm, ce_cur, std::optional<Tensor<float>>(ce_prior), 4.0f);
    tape.backward(total);
    bm.model.params.zero_grads();
  }
}
BENCHMARK(BM_EncodeTrainStep);

static void BM_DecodeTrainOnly(benchmark::State& state) {
  BenchModel bm;
  auto in = bm.inputs();
  auto out = bm.model.encoder.encode(in);
  auto gold = tokenize(bm.vocab, bm.rec.report, 100);
  gold.push_back(Vocabulary::kEos);
  auto prompt = labels_to_prompt(out.predicted);
  for (auto _ : state) {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    auto lm = bm.model.decoder.decode_train(out.cur_feature, prompt, gold);
    tape.backward(lm);
    bm.model.params.zero_grads();
  }
}
BENCHMARK(BM_DecodeTrainOnly);

static void BM_GenerateGreedy(benchmark::State& state) {
  BenchModel bm;
  auto in = bm.inputs();
  auto out = bm.model.encoder.encode(in);
  auto prompt = labels_to_prompt(out.predicted);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bm.model.decoder.generate(out.cur_feature, prompt));
  }
}
BENCHMARK(BM_GenerateGreedy);
