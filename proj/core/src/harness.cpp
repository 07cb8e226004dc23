#include "ddatr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "ddatr/augment.hpp"
#include "ddatr/checkpoint.hpp"
#include "ddatr/gradcheck.hpp"
#include "ddatr/metrics.hpp"
#include "ddatr/model.hpp"

namespace ddatr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

SplitSpec SplitSpec::parse(const std::string& text) {
  SplitSpec spec;
  if (text == "all") {
    spec.kind = Kind::kAll;
  } else if (text == "no-prior") {
    spec.kind = Kind::kNoPrior;
  } else if (text == "with-prior") {
    spec.kind = Kind::kWithPrior;
  } else if (text.rfind("fraction=", 0) == 0) {
    spec.kind = Kind::kFraction;
    spec.fraction = std::stod(text.substr(9));
    if (spec.fraction < 0.0 || spec.fraction > 1.0) {
      throw std::invalid_argument("split fraction must lie in [0, 1]");
    }
  } else {
    throw std::invalid_argument("unknown split: " + text +
                                " (expected all, no-prior, with-prior or fraction=<f>)");
  }
  return spec;
}

std::string SplitSpec::describe() const {
  switch (kind) {
    case Kind::kAll:
      return "all";
    case Kind::kNoPrior:
      return "no-prior";
    case Kind::kWithPrior:
      return "with-prior";
    case Kind::kFraction:
      return "fraction=" + std::to_string(fraction);
  }
  return "?";
}

std::vector<std::size_t> select_split(const std::vector<StudyRecord>& records,
                                      const SplitSpec& spec, std::uint64_t seed) {
  std::vector<std::size_t> out;
  switch (spec.kind) {
    case SplitSpec::Kind::kAll:
      for (std::size_t i = 0; i < records.size(); ++i) out.push_back(i);
      break;
    case SplitSpec::Kind::kNoPrior:
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].has_prior) out.push_back(i);
      }
      break;
    case SplitSpec::Kind::kWithPrior:
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].has_prior) out.push_back(i);
      }
      break;
    case SplitSpec::Kind::kFraction: {
      // All no-prior records plus a seeded selection of the requested
      // fraction of the prior-bearing ones.
      std::vector<std::size_t> with_prior;
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].has_prior) {
          with_prior.push_back(i);
        } else {
          out.push_back(i);
        }
      }
      Rng rng(derive_seed(seed, "split_selection"));
      for (std::size_t i = with_prior.size(); i > 1; --i) {
        std::swap(with_prior[i - 1], with_prior[rng.below(i)]);
      }
      const auto keep = static_cast<std::size_t>(
          std::llround(spec.fraction * double(with_prior.size())));
      with_prior.resize(keep);
      out.insert(out.end(), with_prior.begin(), with_prior.end());
      std::sort(out.begin(), out.end());
      break;
    }
  }
  if (out.empty()) throw std::runtime_error("selected split is empty");
  return out;
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

namespace {

template <typename T>
Tensor<T> image_to_tensor(const std::vector<float>& img, std::size_t h, std::size_t w) {
  std::vector<T> data(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) data[i] = static_cast<T>(img[i]);
  return Tensor<T>::from_data({1, h, w}, std::move(data));
}

std::vector<std::size_t> gold_tokens(const Vocabulary& vocab, const std::string& report,
                                     std::size_t max_len) {
  std::vector<std::size_t> ids = tokenize(vocab, report, max_len);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

template <typename T>
struct SampleLosses {
  Tensor<T> lm, ce_cur, total;
  std::optional<Tensor<T>> ce_prior;
};

// Forward pass + combined loss for one study.
template <typename T>
SampleLosses<T> sample_forward(const Model<T>& model, const StudyRecord& rec,
                               const std::vector<float>& cur_img,
                               const std::vector<float>& prior_img) {
  const auto& bb = model.cfg.backbone;
  typename LongitudinalEncoder<T>::Inputs in;
  in.current_image = image_to_tensor<T>(cur_img, bb.input_height, bb.input_width);
  const bool with_prior = rec.has_prior && model.cfg.use_prior;
  if (with_prior) {
    in.prior_image = image_to_tensor<T>(prior_img, bb.input_height, bb.input_width);
    in.prior_text =
        model.text.encode(tokenize(model.vocab, rec.prior_report, model.cfg.max_text_len));
  }
  EncoderOutput<T> enc = model.encoder.encode(in);

  SampleLosses<T> out;
  out.ce_cur = classification_loss(enc.cur_logits, rec.labels_cur);
  if (with_prior) out.ce_prior = classification_loss(*enc.prior_logits, rec.labels_prior);

  const LabelVector prompt_labels = model.cfg.teacher_forcing ? rec.labels_cur : enc.predicted;
  out.lm = model.decoder.decode_train(enc.cur_feature, labels_to_prompt(prompt_labels),
                                      gold_tokens(model.vocab, rec.report, model.cfg.decoder.max_gen_len));
  out.total = total_loss(out.lm, out.ce_cur, out.ce_prior, static_cast<T>(model.cfg.loss_weight));
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

json run_gen_data(const CorpusConfig& cfg, const std::string& out_dir) {
  const SyntheticOntology onto = SyntheticOntology::standard(cfg.image_size);
  const std::vector<StudyRecord> records = generate_corpus(cfg, onto);
  save_corpus(out_dir, records, onto, cfg);
  std::size_t with_prior = 0;
  for (const auto& r : records) with_prior += r.has_prior;
  json out;
  out["dir"] = out_dir;
  out["n_records"] = records.size();
  out["n_with_prior"] = with_prior;
  out["seed"] = cfg.seed;
  return out;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

template <typename T>
json train_impl(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data_dir.empty()) throw std::invalid_argument("train: data_dir is required");
  Corpus corpus = load_corpus(cfg.data_dir);
  fs::create_directories(cfg.out_dir);

  Model<T> model(cfg, corpus.vocab);
  AdamW<T> opt(model.params, cfg.optimizer);

  std::ofstream steps_csv(fs::path(cfg.out_dir) / "train_steps.csv");
  steps_csv << "step,epoch,lm,ce_cur,ce_prior,total\n";
  std::ofstream epochs_csv(fs::path(cfg.out_dir) / "train_epochs.csv");
  epochs_csv << "epoch,lm,ce_cur,ce_prior,total\n";

  const std::size_t n = corpus.records.size();
  const std::size_t batch = cfg.optimizer.batch_size;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  json history = json::array();
  std::size_t step = 0;
  double last_epoch_total = 0.0;
  for (std::size_t epoch = 1; epoch <= cfg.optimizer.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch_order_" + std::to_string(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    Rng aug_rng(derive_seed(cfg.seed, "augment_" + std::to_string(epoch)));

    double ep_lm = 0, ep_cc = 0, ep_cp = 0;
    std::size_t ep_batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t bsz = std::min(batch, n - start);
      model.params.zero_grads();
      double lm_sum = 0, cc_sum = 0, cp_sum = 0;
      for (std::size_t b = 0; b < bsz; ++b) {
        const StudyRecord& rec = corpus.records[order[start + b]];
        std::vector<float> cur = rec.image, prior = rec.prior_image;
        if (cfg.augment) {
          cur = augment_image(cur, corpus.image_size, cfg.augment_crop,
                              cfg.augment_max_rotation_deg, aug_rng);
          if (rec.has_prior) {
            prior = augment_image(prior, corpus.image_size, cfg.augment_crop,
                                  cfg.augment_max_rotation_deg, aug_rng);
          }
        }
        Tape<T> tape;
        TapeScope<T> scope(tape);
        SampleLosses<T> losses = sample_forward(model, rec, cur, prior);
        Tensor<T> scaled = scale(losses.total, T(1) / static_cast<T>(bsz));
        tape.backward(scaled);
        lm_sum += double(losses.lm.item());
        cc_sum += double(losses.ce_cur.item());
        if (losses.ce_prior) cp_sum += double(losses.ce_prior->item());
      }
      opt.step();
      ++step;
      const double lm = lm_sum / double(bsz);
      const double cc = cc_sum / double(bsz);
      const double cp = cp_sum / double(bsz);
      const double total = lm + cfg.loss_weight * (cc + cp);
      steps_csv << step << ',' << epoch << ',' << format_double(lm) << ',' << format_double(cc)
                << ',' << format_double(cp) << ',' << format_double(total) << '\n';
      ep_lm += lm;
      ep_cc += cc;
      ep_cp += cp;
      ++ep_batches;
    }
    const double elm = ep_lm / double(ep_batches);
    const double ecc = ep_cc / double(ep_batches);
    const double ecp = ep_cp / double(ep_batches);
    last_epoch_total = elm + cfg.loss_weight * (ecc + ecp);
    epochs_csv << epoch << ',' << format_double(elm) << ',' << format_double(ecc) << ','
               << format_double(ecp) << ',' << format_double(last_epoch_total) << '\n';
    history.push_back({{"epoch", epoch},
                       {"lm", elm},
                       {"ce_cur", ecc},
                       {"ce_prior", ecp},
                       {"total", last_epoch_total}});
  }

  const std::string ckpt = (fs::path(cfg.out_dir) / "model.ckpt").string();
  save_checkpoint(ckpt, model, opt, std::uint32_t(cfg.optimizer.epochs), history);

  json out;
  out["checkpoint"] = ckpt;
  out["steps_csv"] = (fs::path(cfg.out_dir) / "train_steps.csv").string();
  out["epochs_csv"] = (fs::path(cfg.out_dir) / "train_epochs.csv").string();
  out["final_total"] = last_epoch_total;
  out["history"] = history;
  out["n_parameters"] = model.params.total_scalars();
  return out;
}

}  // namespace

json run_train(const RunConfig& cfg) {
  return cfg.precision == Precision::kF32 ? train_impl<float>(cfg) : train_impl<double>(cfg);
}

// ---------------------------------------------------------------------------
// eval / generate
// ---------------------------------------------------------------------------

const std::vector<std::string>& metric_record_keys() {
  static const std::vector<std::string> keys = {
      "ce_precision_macro", "ce_recall_macro", "ce_f1_macro",
      "ce_precision_micro", "ce_recall_micro", "ce_f1_micro",
      "ce_precision_micro_prog", "ce_recall_micro_prog", "ce_f1_micro_prog",
      "bleu1", "bleu4", "rougeL", "n_samples", "n_with_prior"};
  return keys;
}

std::string metrics_csv_header() {
  std::string h;
  for (const auto& k : metric_record_keys()) {
    if (!h.empty()) h += ',';
    h += k;
  }
  return h;
}

std::string metrics_csv_row(const json& metrics) {
  std::string row;
  for (const auto& k : metric_record_keys()) {
    if (!row.empty()) row += ',';
    const auto& v = metrics.at(k);
    row += v.is_number_integer() ? std::to_string(v.get<long long>())
                                 : format_double(v.get<double>());
  }
  return row;
}

namespace {

struct GeneratedRecord {
  std::string report;
  json meta;
  LabelVector pred_labels{};
};

template <typename T>
GeneratedRecord generate_for_record(const Model<T>& model, const Corpus& corpus,
                                    const StudyRecord& rec) {
  const auto& bb = model.cfg.backbone;
  typename LongitudinalEncoder<T>::Inputs in;
  in.current_image = image_to_tensor<T>(rec.image, bb.input_height, bb.input_width);
  if (rec.has_prior && model.cfg.use_prior) {
    in.prior_image = image_to_tensor<T>(rec.prior_image, bb.input_height, bb.input_width);
    in.prior_text =
        model.text.encode(tokenize(model.vocab, rec.prior_report, model.cfg.max_text_len));
  }
  EncoderOutput<T> enc = model.encoder.encode(in);
  GenerationResult gen =
      model.decoder.generate(enc.cur_feature, labels_to_prompt(enc.predicted));

  GeneratedRecord out;
  std::string text;
  for (std::size_t id : gen.tokens) {
    if (!text.empty()) text += ' ';
    text += model.vocab.token(id);
  }
  out.report = text;
  out.meta = {{"study_id", rec.study_id},
              {"terminated_by", gen.terminated_by == StopReason::kEos ? "EOS" : "length-limit"},
              {"token_count", gen.tokens.size()}};
  out.pred_labels = rule_label(corpus.ontology, text);
  return out;
}

// Deterministic parallel map over the split: worker threads fill results by
// index, so output ordering is independent of scheduling.
template <typename T>
std::vector<GeneratedRecord> generate_split(const Model<T>& model, const Corpus& corpus,
                                            const std::vector<std::size_t>& split) {
  std::vector<GeneratedRecord> results(split.size());
  const std::size_t workers = std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                    std::max<std::size_t>(split.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < split.size(); ++i) {
      results[i] = generate_for_record(model, corpus, corpus.records[split[i]]);
    }
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= split.size()) return;
      results[i] = generate_for_record(model, corpus, corpus.records[split[i]]);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

template <typename T>
json eval_impl(const std::string& checkpoint_path, const std::string& data_dir,
               const SplitSpec& split_spec, const std::string& out_dir, std::uint64_t split_seed,
               bool score_metrics) {
  LoadedModel<T> loaded = load_checkpoint<T>(checkpoint_path);
  const Model<T>& model = *loaded.model;
  Corpus corpus = load_corpus(data_dir);
  const std::vector<std::size_t> split = select_split(corpus.records, split_spec, split_seed);

  fs::create_directories(out_dir);
  std::vector<GeneratedRecord> generated = generate_split(model, corpus, split);

  std::ofstream reports_out(fs::path(out_dir) / "generated.txt");
  std::ofstream meta_out(fs::path(out_dir) / "generated_meta.jsonl");
  for (const auto& g : generated) {
    reports_out << g.report << '\n';
    meta_out << g.meta.dump() << '\n';
  }

  json out;
  out["split"] = split_spec.describe();
  out["n_samples"] = split.size();
  out["reports"] = (fs::path(out_dir) / "generated.txt").string();
  if (!score_metrics) return out;

  BinaryLabelMatrix pred, gold;
  std::vector<bool> prog_mask;
  BleuAccumulator bleu_acc;
  double rouge_sum = 0;
  std::size_t n_with_prior = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const StudyRecord& rec = corpus.records[split[i]];
    pred.append(map_attributes(generated[i].pred_labels));
    gold.append(map_attributes(rule_label(corpus.ontology, rec.report)));
    for (std::size_t d = 0; d < kNumFindings; ++d) {
      prog_mask.push_back(rec.has_prior && rec.progressions[d] != Progression::kUnchanged);
    }
    n_with_prior += rec.has_prior;

    const std::vector<std::string> cand = generated[i].report.empty()
                                              ? std::vector<std::string>{}
                                              : split_words(generated[i].report);
    const std::vector<std::string> ref = split_words(rec.report);
    bleu_acc.add(cand, {ref});
    rouge_sum += rouge_l(cand, ref);
  }
  const CeScores ce = ce_scores(pred, gold);
  const MicroCounts prog = micro_counts(pred, gold, &prog_mask);

  json metrics;
  metrics["ce_precision_macro"] = ce.precision_macro;
  metrics["ce_recall_macro"] = ce.recall_macro;
  metrics["ce_f1_macro"] = ce.f1_macro;
  metrics["ce_precision_micro"] = ce.precision_micro;
  metrics["ce_recall_micro"] = ce.recall_micro;
  metrics["ce_f1_micro"] = ce.f1_micro;
  metrics["ce_precision_micro_prog"] = prog.precision();
  metrics["ce_recall_micro_prog"] = prog.recall();
  metrics["ce_f1_micro_prog"] = prog.f1();
  metrics["bleu1"] = bleu_acc.score(1);
  metrics["bleu4"] = bleu_acc.score(4);
  metrics["rougeL"] = rouge_sum / double(split.size());
  metrics["n_samples"] = split.size();
  metrics["n_with_prior"] = n_with_prior;

  std::ofstream(fs::path(out_dir) / "metrics.json") << metrics.dump(2) << '\n';
  std::ofstream csv(fs::path(out_dir) / "metrics.csv");
  csv << metrics_csv_header() << '\n' << metrics_csv_row(metrics) << '\n';

  out["metrics"] = metrics;
  out["metrics_json"] = (fs::path(out_dir) / "metrics.json").string();
  out["metrics_csv"] = (fs::path(out_dir) / "metrics.csv").string();
  return out;
}

json dispatch_eval(const std::string& checkpoint_path, const std::string& data_dir,
                   const SplitSpec& split, const std::string& out_dir, std::uint64_t split_seed,
                   bool score_metrics) {
  const CheckpointInfo info = read_checkpoint_info(checkpoint_path);
  return info.precision == Precision::kF32
             ? eval_impl<float>(checkpoint_path, data_dir, split, out_dir, split_seed, score_metrics)
             : eval_impl<double>(checkpoint_path, data_dir, split, out_dir, split_seed,
                                 score_metrics);
}

}  // namespace

json run_eval(const std::string& checkpoint_path, const std::string& data_dir,
              const SplitSpec& split, const std::string& out_dir, std::uint64_t split_seed) {
  return dispatch_eval(checkpoint_path, data_dir, split, out_dir, split_seed, true);
}

json run_generate(const std::string& checkpoint_path, const std::string& data_dir,
                  const SplitSpec& split, const std::string& out_dir, std::uint64_t split_seed) {
  return dispatch_eval(checkpoint_path, data_dir, split, out_dir, split_seed, false);
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

namespace {

Tensor<double> seeded_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> data(numel(shape));
  for (auto& v : data) v = rng.normal(0.0, scale);
  return Tensor<double>::from_data(std::move(shape), std::move(data));
}

// Max finite-difference error over the block output w.r.t. the probe input
// and a sample of the block's parameters.
double block_gradcheck(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                       Tensor<double> input, ParameterStore<double>& ps,
                       const std::vector<std::string>& params, std::uint64_t seed) {
  auto weigh = [&](const Tensor<double>& out) {
    return sum(mul(out, seeded_tensor(out.shape(), derive_seed(seed, "weigh"))));
  };
  auto scalar_f = [&](const Tensor<double>& t) { return weigh(f(t)); };
  double worst = finite_difference_check(scalar_f, input, 1e-5, 64);
  for (const auto& name : params) {
    auto p = ps.get(name);
    const double err = finite_difference_check(
        [&](const Tensor<double>&) { return weigh(f(input)); }, p, 1e-5, 24);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

json run_gradcheck(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  json out;

  {  // backbone stage
    BackboneConfig cfg;
    cfg.stages = 2;
    cfg.channels = {4, 6};
    cfg.input_channels = 2;
    cfg.input_height = 8;
    cfg.input_width = 8;
    ParameterStore<double> ps(derive_seed(seed, "gc_backbone"));
    Backbone<double> bb(ps, "b", cfg);
    out["backbone_stage"] = block_gradcheck(
        [&](const Tensor<double>& t) { return bb.stage_forward(1, t); },
        seeded_tensor({2, 8, 8}, derive_seed(seed, "gc_bb_in")), ps,
        {"b.stage1.conv1.w", "b.stage1.norm1.gamma", "b.stage1.conv2.w"}, seed + 1);
  }
  {  // DFAM
    ParameterStore<double> ps(derive_seed(seed, "gc_dfam"));
    Dfam<double> dfam(ps, "d", 4, 3);
    for (auto& v : ps.get("d.b2.w").values()) v = 0.2;  // open the gate
    auto text = seeded_tensor({3, 5}, derive_seed(seed, "gc_dfam_text"));
    out["dfam"] = block_gradcheck(
        [&](const Tensor<double>& t) { return dfam.forward(t, text); },
        seeded_tensor({4, 6, 6}, derive_seed(seed, "gc_dfam_in")), ps,
        {"d.pq.w", "d.pk.w", "d.pv.w", "d.pt.w", "d.pa.w", "d.pf.w", "d.b1.w", "d.b2.w"},
        seed + 2);
  }
  {  // ldconv
    ParameterStore<double> ps(derive_seed(seed, "gc_ldc"));
    LdConv<double> ldc(ps, "l", 3);
    out["ldconv"] = block_gradcheck(
        [&](const Tensor<double>& t) { return ldc.forward(t); },
        seeded_tensor({3, 6, 6}, derive_seed(seed, "gc_ldc_in")), ps,
        {"l.w", "l.theta", "l.b"}, seed + 3);
  }
  {  // DDAM
    ParameterStore<double> ps(derive_seed(seed, "gc_ddam"));
    Ddam<double> ddam(ps, "m", 3);
    for (auto& v : ps.get("m.dy2.w").values()) v = 0.15;  // open the gate
    auto prior = seeded_tensor({3, 6, 6}, derive_seed(seed, "gc_ddam_prior"));
    out["ddam"] = block_gradcheck(
        [&](const Tensor<double>& t) { return ddam.forward(t, prior); },
        seeded_tensor({3, 6, 6}, derive_seed(seed, "gc_ddam_in")), ps,
        {"m.ldc_c.w", "m.ldc_p.w", "m.ldc_c.theta", "m.pd.w", "m.dy1.w", "m.dy2.w"}, seed + 4);
  }
  {  // classifier
    ParameterStore<double> ps(derive_seed(seed, "gc_cls"));
    ClassifierHead<double> head(ps, "c", 6);
    LabelVector gold = all_blank_labels();
    gold[1] = Attribute::kPositive;
    gold[5] = Attribute::kUncertain;
    gold[9] = Attribute::kNegative;
    out["classifier"] = block_gradcheck(
        [&](const Tensor<double>& t) { return classification_loss(head.forward(t), gold); },
        seeded_tensor({6, 2, 2}, derive_seed(seed, "gc_cls_in")), ps, {"c.w", "c.b"}, seed + 5);
  }
  {  // decoder step (teacher-forced loss on a tiny configuration)
    DecoderConfig dc;
    dc.layers = 1;
    dc.width = 8;
    dc.heads = 2;
    dc.ffn_width = 16;
    ParameterStore<double> ps(derive_seed(seed, "gc_dec"));
    ReportDecoder<double> dec(ps, dc, 20, 5);
    {
      Rng r(derive_seed(seed, "gc_dec_head"));
      for (auto& w : ps.get("dec.head.w").values()) w = r.normal(0.0, 0.2);
    }
    PromptSequence prompt{};
    for (std::size_t i = 0; i < kNumFindings; ++i) prompt[i] = std::uint8_t(i % 4);
    const std::vector<std::size_t> gold = {9, 12, 15, Vocabulary::kEos};
    out["decoder_step"] = block_gradcheck(
        [&](const Tensor<double>& t) {
          return reshape(dec.decode_train(t, prompt, gold), {1});
        },
        seeded_tensor({5, 2, 2}, derive_seed(seed, "gc_dec_in")), ps,
        {"dec.emb", "dec.mem.w", "dec.layer0.self.wq", "dec.layer0.cross.wk",
         "dec.layer0.ffn.w1", "dec.head.w"},
        seed + 6);
  }

  double worst = 0.0;
  for (const auto& [k, v] : out.items()) worst = std::max(worst, v.get<double>());
  out["max"] = worst;
  out["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

json run_ablate(const RunConfig& base, const std::string& test_data_dir) {
  json table = json::array();
  for (const std::string& row : ablation_row_names()) {
    RunConfig cfg = base;
    apply_ablation(cfg, row);
    cfg.out_dir = (fs::path(base.out_dir) / ("ablation_" + row)).string();
    json train_summary = run_train(cfg);
    json eval_summary = run_eval(train_summary.at("checkpoint"), test_data_dir,
                                 SplitSpec{}, (fs::path(cfg.out_dir) / "eval").string(), cfg.seed);
    json entry;
    entry["ablation"] = row;
    entry["metrics"] = eval_summary.at("metrics");
    table.push_back(entry);
  }

  fs::create_directories(base.out_dir);
  std::ofstream csv(fs::path(base.out_dir) / "ablation.csv");
  csv << "ablation," << metrics_csv_header() << '\n';
  for (const auto& entry : table) {
    csv << entry.at("ablation").get<std::string>() << ',' << metrics_csv_row(entry.at("metrics"))
        << '\n';
  }
  std::ofstream(fs::path(base.out_dir) / "ablation.json") << table.dump(2) << '\n';

  json out;
  out["table"] = table;
  out["csv"] = (fs::path(base.out_dir) / "ablation.csv").string();
  return out;
}

}  // namespace ddatr
