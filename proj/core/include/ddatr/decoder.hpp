#pragma once

// Prompt-conditioned autoregressive report decoder. Pre-norm transformer
// blocks with causal self-attention and cross-attention over the flattened
// final visual feature. Training runs through the taped ops; generation
// uses an incremental session with cached keys/values that computes the
// same function without recording (verified by an equivalence test).

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ddatr/labels.hpp"
#include "ddatr/params.hpp"
#include "ddatr/vocab.hpp"

namespace ddatr {

struct DecoderConfig {
  std::size_t layers = 2;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t ffn_width = 128;
  std::size_t max_gen_len = 60;
  std::size_t beam_width = 1;  // 1 = greedy

  void validate() const {
    if (width % heads != 0) throw std::invalid_argument("decoder: width must divide into heads");
    if (layers == 0 || width == 0 || heads == 0) {
      throw std::invalid_argument("decoder: zero-sized configuration");
    }
    if (beam_width == 0) throw std::invalid_argument("decoder: beam width must be positive");
  }
};

enum class StopReason : std::uint8_t { kEos, kLengthLimit };

struct GenerationResult {
  std::vector<std::size_t> tokens;  // excludes BOS/EOS
  std::vector<double> logprobs;     // one per emitted token
  StopReason terminated_by = StopReason::kLengthLimit;
};

namespace detail {

template <typename T>
Tensor<T> sinusoidal_codes(std::size_t dim, std::size_t len, std::size_t offset = 0) {
  std::vector<T> data(dim * len);
  for (std::size_t d = 0; d < dim; ++d) {
    const double rate = std::pow(10000.0, -double(d / 2 * 2) / double(dim));
    for (std::size_t j = 0; j < len; ++j) {
      const double angle = double(j + offset) * rate;
      data[d * len + j] = static_cast<T>(d % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor<T>::from_data({dim, len}, std::move(data));
}

}  // namespace detail

template <typename T>
class ReportDecoder {
 public:
  ReportDecoder() = default;

  ReportDecoder(ParameterStore<T>& ps, const DecoderConfig& cfg, std::size_t vocab_size,
                std::size_t feature_channels)
      : cfg_(cfg), vocab_size_(vocab_size) {
    cfg.validate();
    emb_ = ps.create("dec.emb", {cfg.width, vocab_size}, Init::kNormalSmall);
    mem_proj_ = Conv1x1Layer<T>(ps, "dec.mem", cfg.width, feature_channels);
    layers_.reserve(cfg.layers);
    for (std::size_t i = 0; i < cfg.layers; ++i) {
      layers_.emplace_back(ps, "dec.layer" + std::to_string(i), cfg);
    }
    final_norm_ = LayerNormLayer<T>(ps, "dec.lnf", cfg.width);
    // Zero-initialized output head: the initial next-token distribution is
    // exactly uniform.
    head_w_ = ps.create("dec.head.w", {vocab_size, cfg.width}, Init::kZeros);
    head_b_ = ps.create("dec.head.b", {vocab_size}, Init::kZeros);
  }

  const DecoderConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }

  // Decoder input ids for a prompt + gold pair: prompts, BOS, gold[:-1].
  static std::vector<std::size_t> training_input_ids(const PromptSequence& prompt,
                                                     const std::vector<std::size_t>& gold) {
    std::vector<std::size_t> ids;
    ids.reserve(kNumFindings + gold.size());
    for (std::uint8_t a : prompt) ids.push_back(Vocabulary::kBla + a);
    ids.push_back(Vocabulary::kBos);
    ids.insert(ids.end(), gold.begin(), gold.end() - 1);
    return ids;
  }

  // Teacher-forced logits over the gold positions: (V, len(gold)).
  // Prompt-position predictions are never formed, so no gradient can flow
  // from them.
  Tensor<T> teacher_forced_logits(const Tensor<T>& feature, const PromptSequence& prompt,
                                  const std::vector<std::size_t>& gold) const {
    if (gold.empty()) throw std::invalid_argument("decoder: gold sequence is empty");
    if (gold.back() != Vocabulary::kEos) {
      throw std::invalid_argument("decoder: gold sequence must end with EOS");
    }
    const std::vector<std::size_t> ids = training_input_ids(prompt, gold);
    Tensor<T> hidden = forward_hidden(feature, ids);
    Tensor<T> gold_hidden = slice(hidden, 1, kNumFindings, gold.size());
    return conv1x1(final_norm_.forward(gold_hidden), head_w_, head_b_);
  }

  // Mean next-token cross-entropy over the gold positions only.
  Tensor<T> decode_train(const Tensor<T>& feature, const PromptSequence& prompt,
                         const std::vector<std::size_t>& gold) const {
    return cross_entropy_columns(teacher_forced_logits(feature, prompt, gold), gold);
  }

  // ---------------------------------------------------------------------
  // incremental inference
  // ---------------------------------------------------------------------

  // One sequence's generation state. Construction prefills the prompt and
  // BOS; logits() scores the next token; feed() advances.
  class Session {
   public:
    Session(const ReportDecoder& dec, const Tensor<T>& feature, const PromptSequence& prompt)
        : dec_(&dec) {
      const auto& cfg = dec.cfg_;
      layer_state_.resize(cfg.layers);
      // Memory keys/values per layer are fixed for the whole session.
      const std::size_t c = feature.extent(0);
      const std::size_t s = feature.size() / c;
      std::vector<T> mem(cfg.width * s);
      matvec_cols(dec.mem_proj_.w.values(), dec.mem_proj_.b.values(), feature.values(), cfg.width,
                  c, s, mem.data());
      for (std::size_t l = 0; l < cfg.layers; ++l) {
        const auto& ly = dec.layers_[l];
        layer_state_[l].mem_k.resize(cfg.width * s);
        layer_state_[l].mem_v.resize(cfg.width * s);
        matvec_cols(ly.cross_wk.values(), ly.cross_bk.values(), mem, cfg.width, cfg.width, s,
                    layer_state_[l].mem_k.data());
        matvec_cols(ly.cross_wv.values(), ly.cross_bv.values(), mem, cfg.width, cfg.width, s,
                    layer_state_[l].mem_v.data());
        layer_state_[l].mem_len = s;
      }
      for (std::uint8_t a : prompt) feed(Vocabulary::kBla + a);
      feed(Vocabulary::kBos);
    }

    // Raw next-token logits given everything fed so far.
    const std::vector<T>& logits() const { return logits_; }

    void feed(std::size_t token_id) {
      const auto& cfg = dec_->cfg_;
      const std::size_t d = cfg.width;
      // embedding + positional code
      std::vector<T> x(d);
      for (std::size_t i = 0; i < d; ++i) {
        x[i] = dec_->emb_.values()[i * dec_->vocab_size_ + token_id];
      }
      add_position_code(x, pos_);
      for (std::size_t l = 0; l < cfg.layers; ++l) layer_step(l, x);
      // final norm + head
      std::vector<T> xf = x;
      layer_norm_col(xf, dec_->final_norm_.gamma.values(), dec_->final_norm_.beta.values());
      logits_.assign(dec_->vocab_size_, T(0));
      for (std::size_t v = 0; v < dec_->vocab_size_; ++v) {
        T acc = dec_->head_b_.values()[v];
        const T* row = dec_->head_w_.values().data() + v * d;
        for (std::size_t i = 0; i < d; ++i) acc += row[i] * xf[i];
        logits_[v] = acc;
      }
      ++pos_;
    }

    std::size_t position() const { return pos_; }

   private:
    struct LayerState {
      std::vector<T> self_k, self_v;   // pos * width, appended per step
      std::vector<T> mem_k, mem_v;     // width * mem_len, column-major
      std::size_t mem_len = 0;
    };

    static void matvec_cols(const std::vector<T>& w, const std::vector<T>& b,
                            const std::vector<T>& x, std::size_t dout, std::size_t din,
                            std::size_t n, T* out) {
      for (std::size_t o = 0; o < dout; ++o) {
        for (std::size_t j = 0; j < n; ++j) {
          T acc = b.empty() ? T(0) : b[o];
          for (std::size_t i = 0; i < din; ++i) acc += w[o * din + i] * x[i * n + j];
          out[o * n + j] = acc;
        }
      }
    }

    void add_position_code(std::vector<T>& x, std::size_t pos) const {
      const std::size_t d = x.size();
      for (std::size_t i = 0; i < d; ++i) {
        const double rate = std::pow(10000.0, -double(i / 2 * 2) / double(d));
        const double angle = double(pos) * rate;
        x[i] += static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
      }
    }

    void layer_norm_col(std::vector<T>& x, const std::vector<T>& gamma,
                        const std::vector<T>& beta) const {
      const std::size_t d = x.size();
      T mean = T(0);
      for (T v : x) mean += v;
      mean /= static_cast<T>(d);
      T var = T(0);
      for (T v : x) var += (v - mean) * (v - mean);
      var /= static_cast<T>(d);
      const T inv = T(1) / std::sqrt(var + T(1e-5));
      for (std::size_t i = 0; i < d; ++i) x[i] = gamma[i] * (x[i] - mean) * inv + beta[i];
    }

    void matvec(const std::vector<T>& w, const std::vector<T>& b, const std::vector<T>& x,
                std::size_t dout, std::size_t din, std::vector<T>& out) const {
      out.assign(dout, T(0));
      for (std::size_t o = 0; o < dout; ++o) {
        T acc = b.empty() ? T(0) : b[o];
        const T* row = w.data() + o * din;
        for (std::size_t i = 0; i < din; ++i) acc += row[i] * x[i];
        out[o] = acc;
      }
    }

    // Attention of one query column against cached keys/values laid out as
    // [position][dim] (self cache) or [dim][position] (memory cache).
    void attend(const std::vector<T>& q, const std::vector<T>& keys, const std::vector<T>& vals,
                std::size_t len, bool column_major, std::vector<T>& out) const {
      const auto& cfg = dec_->cfg_;
      const std::size_t d = cfg.width;
      const std::size_t dh = d / cfg.heads;
      out.assign(d, T(0));
      std::vector<T> scores(len);
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        const std::size_t base = h * dh;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          T acc = T(0);
          for (std::size_t i = 0; i < dh; ++i) {
            const T k = column_major ? keys[(base + i) * len + j] : keys[j * d + base + i];
            acc += q[base + i] * k;
          }
          scores[j] = acc / std::sqrt(static_cast<T>(dh));
          mx = std::max(mx, scores[j]);
        }
        T denom = T(0);
        for (std::size_t j = 0; j < len; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          denom += scores[j];
        }
        for (std::size_t j = 0; j < len; ++j) {
          const T wj = scores[j] / denom;
          for (std::size_t i = 0; i < dh; ++i) {
            const T v = column_major ? vals[(base + i) * len + j] : vals[j * d + base + i];
            out[base + i] += wj * v;
          }
        }
      }
    }

    void layer_step(std::size_t l, std::vector<T>& x) {
      const auto& ly = dec_->layers_[l];
      auto& st = layer_state_[l];
      const std::size_t d = dec_->cfg_.width;

      std::vector<T> h = x;
      layer_norm_col(h, ly.ln1_gamma.values(), ly.ln1_beta.values());
      std::vector<T> q, k, v, att, o;
      matvec(ly.self_wq.values(), ly.self_bq.values(), h, d, d, q);
      matvec(ly.self_wk.values(), ly.self_bk.values(), h, d, d, k);
      matvec(ly.self_wv.values(), ly.self_bv.values(), h, d, d, v);
      st.self_k.insert(st.self_k.end(), k.begin(), k.end());
      st.self_v.insert(st.self_v.end(), v.begin(), v.end());
      const std::size_t len = st.self_k.size() / d;
      attend(q, st.self_k, st.self_v, len, /*column_major=*/false, att);
      matvec(ly.self_wo.values(), ly.self_bo.values(), att, d, d, o);
      for (std::size_t i = 0; i < d; ++i) x[i] += o[i];

      h = x;
      layer_norm_col(h, ly.ln2_gamma.values(), ly.ln2_beta.values());
      matvec(ly.cross_wq.values(), ly.cross_bq.values(), h, d, d, q);
      attend(q, st.mem_k, st.mem_v, st.mem_len, /*column_major=*/true, att);
      matvec(ly.cross_wo.values(), ly.cross_bo.values(), att, d, d, o);
      for (std::size_t i = 0; i < d; ++i) x[i] += o[i];

      h = x;
      layer_norm_col(h, ly.ln3_gamma.values(), ly.ln3_beta.values());
      std::vector<T> f1, f2;
      matvec(ly.ffn_w1.values(), ly.ffn_b1.values(), h, dec_->cfg_.ffn_width, d, f1);
      for (auto& vv : f1) vv = vv > T(0) ? vv : T(0);
      matvec(ly.ffn_w2.values(), ly.ffn_b2.values(), f1, d, dec_->cfg_.ffn_width, f2);
      for (std::size_t i = 0; i < d; ++i) x[i] += f2[i];
    }

    const ReportDecoder* dec_;
    std::vector<LayerState> layer_state_;
    std::vector<T> logits_;
    std::size_t pos_ = 0;
  };

  Session start_session(const Tensor<T>& feature, const PromptSequence& prompt) const {
    return Session(*this, feature, prompt);
  }

  GenerationResult generate(const Tensor<T>& feature, const PromptSequence& prompt) const;

 private:
  struct Layer {
    Layer(ParameterStore<T>& ps, const std::string& p, const DecoderConfig& cfg)
        : ln1_gamma(ps.create(p + ".ln1.gamma", {cfg.width}, Init::kOnes)),
          ln1_beta(ps.create(p + ".ln1.beta", {cfg.width}, Init::kZeros)),
          ln2_gamma(ps.create(p + ".ln2.gamma", {cfg.width}, Init::kOnes)),
          ln2_beta(ps.create(p + ".ln2.beta", {cfg.width}, Init::kZeros)),
          ln3_gamma(ps.create(p + ".ln3.gamma", {cfg.width}, Init::kOnes)),
          ln3_beta(ps.create(p + ".ln3.beta", {cfg.width}, Init::kZeros)),
          self_wq(ps.create(p + ".self.wq", {cfg.width, cfg.width}, Init::kKaiming)),
          self_bq(ps.create(p + ".self.bq", {cfg.width}, Init::kZeros)),
          self_wk(ps.create(p + ".self.wk", {cfg.width, cfg.width}, Init::kKaiming)),
          self_bk(ps.create(p + ".self.bk", {cfg.width}, Init::kZeros)),
          self_wv(ps.create(p + ".self.wv", {cfg.width, cfg.width}, Init::kKaiming)),
          self_bv(ps.create(p + ".self.bv", {cfg.width}, Init::kZeros)),
          self_wo(ps.create(p + ".self.wo", {cfg.width, cfg.width}, Init::kKaiming)),
          self_bo(ps.create(p + ".self.bo", {cfg.width}, Init::kZeros)),
          cross_wq(ps.create(p + ".cross.wq", {cfg.width, cfg.width}, Init::kKaiming)),
          cross_bq(ps.create(p + ".cross.bq", {cfg.width}, Init::kZeros)),
          cross_wk(ps.create(p + ".cross.wk", {cfg.width, cfg.width}, Init::kKaiming)),
          cross_bk(ps.create(p + ".cross.bk", {cfg.width}, Init::kZeros)),
          cross_wv(ps.create(p + ".cross.wv", {cfg.width, cfg.width}, Init::kKaiming)),
          cross_bv(ps.create(p + ".cross.bv", {cfg.width}, Init::kZeros)),
          cross_wo(ps.create(p + ".cross.wo", {cfg.width, cfg.width}, Init::kKaiming)),
          cross_bo(ps.create(p + ".cross.bo", {cfg.width}, Init::kZeros)),
          ffn_w1(ps.create(p + ".ffn.w1", {cfg.ffn_width, cfg.width}, Init::kKaiming)),
          ffn_b1(ps.create(p + ".ffn.b1", {cfg.ffn_width}, Init::kZeros)),
          ffn_w2(ps.create(p + ".ffn.w2", {cfg.width, cfg.ffn_width}, Init::kKaiming)),
          ffn_b2(ps.create(p + ".ffn.b2", {cfg.width}, Init::kZeros)) {}

    Tensor<T> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta, ln3_gamma, ln3_beta;
    Tensor<T> self_wq, self_bq, self_wk, self_bk, self_wv, self_bv, self_wo, self_bo;
    Tensor<T> cross_wq, cross_bq, cross_wk, cross_bk, cross_wv, cross_bv, cross_wo, cross_bo;
    Tensor<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };

  // Multi-head attention on the taped path. q, k, v are (D, Lq/Lk); the
  // optional additive mask is (Lq, Lk).
  Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                      const Tensor<T>& mask) const {
    const std::size_t d = cfg_.width;
    const std::size_t dh = d / cfg_.heads;
    const std::size_t lq = q.extent(1);
    std::vector<Tensor<T>> heads;
    heads.reserve(cfg_.heads);
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      Tensor<T> qh = slice(q, 0, h * dh, dh);
      Tensor<T> kh = slice(k, 0, h * dh, dh);
      Tensor<T> vh = slice(v, 0, h * dh, dh);
      Tensor<T> scores =
          scale(matmul(transpose(qh), kh), T(1) / std::sqrt(static_cast<T>(dh)));
      if (mask.defined()) scores = add(scores, mask);
      Tensor<T> weights = softmax(scores, 1);
      heads.push_back(matmul(weights, transpose(vh)));  // (Lq, dh)
    }
    Tensor<T> cat = concat<T>(1, heads);  // (Lq, D)
    (void)lq;
    return transpose(cat);  // (D, Lq)
  }

  Tensor<T> causal_mask(std::size_t len) const {
    std::vector<T> m(len * len, T(0));
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = i + 1; j < len; ++j) m[i * len + j] = T(-1e9);
    return Tensor<T>::from_data({len, len}, std::move(m));
  }

  // Full-sequence hidden states (D, L) for the given input ids.
  Tensor<T> forward_hidden(const Tensor<T>& feature, const std::vector<std::size_t>& ids) const {
    const std::size_t c = feature.extent(0);
    const std::size_t s = feature.size() / c;
    Tensor<T> mem = mem_proj_.forward(reshape(feature, {c, s}));
    const std::size_t len = ids.size();
    Tensor<T> x = add(gather_cols(emb_, ids), detail::sinusoidal_codes<T>(cfg_.width, len));
    Tensor<T> mask = causal_mask(len);
    for (const Layer& ly : layers_) {
      Tensor<T> h = layer_norm(x, ly.ln1_gamma, ly.ln1_beta, T(1e-5));
      Tensor<T> att = attention(conv1x1(h, ly.self_wq, ly.self_bq),
                                conv1x1(h, ly.self_wk, ly.self_bk),
                                conv1x1(h, ly.self_wv, ly.self_bv), mask);
      x = add(x, conv1x1(att, ly.self_wo, ly.self_bo));

      h = layer_norm(x, ly.ln2_gamma, ly.ln2_beta, T(1e-5));
      Tensor<T> catt = attention(conv1x1(h, ly.cross_wq, ly.cross_bq),
                                 conv1x1(mem, ly.cross_wk, ly.cross_bk),
                                 conv1x1(mem, ly.cross_wv, ly.cross_bv), Tensor<T>{});
      x = add(x, conv1x1(catt, ly.cross_wo, ly.cross_bo));

      h = layer_norm(x, ly.ln3_gamma, ly.ln3_beta, T(1e-5));
      Tensor<T> f = conv1x1(relu(conv1x1(h, ly.ffn_w1, ly.ffn_b1)), ly.ffn_w2, ly.ffn_b2);
      x = add(x, f);
    }
    return x;
  }

  DecoderConfig cfg_;
  std::size_t vocab_size_ = 0;
  Tensor<T> emb_;
  Conv1x1Layer<T> mem_proj_;
  std::vector<Layer> layers_;
  LayerNormLayer<T> final_norm_;
  Tensor<T> head_w_, head_b_;
};

// Combined training objective: L = lm + w * (ce_cur + ce_prior), with the
// prior term contributing zero when the sample has no prior.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& lm, const Tensor<T>& ce_cur,
                     const std::optional<Tensor<T>>& ce_prior, T w) {
  if (w <= T(0)) {
    if (w < T(0)) throw std::invalid_argument("total_loss: w must be non-negative");
  }
  Tensor<T> ce = ce_prior ? add(ce_cur, *ce_prior) : ce_cur;
  return add(lm, scale(ce, w));
}

// ---------------------------------------------------------------------------
// beam search over any incremental scorer session
// ---------------------------------------------------------------------------

// Session requirements: logits() -> const std::vector<T>&, feed(token).
// Sessions are forked by copy. Finished hypotheses' scores include the EOS
// step; reported logprobs cover emitted tokens only. Ties break toward the
// lower token id, then toward the earlier hypothesis.
template <typename T, typename Session>
GenerationResult beam_search(const Session& initial, std::size_t beam_width, std::size_t max_len,
                             std::size_t eos_id) {
  struct Hyp {
    Session session;
    std::vector<std::size_t> tokens;
    std::vector<double> logprobs;
    double score = 0.0;
  };
  struct Finished {
    std::vector<std::size_t> tokens;
    std::vector<double> logprobs;
    double score;
    StopReason reason;
  };

  std::vector<Hyp> open;
  open.push_back(Hyp{initial, {}, {}, 0.0});
  std::vector<Finished> finished;

  for (std::size_t step = 0; step < max_len && !open.empty(); ++step) {
    struct Cand {
      std::size_t hyp;
      std::size_t token;
      double logprob;
      double score;
    };
    std::vector<Cand> cands;
    for (std::size_t hi = 0; hi < open.size(); ++hi) {
      const std::vector<T>& logits = open[hi].session.logits();
      // stable log-softmax
      double mx = -std::numeric_limits<double>::infinity();
      for (T v : logits) mx = std::max(mx, double(v));
      double denom = 0.0;
      for (T v : logits) denom += std::exp(double(v) - mx);
      const double lse = mx + std::log(denom);
      for (std::size_t tok = 0; tok < logits.size(); ++tok) {
        const double lp = double(logits[tok]) - lse;
        cands.push_back({hi, tok, lp, open[hi].score + lp});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.hyp < b.hyp;
    });
    if (cands.size() > beam_width) cands.resize(beam_width);

    std::vector<Hyp> next;
    for (const Cand& c : cands) {
      if (c.token == eos_id) {
        finished.push_back(
            {open[c.hyp].tokens, open[c.hyp].logprobs, c.score, StopReason::kEos});
        continue;
      }
      Hyp h = open[c.hyp];
      h.session.feed(c.token);
      h.tokens.push_back(c.token);
      h.logprobs.push_back(c.logprob);
      h.score = c.score;
      next.push_back(std::move(h));
    }
    open = std::move(next);
    if (finished.size() >= beam_width) break;
  }
  for (const Hyp& h : open) {
    finished.push_back({h.tokens, h.logprobs, h.score, StopReason::kLengthLimit});
  }

  const Finished* best = &finished.front();
  for (const Finished& f : finished) {
    if (f.score > best->score) best = &f;
  }
  GenerationResult result;
  result.tokens = best->tokens;
  result.logprobs = best->logprobs;
  result.terminated_by = best->reason;
  return result;
}

template <typename T>
GenerationResult ReportDecoder<T>::generate(const Tensor<T>& feature,
                                            const PromptSequence& prompt) const {
  Session session = start_session(feature, prompt);
  if (cfg_.beam_width == 1) {
    // Greedy fast path; identical to beam width 1 by construction of the
    // shared scoring rules (verified by test).
    GenerationResult result;
    for (std::size_t step = 0; step < cfg_.max_gen_len; ++step) {
      const std::vector<T>& logits = session.logits();
      std::size_t best = 0;
      for (std::size_t tok = 1; tok < logits.size(); ++tok) {
        if (logits[tok] > logits[best]) best = tok;
      }
      double mx = -std::numeric_limits<double>::infinity();
      for (T v : logits) mx = std::max(mx, double(v));
      double denom = 0.0;
      for (T v : logits) denom += std::exp(double(v) - mx);
      const double lp = double(logits[best]) - (mx + std::log(denom));
      if (best == Vocabulary::kEos) {
        result.terminated_by = StopReason::kEos;
        return result;
      }
      session.feed(best);
      result.tokens.push_back(best);
      result.logprobs.push_back(lp);
    }
    result.terminated_by = StopReason::kLengthLimit;
    return result;
  }
  return beam_search<T, Session>(session, cfg_.beam_width, cfg_.max_gen_len, Vocabulary::kEos);
}

}  // namespace ddatr
