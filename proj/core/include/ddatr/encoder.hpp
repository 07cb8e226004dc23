#pragma once

// Longitudinal visual encoder: two stage-wise backbone branches, text
// alignment on the prior branch, difference-aware fusion into the current
// branch, residual connections at every stage, and two classifier heads.
// Temporal information flows strictly prior -> current: the prior branch is
// computed first and never sees a current-branch tensor.

#include <optional>
#include <string>
#include <vector>

#include "ddatr/backbone.hpp"
#include "ddatr/ddam.hpp"
#include "ddatr/dfam.hpp"
#include "ddatr/labels.hpp"
#include "ddatr/params.hpp"
#include "ddatr/text_encoder.hpp"

namespace ddatr {

template <typename T>
struct EncoderOutput {
  Tensor<T> cur_feature;                  // \hat F_cur at the final stage
  std::optional<Tensor<T>> prior_feature; // \hat F_prior at the final stage
  Tensor<T> cur_logits;                   // (14, 4)
  std::optional<Tensor<T>> prior_logits;  // (14, 4)
  LabelVector predicted{};                // argmax over the current logits
};

template <typename T>
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(ParameterStore<T>& ps, const std::string& prefix, std::size_t in_channels)
      : in_channels_(in_channels),
        w_(ps.create(prefix + ".w", {kNumFindings * kNumAttributes, in_channels}, Init::kKaiming)),
        b_(ps.create(prefix + ".b", {kNumFindings * kNumAttributes}, Init::kZeros)) {}

  // Global-average-pooled feature -> linear -> (14, 4) logits.
  Tensor<T> forward(const Tensor<T>& final_stage_feature) const {
    if (final_stage_feature.extent(0) != in_channels_) {
      throw ShapeError("classifier", final_stage_feature.shape(), {in_channels_});
    }
    Tensor<T> pooled = reshape(global_avg_pool(final_stage_feature), {in_channels_, 1});
    Tensor<T> logits = conv1x1(pooled, w_, b_);
    return reshape(logits, {kNumFindings, kNumAttributes});
  }

 private:
  std::size_t in_channels_ = 0;
  Tensor<T> w_, b_;
};

template <typename T>
LabelVector argmax_labels(const Tensor<T>& logits) {
  if (logits.shape() != Shape{kNumFindings, kNumAttributes}) {
    throw ShapeError("argmax_labels", logits.shape(), {kNumFindings, kNumAttributes});
  }
  LabelVector out{};
  for (std::size_t d = 0; d < kNumFindings; ++d) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < kNumAttributes; ++a) {
      if (logits.values()[d * kNumAttributes + a] > logits.values()[d * kNumAttributes + best]) {
        best = a;
      }
    }
    out[d] = static_cast<Attribute>(best);
  }
  return out;
}

// Mean over findings of the per-finding cross-entropy between the softmaxed
// logit row and the gold attribute.
template <typename T>
Tensor<T> classification_loss(const Tensor<T>& logits, const LabelVector& gold) {
  if (logits.shape() != Shape{kNumFindings, kNumAttributes}) {
    throw ShapeError("classification_loss", logits.shape(), {kNumFindings, kNumAttributes});
  }
  std::vector<std::size_t> targets(kNumFindings);
  for (std::size_t d = 0; d < kNumFindings; ++d) targets[d] = static_cast<std::size_t>(gold[d]);
  // cross_entropy_columns consumes (V, N) column-major classes
  return cross_entropy_columns(transpose(logits), targets);
}

template <typename T>
class LongitudinalEncoder {
 public:
  LongitudinalEncoder() = default;

  LongitudinalEncoder(ParameterStore<T>& ps, const BackboneConfig& backbone_cfg,
                      std::size_t text_channels, FusionConfig fusion = {},
                      bool share_branches = false)
      : cfg_(backbone_cfg),
        fusion_(fusion),
        prior_branch_(ps, "enc.prior", backbone_cfg),
        cur_branch_(share_branches ? Backbone<T>() : Backbone<T>(ps, "enc.cur", backbone_cfg)),
        share_branches_(share_branches),
        cur_head_(ps, "enc.head_cur", backbone_cfg.channels.back()),
        prior_head_(ps, "enc.head_prior", backbone_cfg.channels.back()) {
    dfams_.reserve(cfg_.stages);
    ddams_.reserve(cfg_.stages);
    for (std::size_t m = 1; m <= cfg_.stages; ++m) {
      dfams_.emplace_back(ps, "enc.dfam" + std::to_string(m), cfg_.channels[m - 1], text_channels);
      ddams_.emplace_back(ps, "enc.ddam" + std::to_string(m), cfg_.channels[m - 1]);
    }
  }

  struct Inputs {
    Tensor<T> current_image;
    std::optional<Tensor<T>> prior_image;
    std::optional<Tensor<T>> prior_text;  // F_txt, (C_txt, L)
  };

  EncoderOutput<T> encode(const Inputs& in) const {
    const bool has_prior_image = in.prior_image.has_value();
    const bool has_prior_text = in.prior_text.has_value();
    if (has_prior_image != has_prior_text) {
      throw std::invalid_argument(
          "encoder: prior image and prior report must both be present or both absent");
    }
    const bool has_prior = has_prior_image;

    EncoderOutput<T> out;

    // Prior branch first; it must not depend on anything current.
    std::vector<Tensor<T>> prior_stage_outputs;  // \hat F_prior per stage
    if (has_prior) {
      Tensor<T> x = *in.prior_image;
      for (std::size_t m = 1; m <= cfg_.stages; ++m) {
        Tensor<T> f = prior_branch_.stage_forward(m, x);
        if (fusion_.alignment && fuse_at_stage(m)) {
          Tensor<T> aligned = dfams_[m - 1].forward(f, *in.prior_text, fusion_.dynamic_fusion);
          f = add(f, aligned);
        }
        prior_stage_outputs.push_back(f);
        x = f;
      }
      out.prior_feature = prior_stage_outputs.back();
      out.prior_logits = prior_head_.forward(*out.prior_feature);
    }

    const Backbone<T>& cur = share_branches_ ? prior_branch_ : cur_branch_;
    Tensor<T> x = in.current_image;
    for (std::size_t m = 1; m <= cfg_.stages; ++m) {
      Tensor<T> f = cur.stage_forward(m, x);
      if (has_prior && fusion_.difference && fuse_at_stage(m)) {
        f = ddams_[m - 1].forward(f, prior_stage_outputs[m - 1], fusion_.dynamic_fusion);
      }
      x = f;
    }
    out.cur_feature = x;
    out.cur_logits = cur_head_.forward(out.cur_feature);
    out.predicted = argmax_labels(out.cur_logits);
    return out;
  }

  Tensor<T> classify(const Tensor<T>& final_feature, bool prior_head) const {
    const Shape want{cfg_.channels.back(), cfg_.stage_height(cfg_.stages),
                     cfg_.stage_width(cfg_.stages)};
    if (final_feature.shape() != want) {
      throw ShapeError("classify: not a final-stage feature", final_feature.shape(), want);
    }
    return prior_head ? prior_head_.forward(final_feature) : cur_head_.forward(final_feature);
  }

  const BackboneConfig& backbone_config() const { return cfg_; }
  const FusionConfig& fusion_config() const { return fusion_; }
  const Dfam<T>& dfam(std::size_t m) const { return dfams_.at(m - 1); }
  const Ddam<T>& ddam(std::size_t m) const { return ddams_.at(m - 1); }
  const Backbone<T>& prior_branch() const { return prior_branch_; }
  const Backbone<T>& cur_branch() const { return share_branches_ ? prior_branch_ : cur_branch_; }

 private:
  bool fuse_at_stage(std::size_t m) const { return fusion_.multi_stage || m == cfg_.stages; }

  BackboneConfig cfg_;
  FusionConfig fusion_;
  Backbone<T> prior_branch_;
  Backbone<T> cur_branch_;
  bool share_branches_ = false;
  std::vector<Dfam<T>> dfams_;
  std::vector<Ddam<T>> ddams_;
  ClassifierHead<T> cur_head_;
  ClassifierHead<T> prior_head_;
};

}  // namespace ddatr
