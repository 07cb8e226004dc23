#pragma once

// Multi-stage convolutional visual encoder. Each stage halves the spatial
// extent: 3x3 conv -> instance norm -> relu -> stride-2 3x3 conv ->
// instance norm -> relu. The prior and current branches instantiate this
// architecture with separate parameter storage unless sharing is
// explicitly configured.

#include <string>
#include <vector>

#include "ddatr/params.hpp"

namespace ddatr {

// Which stages run the per-stage fusion modules, and in what shape.
struct FusionConfig {
  bool multi_stage = true;     // off: align/difference only at the final stage
  bool alignment = true;       // off: prior branch runs without text alignment
  bool difference = true;      // off: current branch never sees the prior
  bool dynamic_fusion = true;  // off: both gates become pass-through
};

struct BackboneConfig {
  std::size_t stages = 4;
  std::vector<std::size_t> channels = {16, 32, 64, 128};
  std::size_t input_channels = 1;
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  std::size_t downsample = 2;  // per-stage spatial factor

  void validate() const {
    if (stages < 2) throw std::invalid_argument("backbone: need at least 2 stages");
    if (channels.size() != stages) throw std::invalid_argument("backbone: one width per stage");
    std::size_t h = input_height, w = input_width;
    for (std::size_t m = 0; m < stages; ++m) {
      if (channels[m] == 0) throw std::invalid_argument("backbone: zero width");
      h /= downsample;
      w /= downsample;
    }
    if (h == 0 || w == 0) throw std::invalid_argument("backbone: input too small for stage count");
  }

  std::size_t stage_height(std::size_t m) const {  // m in 1..stages
    std::size_t h = input_height;
    for (std::size_t i = 0; i < m; ++i) h /= downsample;
    return h;
  }
  std::size_t stage_width(std::size_t m) const {
    std::size_t w = input_width;
    for (std::size_t i = 0; i < m; ++i) w /= downsample;
    return w;
  }
};

template <typename T>
class BackboneStage {
 public:
  BackboneStage() = default;
  BackboneStage(ParameterStore<T>& ps, const std::string& prefix, std::size_t cin, std::size_t cout,
                std::size_t stride)
      : conv1_(ps, prefix + ".conv1", cout, cin, 3, 1, 1),
        norm1_(ps, prefix + ".norm1", cout),
        conv2_(ps, prefix + ".conv2", cout, cout, 3, stride, 1),
        norm2_(ps, prefix + ".norm2", cout) {}

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = relu(norm1_.forward(conv1_.forward(x)));
    return relu(norm2_.forward(conv2_.forward(h)));
  }

 private:
  Conv2dLayer<T> conv1_;
  InstanceNormLayer<T> norm1_;
  Conv2dLayer<T> conv2_;
  InstanceNormLayer<T> norm2_;
};

template <typename T>
class Backbone {
 public:
  Backbone() = default;

  // `branch` names the parameter namespace, e.g. "prior" or "cur".
  Backbone(ParameterStore<T>& ps, const std::string& branch, const BackboneConfig& cfg)
      : cfg_(cfg), branch_(branch) {
    cfg.validate();
    stages_.reserve(cfg.stages);
    std::size_t cin = cfg.input_channels;
    for (std::size_t m = 0; m < cfg.stages; ++m) {
      stages_.emplace_back(ps, branch + ".stage" + std::to_string(m + 1), cin, cfg.channels[m],
                           cfg.downsample);
      cin = cfg.channels[m];
    }
  }

  // One encoder stage; stage_index is 1-based. Stage 1 consumes the raw
  // image, later stages consume the (fused) output of the previous stage.
  Tensor<T> stage_forward(std::size_t stage_index, const Tensor<T>& input) const {
    if (stage_index == 0 || stage_index > stages_.size()) {
      throw std::invalid_argument("backbone: stage index out of range");
    }
    check_stage_input(stage_index, input);
    return stages_[stage_index - 1].forward(input);
  }

  std::size_t num_stages() const { return stages_.size(); }
  const BackboneConfig& config() const { return cfg_; }

 private:
  void check_stage_input(std::size_t m, const Tensor<T>& input) const {
    Shape want;
    if (m == 1) {
      want = {cfg_.input_channels, cfg_.input_height, cfg_.input_width};
    } else {
      want = {cfg_.channels[m - 2], cfg_.stage_height(m - 1), cfg_.stage_width(m - 1)};
    }
    if (input.shape() != want) {
      throw ShapeError(branch_ + " stage " + std::to_string(m), input.shape(), want);
    }
  }

  BackboneConfig cfg_;
  std::string branch_;
  std::vector<BackboneStage<T>> stages_;
};

}  // namespace ddatr
