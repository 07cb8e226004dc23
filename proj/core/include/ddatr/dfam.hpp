#pragma once

// Dynamic Feature Alignment Module. Per stage, prior image features attend
// over the prior report's token features (image as queries, text as keys
// and values), the attended map is fused multiplicatively with a projection
// of the image feature, and a zero-initialized tanh gate scales the result.
// The caller adds the output residually, so at initialization the module is
// an exact identity on that path.

#include <string>

#include "ddatr/params.hpp"

namespace ddatr {

class MissingPriorTextError : public std::runtime_error {
 public:
  MissingPriorTextError() : std::runtime_error("alignment requires a non-empty prior text feature") {}
};

template <typename T>
class Dfam {
 public:
  Dfam() = default;

  Dfam(ParameterStore<T>& ps, const std::string& prefix, std::size_t channels,
       std::size_t text_channels)
      : channels_(channels),
        proj_q_(ps, prefix + ".pq", channels, channels),
        norm_q_(ps, prefix + ".pq_norm", channels),
        proj_k_(ps, prefix + ".pk", channels, text_channels),
        proj_v_(ps, prefix + ".pv", channels, text_channels),
        proj_t_(ps, prefix + ".pt", channels, channels),
        norm_t_(ps, prefix + ".pt_norm", channels),
        proj_a_(ps, prefix + ".pa", channels, channels),
        proj_f_(ps, prefix + ".pf", channels, channels),
        gate_b1_(ps, prefix + ".b1", channels, channels) {
    // The gate's tanh block starts at zero so the module begins as identity
    // on the residual path.
    gate_b2_w_ = ps.create(prefix + ".b2.w", {channels, channels}, Init::kZeros);
    gate_b2_b_ = ps.create(prefix + ".b2.b", {channels}, Init::kZeros);
  }

  // Scaled dot-product attention of image pixels over text tokens.
  // feature: (C, H, W); text: (C_txt, L). Returns the attended map as
  // (C, H, W) after the output projection and its normalization.
  Tensor<T> align_attention(const Tensor<T>& feature, const Tensor<T>& text) const {
    if (!text.defined() || text.extent(1) == 0) throw MissingPriorTextError();
    const std::size_t c = feature.extent(0);
    const std::size_t h = feature.extent(1), w = feature.extent(2);
    const std::size_t hw = h * w;

    Tensor<T> flat = reshape(feature, {c, hw});
    Tensor<T> q = instance_norm(proj_q_.forward(flat), norm_q_.gamma, norm_q_.beta, T(1e-5));
    Tensor<T> k = proj_k_.forward(text);  // (C, L)
    Tensor<T> v = proj_v_.forward(text);  // (C, L)

    // softmax(Q^T K / sqrt(C)) over the token axis, then weights * V^T
    Tensor<T> scores = scale(matmul(transpose(q), k), T(1) / std::sqrt(static_cast<T>(c)));
    Tensor<T> weights = softmax(scores, 1);               // (HW, L)
    Tensor<T> attended = matmul(weights, transpose(v));   // (HW, C)
    Tensor<T> att_map = reshape(transpose(attended), {c, h, w});
    return norm_t_.forward(proj_t_.forward(att_map));
  }

  // F_fa = P^f(P^a(flat feature) * attended); gated output
  // F_align = tanh(B2(relu(B1(F_fa)))) * F_fa, reshaped to (C, H, W).
  Tensor<T> fuse_and_gate(const Tensor<T>& feature, const Tensor<T>& attended,
                          bool dynamic_fusion = true) const {
    const std::size_t c = feature.extent(0);
    const std::size_t h = feature.extent(1), w = feature.extent(2);
    Tensor<T> flat = reshape(feature, {c, h * w});
    Tensor<T> att_flat = reshape(attended, {c, h * w});
    Tensor<T> fa = relu(proj_f_.forward(mul(relu(proj_a_.forward(flat)), att_flat)));
    if (!dynamic_fusion) return reshape(fa, {c, h, w});  // gate as pass-through multiplier of 1
    Tensor<T> gate = tanh_op(conv1x1(relu(gate_b1_.forward(fa)), gate_b2_w_, gate_b2_b_));
    return reshape(mul(gate, fa), {c, h, w});
  }

  // Full module: F_align. The caller applies the residual connection.
  Tensor<T> forward(const Tensor<T>& feature, const Tensor<T>& text,
                    bool dynamic_fusion = true) const {
    return fuse_and_gate(feature, align_attention(feature, text), dynamic_fusion);
  }

  std::size_t channels() const { return channels_; }

 private:
  std::size_t channels_ = 0;
  Conv1x1Layer<T> proj_q_;
  InstanceNormLayer<T> norm_q_;
  Conv1x1Layer<T> proj_k_;
  Conv1x1Layer<T> proj_v_;
  Conv1x1Layer<T> proj_t_;
  InstanceNormLayer<T> norm_t_;
  Conv1x1Layer<T> proj_a_;
  Conv1x1Layer<T> proj_f_;
  Conv1x1Layer<T> gate_b1_;
  Tensor<T> gate_b2_w_, gate_b2_b_;
};

}  // namespace ddatr
