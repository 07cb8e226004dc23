#pragma once

// Dynamic Difference-aware Module. Both stage features are texture-enhanced
// by learnable-descriptor convolutions, a signed per-pixel saliency map is
// computed from their difference, the saliency-weighted features are
// concatenated and projected, and a zero-initialized tanh gate controls how
// much difference signal is added onto the current branch.

#include <string>

#include "ddatr/params.hpp"

namespace ddatr {

// 3x3 convolution with a learnable-descriptor branch: the same kernel is
// applied to central-difference patches (each neighbor minus the patch
// center) and blended in with a per-output-channel coefficient theta.
//   y = conv(x, W) + theta * (conv(x, W) - conv1x1(x, sum_k W)) + bias
template <typename T>
class LdConv {
 public:
  LdConv() = default;

  LdConv(ParameterStore<T>& ps, const std::string& prefix, std::size_t channels)
      : channels_(channels),
        w_(ps.create(prefix + ".w", {channels, channels, 3, 3}, Init::kKaiming)),
        bias_(ps.create(prefix + ".b", {channels}, Init::kZeros)),
        theta_(ps.create(prefix + ".theta", {channels}, Init::kZeros)) {
    for (auto& v : theta_.values()) v = T(0.1);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.extent(0) != channels_) throw ShapeError("ldconv", x.shape(), w_.shape());
    const std::size_t h = x.extent(1), w = x.extent(2);
    Tensor<T> base = conv2d(x, w_, Tensor<T>{}, 1, 1);
    // Center responses: the kernel summed over its taps acts as a 1x1 conv.
    Tensor<T> wsum = sum_axes(w_, {2, 3});
    Tensor<T> center = conv1x1(x, wsum);
    Tensor<T> cd = sub(base, center);
    Tensor<T> theta_map = broadcast(reshape(theta_, {channels_, 1, 1}), {channels_, h, w});
    Tensor<T> bias_map = broadcast(reshape(bias_, {channels_, 1, 1}), {channels_, h, w});
    return add(add(base, mul(theta_map, cd)), bias_map);
  }

  const Tensor<T>& kernel() const { return w_; }
  const Tensor<T>& theta() const { return theta_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  std::size_t channels_ = 0;
  Tensor<T> w_, bias_, theta_;
};

template <typename T>
class Ddam {
 public:
  Ddam() = default;

  Ddam(ParameterStore<T>& ps, const std::string& prefix, std::size_t channels)
      : channels_(channels),
        ldc_cur_(ps, prefix + ".ldc_c", channels),
        ldc_prior_(ps, prefix + ".ldc_p", channels),
        proj_d_(ps, prefix + ".pd", channels, 2 * channels),
        gate_in_(ps, prefix + ".dy1", channels, channels) {
    gate_out_w_ = ps.create(prefix + ".dy2.w", {channels, channels}, Init::kZeros);
    gate_out_b_ = ps.create(prefix + ".dy2.b", {channels}, Init::kZeros);
  }

  // F_pd: sigmoid of the channel-mean difference, one saliency value per
  // pixel, strictly inside (0,1).
  Tensor<T> pixel_difference(const Tensor<T>& enhanced_cur, const Tensor<T>& enhanced_prior) const {
    if (enhanced_cur.shape() != enhanced_prior.shape()) {
      throw ShapeError("pixel_difference", enhanced_cur.shape(), enhanced_prior.shape());
    }
    return sigmoid(channel_mean(sub(enhanced_cur, enhanced_prior)));
  }

  // F_da = P^d(Cat(F_enc * F_pd, F_enp * F_pd)) with the saliency map
  // broadcast over channels.
  Tensor<T> difference_amplify(const Tensor<T>& enhanced_cur, const Tensor<T>& enhanced_prior,
                               const Tensor<T>& saliency) const {
    const Shape& s = enhanced_cur.shape();
    Tensor<T> sal = broadcast(saliency, s);
    Tensor<T> cat = concat<T>(0, {mul(enhanced_cur, sal), mul(enhanced_prior, sal)});
    return relu(proj_d_.forward(cat));
  }

  // F_cur + gate(F_da) * F_da when a prior exists; the no-prior case is
  // handled by the caller skipping this module entirely.
  Tensor<T> forward(const Tensor<T>& cur, const Tensor<T>& prior_aligned,
                    bool dynamic_fusion = true) const {
    if (!prior_aligned.defined()) {
      throw std::logic_error("ddam: prior feature missing despite has_prior");
    }
    if (cur.shape() != prior_aligned.shape()) {
      throw ShapeError("ddam", cur.shape(), prior_aligned.shape());
    }
    Tensor<T> enc = ldc_cur_.forward(cur);
    Tensor<T> enp = ldc_prior_.forward(prior_aligned);
    Tensor<T> pd = pixel_difference(enc, enp);
    Tensor<T> da = difference_amplify(enc, enp, pd);
    if (!dynamic_fusion) return add(cur, da);  // gate as pass-through multiplier of 1
    Tensor<T> dy = tanh_op(conv1x1(relu(gate_in_.forward(da)), gate_out_w_, gate_out_b_));
    return add(cur, mul(dy, da));
  }

  const LdConv<T>& ldc_cur() const { return ldc_cur_; }
  const LdConv<T>& ldc_prior() const { return ldc_prior_; }

 private:
  std::size_t channels_ = 0;
  LdConv<T> ldc_cur_;
  LdConv<T> ldc_prior_;
  Conv1x1Layer<T> proj_d_;
  Conv1x1Layer<T> gate_in_;
  Tensor<T> gate_out_w_, gate_out_b_;
};

}  // namespace ddatr
