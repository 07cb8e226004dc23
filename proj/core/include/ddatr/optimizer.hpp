#pragma once

// AdamW: adaptive moments with decoupled weight decay. One group for every
// trainable parameter; the frozen text encoder never registers, so it never
// appears here.

#include <vector>

#include "ddatr/config.hpp"
#include "ddatr/params.hpp"

namespace ddatr {

template <typename T>
class AdamW {
 public:
  AdamW() = default;

  AdamW(ParameterStore<T>& store, const OptimizerConfig& cfg) : store_(&store), cfg_(cfg) {
    moments_.resize(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
      const std::size_t n = store.entries()[i].tensor.size();
      moments_[i].m.assign(n, T(0));
      moments_[i].v.assign(n, T(0));
    }
  }

  // Applies one update from the gradients currently accumulated in the
  // store, then leaves the gradients untouched (the caller zeroes them).
  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t i = 0; i < store_->count(); ++i) {
      Tensor<T> param = store_->entries()[i].tensor;
      const std::vector<T> grad = param.grad();
      auto& m = moments_[i].m;
      auto& v = moments_[i].v;
      auto& w = param.values();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double g = double(grad[j]);
        const double mj = cfg_.beta1 * double(m[j]) + (1.0 - cfg_.beta1) * g;
        const double vj = cfg_.beta2 * double(v[j]) + (1.0 - cfg_.beta2) * g * g;
        m[j] = T(mj);
        v[j] = T(vj);
        const double mhat = mj / bc1;
        const double vhat = vj / bc2;
        w[j] = T(double(w[j]) -
                 cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * double(w[j])));
      }
    }
  }

  std::uint64_t step_count() const { return t_; }
  void set_step_count(std::uint64_t t) { t_ = t; }

  struct Moments {
    std::vector<T> m, v;
  };
  std::vector<Moments>& moments() { return moments_; }
  const std::vector<Moments>& moments() const { return moments_; }

 private:
  ParameterStore<T>* store_ = nullptr;
  OptimizerConfig cfg_;
  std::vector<Moments> moments_;
  std::uint64_t t_ = 0;
};

}  // namespace ddatr
