#pragma once

// Named trainable parameter registry plus the small layer building blocks
// shared by the encoder and decoder. Each parameter is seeded from
// (run seed, parameter name), so init is independent of construction order.

#include <map>
#include <string>
#include <vector>

#include "ddatr/ops.hpp"
#include "ddatr/rng.hpp"
#include "ddatr/tensor.hpp"

namespace ddatr {

enum class Init { kZeros, kOnes, kKaiming, kNormalSmall };

template <typename T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : seed_(seed) {}

  Tensor<T> create(const std::string& name, Shape shape, Init init) {
    if (index_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    Tensor<T> t = Tensor<T>::zeros(shape, /*requires_grad=*/true);
    initialize(t, init, derive_seed(seed_, name));
    index_[name] = entries_.size();
    entries_.push_back({name, t});
    return t;
  }

  Tensor<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
    return entries_[it->second].tensor;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t count() const { return entries_.size(); }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static void initialize(Tensor<T>& t, Init init, std::uint64_t seed) {
    Rng rng(seed);
    auto& v = t.values();
    switch (init) {
      case Init::kZeros:
        break;
      case Init::kOnes:
        for (auto& x : v) x = T(1);
        break;
      case Init::kKaiming: {
        // fan_in = product of every non-leading extent
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < t.rank(); ++i) fan_in *= t.shape()[i];
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in ? fan_in : 1));
        for (auto& x : v) x = static_cast<T>(rng.normal(0.0, std_dev));
        break;
      }
      case Init::kNormalSmall:
        for (auto& x : v) x = static_cast<T>(rng.normal(0.0, 0.1));
        break;
    }
  }

  std::uint64_t seed_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dLayer {
  Tensor<T> w, b;
  std::size_t stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParameterStore<T>& ps, const std::string& name, std::size_t cout, std::size_t cin,
              std::size_t k, std::size_t stride_, std::size_t pad_, Init init = Init::kKaiming)
      : w(ps.create(name + ".w", {cout, cin, k, k}, init)),
        b(ps.create(name + ".b", {cout}, Init::kZeros)),
        stride(stride_),
        pad(pad_) {}

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <typename T>
struct Conv1x1Layer {
  Tensor<T> w, b;

  Conv1x1Layer() = default;
  Conv1x1Layer(ParameterStore<T>& ps, const std::string& name, std::size_t cout, std::size_t cin,
               Init init = Init::kKaiming)
      : w(ps.create(name + ".w", {cout, cin}, init)), b(ps.create(name + ".b", {cout}, Init::kZeros)) {}

  Tensor<T> forward(const Tensor<T>& x) const { return conv1x1(x, w, b); }
};

template <typename T>
struct InstanceNormLayer {
  Tensor<T> gamma, beta;

  InstanceNormLayer() = default;
  InstanceNormLayer(ParameterStore<T>& ps, const std::string& name, std::size_t channels)
      : gamma(ps.create(name + ".gamma", {channels}, Init::kOnes)),
        beta(ps.create(name + ".beta", {channels}, Init::kZeros)) {}

  Tensor<T> forward(const Tensor<T>& x) const { return instance_norm(x, gamma, beta, T(1e-5)); }
};

template <typename T>
struct LayerNormLayer {
  Tensor<T> gamma, beta;

  LayerNormLayer() = default;
  LayerNormLayer(ParameterStore<T>& ps, const std::string& name, std::size_t dim)
      : gamma(ps.create(name + ".gamma", {dim}, Init::kOnes)),
        beta(ps.create(name + ".beta", {dim}, Init::kZeros)) {}

  Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, T(1e-5)); }
};

}  // namespace ddatr
