#pragma once

// Primitive tensor operations with reverse-mode rules.
//
// Every primitive computes its forward value eagerly and, when a tape is
// installed and any input requires grad, records one entry whose closure
// scatters d(out) into the inputs' accumulators. Elementwise binary ops
// require exactly matching shapes; mixing shapes goes through an explicit
// broadcast().

#include <algorithm>
#include <cmath>
#include <cstring>
#include <initializer_list>
#include <vector>

#include "ddatr/tensor.hpp"

namespace ddatr {

namespace detail {

template <typename T>
void check_finite(const char* op, const Tensor<T>& t) {
  if (!strict_nonfinite_checks()) return;
  for (T v : t.values()) {
    if (!std::isfinite(static_cast<double>(v))) throw NonFiniteError(op);
  }
}

template <typename T>
bool any_requires_grad(std::initializer_list<Tensor<T>> ts) {
  for (const auto& t : ts) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

// Creates the output tensor and records the tape entry when needed.
template <typename T, typename BackwardFn>
Tensor<T> emit(const char* op, Shape out_shape, std::vector<T> out_values,
               std::initializer_list<Tensor<T>> inputs, BackwardFn&& bw) {
  const bool rg = any_requires_grad(inputs);
  Tensor<T> out = Tensor<T>::from_data(std::move(out_shape), std::move(out_values), rg);
  Tape<T>* tape = Tape<T>::current();
  if (tape && rg) {
    typename Tape<T>::Entry e;
    e.op = op;
    for (const auto& t : inputs) {
      if (t.defined()) e.inputs.push_back(t.node());
    }
    e.output = out.node();
    auto out_node = out.node();
    e.backward = [fn = std::forward<BackwardFn>(bw), out_node]() { fn(out_node->grad); };
    tape->record(std::move(e));
  }
  return out;
}

template <typename T>
void accum(const Tensor<T>& t, const std::vector<T>& g) {
  const_cast<Tensor<T>&>(t).accumulate_grad(g.data(), g.size());
}

inline std::size_t axis_extents(const Shape& s, std::size_t axis, std::size_t& outer,
                                std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  return s[axis];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add", a.shape(), b.shape());
  detail::check_finite("add", a);
  detail::check_finite("add", b);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::emit<T>("add", a.shape(), std::move(out), {a, b}, [a, b](const std::vector<T>& g) {
    detail::accum(a, g);
    detail::accum(b, g);
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("sub", a.shape(), b.shape());
  detail::check_finite("sub", a);
  detail::check_finite("sub", b);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return detail::emit<T>("sub", a.shape(), std::move(out), {a, b}, [a, b](const std::vector<T>& g) {
    detail::accum(a, g);
    std::vector<T> gb(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
    detail::accum(b, gb);
  });
}

// Element-wise (Hadamard) product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul", a.shape(), b.shape());
  detail::check_finite("mul", a);
  detail::check_finite("mul", b);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::emit<T>("mul", a.shape(), std::move(out), {a, b}, [a, b](const std::vector<T>& g) {
    std::vector<T> ga(g.size()), gb(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] = g[i] * b.values()[i];
      gb[i] = g[i] * a.values()[i];
    }
    detail::accum(a, ga);
    detail::accum(b, gb);
  });
}

// Multiplication by a plain scalar constant. Combined with a constant 0/1
// mask tensor through mul() this covers masked scaling.
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  detail::check_finite("scale", a);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  return detail::emit<T>("scale", a.shape(), std::move(out), {a}, [a, c](const std::vector<T>& g) {
    std::vector<T> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * c;
    detail::accum(a, ga);
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  detail::check_finite("relu", a);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > T(0) ? a.values()[i] : T(0);
  auto on = out;  // keep a copy for the derivative mask
  return detail::emit<T>("relu", a.shape(), std::move(out), {a},
                         [a, on = std::move(on)](const std::vector<T>& g) {
                           std::vector<T> ga(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] = on[i] > T(0) ? g[i] : T(0);
                           detail::accum(a, ga);
                         });
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
  detail::check_finite("tanh", a);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
  auto on = out;
  return detail::emit<T>("tanh", a.shape(), std::move(out), {a},
                         [a, on = std::move(on)](const std::vector<T>& g) {
                           std::vector<T> ga(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] = g[i] * (T(1) - on[i] * on[i]);
                           detail::accum(a, ga);
                         });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  detail::check_finite("sigmoid", a);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a.values()[i];
    out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  }
  auto on = out;
  return detail::emit<T>("sigmoid", a.shape(), std::move(out), {a},
                         [a, on = std::move(on)](const std::vector<T>& g) {
                           std::vector<T> ga(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] = g[i] * on[i] * (T(1) - on[i]);
                           detail::accum(a, ga);
                         });
}

// ---------------------------------------------------------------------------
// shape manipulation
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape target) {
  if (numel(target) != a.size()) throw ShapeError("reshape", a.shape(), target);
  std::vector<T> out = a.values();
  return detail::emit<T>("reshape", std::move(target), std::move(out), {a},
                         [a](const std::vector<T>& g) { detail::accum(a, g); });
}

// 2-D transpose.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose", "expects rank-2, got " + shape_str(a.shape()));
  const std::size_t m = a.extent(0), n = a.extent(1);
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  return detail::emit<T>("transpose", {n, m}, std::move(out), {a},
                         [a, m, n](const std::vector<T>& g) {
                           std::vector<T> ga(m * n);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) ga[i * n + j] = g[j * m + i];
                           detail::accum(a, ga);
                         });
}

// Numpy-style broadcast: the source shape is right-aligned against the
// target; every aligned extent must match or be 1. Backward sum-reduces
// over the expanded axes.
template <typename T>
Tensor<T> broadcast(const Tensor<T>& a, Shape target) {
  const Shape& src = a.shape();
  if (src.size() > target.size()) throw ShapeError("broadcast", src, target);
  Shape padded(target.size(), 1);
  std::copy(src.begin(), src.end(), padded.begin() + (target.size() - src.size()));
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (padded[i] != target[i] && padded[i] != 1) throw ShapeError("broadcast", src, target);
  }
  const std::size_t rank = target.size();
  std::vector<std::size_t> tstride(rank, 1), sstride(rank, 0);
  for (std::size_t i = rank; i-- > 1;) tstride[i - 1] = tstride[i] * target[i];
  std::size_t acc = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sstride[i] = (padded[i] == 1) ? 0 : acc;
    acc *= padded[i];
  }
  const std::size_t n = numel(target);
  std::vector<T> out(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rem = idx, sidx = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      const std::size_t c = rem / tstride[i];
      rem %= tstride[i];
      sidx += c * sstride[i];
    }
    out[idx] = a.values()[sidx];
  }
  return detail::emit<T>("broadcast", target, std::move(out), {a},
                         [a, target, tstride, sstride, rank](const std::vector<T>& g) {
                           std::vector<T> ga(a.size(), T(0));
                           for (std::size_t idx = 0; idx < g.size(); ++idx) {
                             std::size_t rem = idx, sidx = 0;
                             for (std::size_t i = 0; i < rank; ++i) {
                               const std::size_t c = rem / tstride[i];
                               rem %= tstride[i];
                               sidx += c * sstride[i];
                             }
                             ga[sidx] += g[idx];
                           }
                           detail::accum(a, ga);
                         });
}

template <typename T>
Tensor<T> concat(std::size_t axis, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat", "no inputs");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) throw ShapeError("concat", "axis out of range");
  Shape out_shape = ref;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) throw ShapeError("concat", ref, p.shape());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i != axis && p.shape()[i] != ref[i]) throw ShapeError("concat", ref, p.shape());
    }
    detail::check_finite("concat", p);
    total += p.extent(axis);
  }
  out_shape[axis] = total;

  std::size_t outer, inner;
  detail::axis_extents(ref, axis, outer, inner);
  std::vector<T> out(numel(out_shape));
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t na = p.extent(axis);
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = p.values().data() + o * na * inner;
      T* dst = out.data() + (o * total + off) * inner;
      std::copy(src, src + na * inner, dst);
    }
    off += na;
  }

  auto parts_copy = parts;
  const bool rg = std::any_of(parts.begin(), parts.end(),
                              [](const Tensor<T>& t) { return t.requires_grad(); });
  Tensor<T> out_t = Tensor<T>::from_data(std::move(out_shape), std::move(out), rg);
  Tape<T>* tape = Tape<T>::current();
  if (tape && rg) {
    typename Tape<T>::Entry e;
    e.op = "concat";
    for (const auto& p : parts) e.inputs.push_back(p.node());
    e.output = out_t.node();
    auto out_node = out_t.node();
    e.backward = [parts_copy, out_node, axis, outer, inner, total]() {
      const std::vector<T>& g = out_node->grad;
      std::size_t off2 = 0;
      for (const auto& p : parts_copy) {
        const std::size_t na = p.extent(axis);
        std::vector<T> gp(p.size());
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = g.data() + (o * total + off2) * inner;
          std::copy(src, src + na * inner, gp.data() + o * na * inner);
        }
        detail::accum(p, gp);
        off2 += na;
      }
    };
    tape->record(std::move(e));
  }
  return out_t;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t len) {
  if (axis >= a.rank()) throw ShapeError("slice", "axis out of range");
  if (start + len > a.extent(axis)) throw ShapeError("slice", "range exceeds extent");
  std::size_t outer, inner;
  const std::size_t na = detail::axis_extents(a.shape(), axis, outer, inner);
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::vector<T> out(numel(out_shape));
  for (std::size_t o = 0; o < outer; ++o) {
    const T* src = a.values().data() + (o * na + start) * inner;
    std::copy(src, src + len * inner, out.data() + o * len * inner);
  }
  return detail::emit<T>("slice", std::move(out_shape), std::move(out), {a},
                         [a, axis, start, len, outer, inner, na](const std::vector<T>& g) {
                           std::vector<T> ga(a.size(), T(0));
                           for (std::size_t o = 0; o < outer; ++o) {
                             const T* src = g.data() + o * len * inner;
                             std::copy(src, src + len * inner,
                                       ga.data() + (o * na + start) * inner);
                           }
                           detail::accum(a, ga);
                         });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

namespace detail {

// C(m,n) += A(m,k) * B(k,n), ikj order.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m,n) += A(k,m)^T * B(k,n)
template <typename T>
void gemm_at_b(const T* a, const T* b, T* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m,k) += A(m,n) * B(k,n)^T
template <typename T>
void gemm_a_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T s = T(0);
      for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      c[i * k + p] += s;
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul", a.shape(), b.shape());
  }
  detail::check_finite("matmul", a);
  detail::check_finite("matmul", b);
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  std::vector<T> out(m * n, T(0));
  detail::gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  return detail::emit<T>("matmul", {m, n}, std::move(out), {a, b},
                         [a, b, m, k, n](const std::vector<T>& g) {
                           if (a.requires_grad()) {
                             std::vector<T> ga(m * k, T(0));
                             detail::gemm_a_bt(g.data(), b.values().data(), ga.data(), m, n, k);
                             detail::accum(a, ga);
                           }
                           if (b.requires_grad()) {
                             std::vector<T> gb(k * n, T(0));
                             detail::gemm_at_b(a.values().data(), g.data(), gb.data(), m, k, n);
                             detail::accum(b, gb);
                           }
                         });
}

// 1x1 convolution: a per-position linear map over the channel axis.
// x may be (Cin, N) or (Cin, H, W); w is (Cout, Cin); bias (Cout) optional
// (pass an undefined Tensor to skip).
template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias = {}) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("conv1x1", "input must be rank 2 or 3, got " + shape_str(x.shape()));
  }
  if (w.rank() != 2 || w.extent(1) != x.extent(0)) throw ShapeError("conv1x1", w.shape(), x.shape());
  const std::size_t cin = x.extent(0);
  const std::size_t cout = w.extent(0);
  const std::size_t spatial = x.size() / cin;
  if (bias.defined() && (bias.rank() != 1 || bias.extent(0) != cout)) {
    throw ShapeError("conv1x1", w.shape(), bias.shape());
  }
  detail::check_finite("conv1x1", x);
  detail::check_finite("conv1x1", w);

  Shape out_shape = x.shape();
  out_shape[0] = cout;
  std::vector<T> out(cout * spatial, T(0));
  detail::gemm_acc(w.values().data(), x.values().data(), out.data(), cout, cin, spatial);
  if (bias.defined()) {
    for (std::size_t c = 0; c < cout; ++c) {
      const T bv = bias.values()[c];
      T* row = out.data() + c * spatial;
      for (std::size_t i = 0; i < spatial; ++i) row[i] += bv;
    }
  }
  return detail::emit<T>(
      "conv1x1", std::move(out_shape), std::move(out), {x, w, bias},
      [x, w, bias, cin, cout, spatial](const std::vector<T>& g) {
        if (x.requires_grad()) {
          std::vector<T> gx(cin * spatial, T(0));
          detail::gemm_at_b(w.values().data(), g.data(), gx.data(), cout, cin, spatial);
          detail::accum(x, gx);
        }
        if (w.requires_grad()) {
          std::vector<T> gw(cout * cin, T(0));
          detail::gemm_a_bt(g.data(), x.values().data(), gw.data(), cout, spatial, cin);
          detail::accum(w, gw);
        }
        if (bias.defined() && bias.requires_grad()) {
          std::vector<T> gb(cout, T(0));
          for (std::size_t c = 0; c < cout; ++c) {
            const T* row = g.data() + c * spatial;
            T s = T(0);
            for (std::size_t i = 0; i < spatial; ++i) s += row[i];
            gb[c] = s;
          }
          detail::accum(bias, gb);
        }
      });
}

// 2-D convolution on a single (C,H,W) plane stack. Weight is
// (Cout, Cin, kh, kw); bias (Cout) optional. Zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::size_t stride,
                 std::size_t pad) {
  if (x.rank() != 3) throw ShapeError("conv2d", "input must be rank 3, got " + shape_str(x.shape()));
  if (w.rank() != 4 || w.extent(1) != x.extent(0)) throw ShapeError("conv2d", w.shape(), x.shape());
  if (stride == 0) throw ShapeError("conv2d", "stride must be positive");
  const std::size_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const std::size_t cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (h + 2 * pad < kh || wd + 2 * pad < kw) throw ShapeError("conv2d", x.shape(), w.shape());
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (wd + 2 * pad - kw) / stride + 1;
  if (bias.defined() && (bias.rank() != 1 || bias.extent(0) != cout)) {
    throw ShapeError("conv2d", w.shape(), bias.shape());
  }
  detail::check_finite("conv2d", x);
  detail::check_finite("conv2d", w);

  std::vector<T> out(cout * oh * ow, T(0));
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  for (std::size_t oc = 0; oc < cout; ++oc) {
    T* oplane = out.data() + oc * oh * ow;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const T* xplane = xv + ic * h * wd;
      const T* ker = wv + (oc * cin + ic) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T kval = ker[ky * kw + kx];
          if (kval == T(0)) continue;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* xrow = xplane + iy * wd;
            T* orow = oplane + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
              orow[ox] += kval * xrow[ix];
            }
          }
        }
      }
    }
    if (bias.defined()) {
      const T bv = bias.values()[oc];
      for (std::size_t i = 0; i < oh * ow; ++i) oplane[i] += bv;
    }
  }

  return detail::emit<T>(
      "conv2d", {cout, oh, ow}, std::move(out), {x, w, bias},
      [x, w, bias, cin, h, wd, cout, kh, kw, oh, ow, stride, pad](const std::vector<T>& g) {
        const T* xv = x.values().data();
        const T* wv = w.values().data();
        if (x.requires_grad()) {
          std::vector<T> gx(cin * h * wd, T(0));
          for (std::size_t oc = 0; oc < cout; ++oc) {
            const T* gplane = g.data() + oc * oh * ow;
            for (std::size_t ic = 0; ic < cin; ++ic) {
              T* gxplane = gx.data() + ic * h * wd;
              const T* ker = wv + (oc * cin + ic) * kh * kw;
              for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const T kval = ker[ky * kw + kx];
                  if (kval == T(0)) continue;
                  for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const T* grow = gplane + oy * ow;
                    T* gxrow = gxplane + iy * wd;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                      const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                static_cast<std::ptrdiff_t>(pad);
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                      gxrow[ix] += kval * grow[ox];
                    }
                  }
                }
              }
            }
          }
          detail::accum(x, gx);
        }
        if (w.requires_grad()) {
          std::vector<T> gw(cout * cin * kh * kw, T(0));
          for (std::size_t oc = 0; oc < cout; ++oc) {
            const T* gplane = g.data() + oc * oh * ow;
            for (std::size_t ic = 0; ic < cin; ++ic) {
              const T* xplane = xv + ic * h * wd;
              T* gker = gw.data() + (oc * cin + ic) * kh * kw;
              for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  T s = T(0);
                  for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const T* grow = gplane + oy * ow;
                    const T* xrow = xplane + iy * wd;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                      const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                static_cast<std::ptrdiff_t>(pad);
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                      s += grow[ox] * xrow[ix];
                    }
                  }
                  gker[ky * kw + kx] += s;
                }
              }
            }
          }
          detail::accum(w, gw);
        }
        if (bias.defined() && bias.requires_grad()) {
          std::vector<T> gb(cout, T(0));
          for (std::size_t oc = 0; oc < cout; ++oc) {
            const T* gplane = g.data() + oc * oh * ow;
            T s = T(0);
            for (std::size_t i = 0; i < oh * ow; ++i) s += gplane[i];
            gb[oc] = s;
          }
          detail::accum(bias, gb);
        }
      });
}

// ---------------------------------------------------------------------------
// reductions and normalizations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  detail::check_finite("sum", a);
  T s = T(0);
  for (T v : a.values()) s += v;
  return detail::emit<T>("sum", {1}, {s}, {a}, [a](const std::vector<T>& g) {
    std::vector<T> ga(a.size(), g[0]);
    detail::accum(a, ga);
  });
}

// Sum over an axis set given as a sorted list of axes; used for reducing
// convolution kernels over their spatial taps.
template <typename T>
Tensor<T> sum_axes(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
  Shape out_shape;
  std::vector<bool> reduced(a.rank(), false);
  for (std::size_t ax : axes) {
    if (ax >= a.rank()) throw ShapeError("sum_axes", "axis out of range");
    reduced[ax] = true;
  }
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (!reduced[i]) out_shape.push_back(a.shape()[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  const std::size_t rank = a.rank();
  std::vector<std::size_t> stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) stride[i - 1] = stride[i] * a.shape()[i];
  std::vector<std::size_t> ostride;
  {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < rank; ++i)
      if (!reduced[i]) kept.push_back(a.shape()[i]);
    ostride.assign(kept.size(), 1);
    for (std::size_t i = kept.size(); i-- > 1;) ostride[i - 1] = ostride[i] * kept[i];
  }
  const std::size_t n = a.size();
  std::vector<T> out(numel(out_shape), T(0));
  std::vector<std::size_t> omap(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rem = idx, oidx = 0, k = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      const std::size_t c = rem / stride[i];
      rem %= stride[i];
      if (!reduced[i]) oidx += c * ostride[k++];
    }
    omap[idx] = oidx;
    out[oidx] += a.values()[idx];
  }
  return detail::emit<T>("sum_axes", std::move(out_shape), std::move(out), {a},
                         [a, omap = std::move(omap)](const std::vector<T>& g) {
                           std::vector<T> ga(a.size());
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = g[omap[i]];
                           detail::accum(a, ga);
                         });
}

// Mean over every non-channel axis: (C,...) -> (C).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("global_avg_pool", "expects rank >= 2");
  const std::size_t c = x.extent(0);
  const std::size_t spatial = x.size() / c;
  std::vector<T> out(c, T(0));
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* row = x.values().data() + ch * spatial;
    T s = T(0);
    for (std::size_t i = 0; i < spatial; ++i) s += row[i];
    out[ch] = s / static_cast<T>(spatial);
  }
  return detail::emit<T>("global_avg_pool", {c}, std::move(out), {x},
                         [x, c, spatial](const std::vector<T>& g) {
                           std::vector<T> gx(x.size());
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             const T gv = g[ch] / static_cast<T>(spatial);
                             T* row = gx.data() + ch * spatial;
                             for (std::size_t i = 0; i < spatial; ++i) row[i] = gv;
                           }
                           detail::accum(x, gx);
                         });
}

// Per-pixel mean over channels: (C,H,W) -> (1,H,W).
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  if (x.rank() != 3) throw ShapeError("channel_mean", "expects rank 3");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t hw = h * w;
  std::vector<T> out(hw, T(0));
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* row = x.values().data() + ch * hw;
    for (std::size_t i = 0; i < hw; ++i) out[i] += row[i];
  }
  const T inv = T(1) / static_cast<T>(c);
  for (std::size_t i = 0; i < hw; ++i) out[i] *= inv;
  return detail::emit<T>("channel_mean", {1, h, w}, std::move(out), {x},
                         [x, c, hw, inv](const std::vector<T>& g) {
                           std::vector<T> gx(x.size());
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             T* row = gx.data() + ch * hw;
                             for (std::size_t i = 0; i < hw; ++i) row[i] = g[i] * inv;
                           }
                           detail::accum(x, gx);
                         });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  if (axis >= a.rank()) throw ShapeError("softmax", "axis out of range");
  detail::check_finite("softmax", a);
  std::size_t outer, inner;
  const std::size_t n = detail::axis_extents(a.shape(), axis, outer, inner);
  std::vector<T> out(a.size());
  const T* av = a.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = av[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, av[base + i * inner]);
      T denom = T(0);
      for (std::size_t i = 0; i < n; ++i) {
        const T e = std::exp(av[base + i * inner] - mx);
        out[base + i * inner] = e;
        denom += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= denom;
    }
  }
  auto saved = out;
  return detail::emit<T>("softmax", a.shape(), std::move(out), {a},
                         [a, saved = std::move(saved), outer, inner, n](const std::vector<T>& g) {
                           std::vector<T> ga(g.size());
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t in = 0; in < inner; ++in) {
                               const std::size_t base = o * n * inner + in;
                               T dot = T(0);
                               for (std::size_t i = 0; i < n; ++i)
                                 dot += g[base + i * inner] * saved[base + i * inner];
                               for (std::size_t i = 0; i < n; ++i) {
                                 const std::size_t k = base + i * inner;
                                 ga[k] = saved[k] * (g[k] - dot);
                               }
                             }
                           }
                           detail::accum(a, ga);
                         });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis) {
  if (axis >= a.rank()) throw ShapeError("log_softmax", "axis out of range");
  detail::check_finite("log_softmax", a);
  std::size_t outer, inner;
  const std::size_t n = detail::axis_extents(a.shape(), axis, outer, inner);
  std::vector<T> out(a.size());
  const T* av = a.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = av[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, av[base + i * inner]);
      T denom = T(0);
      for (std::size_t i = 0; i < n; ++i) denom += std::exp(av[base + i * inner] - mx);
      const T lse = mx + std::log(denom);
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] = av[base + i * inner] - lse;
    }
  }
  auto saved = out;
  return detail::emit<T>("log_softmax", a.shape(), std::move(out), {a},
                         [a, saved = std::move(saved), outer, inner, n](const std::vector<T>& g) {
                           std::vector<T> ga(g.size());
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t in = 0; in < inner; ++in) {
                               const std::size_t base = o * n * inner + in;
                               T gsum = T(0);
                               for (std::size_t i = 0; i < n; ++i) gsum += g[base + i * inner];
                               for (std::size_t i = 0; i < n; ++i) {
                                 const std::size_t k = base + i * inner;
                                 ga[k] = g[k] - std::exp(saved[k]) * gsum;
                               }
                             }
                           }
                           detail::accum(a, ga);
                         });
}

namespace detail {

// Shared normalization core: statistics over contiguous groups of `n`
// values spaced `inner` apart, affine per group-index or per-lane.
template <typename T>
struct NormSaved {
  std::vector<T> xhat;
  std::vector<T> inv_std;
};

}  // namespace detail

// Instance normalization over a (C, ...) tensor: per-channel statistics over
// all remaining axes, eps inside the square root, optional per-channel
// affine (gamma, beta of shape (C)).
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma = {}, const Tensor<T>& beta = {},
                        T eps = T(1e-5)) {
  if (x.rank() < 2) throw ShapeError("instance_norm", "expects rank >= 2");
  const std::size_t c = x.extent(0);
  const std::size_t n = x.size() / c;
  if (gamma.defined() && (gamma.rank() != 1 || gamma.extent(0) != c))
    throw ShapeError("instance_norm", x.shape(), gamma.shape());
  if (beta.defined() && (beta.rank() != 1 || beta.extent(0) != c))
    throw ShapeError("instance_norm", x.shape(), beta.shape());
  detail::check_finite("instance_norm", x);

  std::vector<T> out(x.size());
  auto saved = std::make_shared<detail::NormSaved<T>>();
  saved->xhat.resize(x.size());
  saved->inv_std.resize(c);
  const T* xv = x.values().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* row = xv + ch * n;
    T mean = T(0);
    for (std::size_t i = 0; i < n; ++i) mean += row[i];
    mean /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<T>(n);
    const T inv_std = T(1) / std::sqrt(var + eps);
    saved->inv_std[ch] = inv_std;
    const T g = gamma.defined() ? gamma.values()[ch] : T(1);
    const T b = beta.defined() ? beta.values()[ch] : T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T xh = (row[i] - mean) * inv_std;
      saved->xhat[ch * n + i] = xh;
      out[ch * n + i] = g * xh + b;
    }
  }
  return detail::emit<T>(
      "instance_norm", x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, saved, c, n](const std::vector<T>& g) {
        const T invn = T(1) / static_cast<T>(n);
        if (x.requires_grad()) {
          std::vector<T> gx(x.size());
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T gam = gamma.defined() ? gamma.values()[ch] : T(1);
            const T* grow = g.data() + ch * n;
            const T* xh = saved->xhat.data() + ch * n;
            T sum_g = T(0), sum_gx = T(0);
            for (std::size_t i = 0; i < n; ++i) {
              sum_g += grow[i];
              sum_gx += grow[i] * xh[i];
            }
            const T k = gam * saved->inv_std[ch];
            for (std::size_t i = 0; i < n; ++i) {
              gx[ch * n + i] = k * (grow[i] - invn * sum_g - xh[i] * invn * sum_gx);
            }
          }
          detail::accum(x, gx);
        }
        if (gamma.defined() && gamma.requires_grad()) {
          std::vector<T> gg(c, T(0));
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T* grow = g.data() + ch * n;
            const T* xh = saved->xhat.data() + ch * n;
            T s = T(0);
            for (std::size_t i = 0; i < n; ++i) s += grow[i] * xh[i];
            gg[ch] = s;
          }
          detail::accum(gamma, gg);
        }
        if (beta.defined() && beta.requires_grad()) {
          std::vector<T> gb(c, T(0));
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T* grow = g.data() + ch * n;
            T s = T(0);
            for (std::size_t i = 0; i < n; ++i) s += grow[i];
            gb[ch] = s;
          }
          detail::accum(beta, gb);
        }
      });
}

// Layer normalization over a (D, L) tensor: per-column statistics over the
// channel axis, affine per channel.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
  if (x.rank() != 2) throw ShapeError("layer_norm", "expects rank 2, got " + shape_str(x.shape()));
  const std::size_t d = x.extent(0), l = x.extent(1);
  if (gamma.rank() != 1 || gamma.extent(0) != d) throw ShapeError("layer_norm", x.shape(), gamma.shape());
  if (beta.rank() != 1 || beta.extent(0) != d) throw ShapeError("layer_norm", x.shape(), beta.shape());
  detail::check_finite("layer_norm", x);

  std::vector<T> out(x.size());
  auto saved = std::make_shared<detail::NormSaved<T>>();
  saved->xhat.resize(x.size());
  saved->inv_std.resize(l);
  const T* xv = x.values().data();
  for (std::size_t j = 0; j < l; ++j) {
    T mean = T(0);
    for (std::size_t i = 0; i < d; ++i) mean += xv[i * l + j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t i = 0; i < d; ++i) {
      const T dv = xv[i * l + j] - mean;
      var += dv * dv;
    }
    var /= static_cast<T>(d);
    const T inv_std = T(1) / std::sqrt(var + eps);
    saved->inv_std[j] = inv_std;
    for (std::size_t i = 0; i < d; ++i) {
      const T xh = (xv[i * l + j] - mean) * inv_std;
      saved->xhat[i * l + j] = xh;
      out[i * l + j] = gamma.values()[i] * xh + beta.values()[i];
    }
  }
  return detail::emit<T>(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, saved, d, l](const std::vector<T>& g) {
        const T invd = T(1) / static_cast<T>(d);
        if (x.requires_grad()) {
          std::vector<T> gx(x.size());
          for (std::size_t j = 0; j < l; ++j) {
            T sum_g = T(0), sum_gx = T(0);
            for (std::size_t i = 0; i < d; ++i) {
              const T gh = g[i * l + j] * gamma.values()[i];
              sum_g += gh;
              sum_gx += gh * saved->xhat[i * l + j];
            }
            for (std::size_t i = 0; i < d; ++i) {
              const T gh = g[i * l + j] * gamma.values()[i];
              gx[i * l + j] = saved->inv_std[j] *
                              (gh - invd * sum_g - saved->xhat[i * l + j] * invd * sum_gx);
            }
          }
          detail::accum(x, gx);
        }
        if (gamma.requires_grad()) {
          std::vector<T> gg(d, T(0));
          for (std::size_t i = 0; i < d; ++i) {
            T s = T(0);
            for (std::size_t j = 0; j < l; ++j) s += g[i * l + j] * saved->xhat[i * l + j];
            gg[i] = s;
          }
          detail::accum(gamma, gg);
        }
        if (beta.requires_grad()) {
          std::vector<T> gb(d, T(0));
          for (std::size_t i = 0; i < d; ++i) {
            T s = T(0);
            for (std::size_t j = 0; j < l; ++j) s += g[i * l + j];
            gb[i] = s;
          }
          detail::accum(beta, gb);
        }
      });
}

// ---------------------------------------------------------------------------
// indexed access
// ---------------------------------------------------------------------------

// Embedding lookup: table (D, V), ids length L -> (D, L).
template <typename T>
Tensor<T> gather_cols(const Tensor<T>& table, const std::vector<std::size_t>& ids) {
  if (table.rank() != 2) throw ShapeError("gather_cols", "table must be rank 2");
  const std::size_t d = table.extent(0), v = table.extent(1), l = ids.size();
  for (std::size_t id : ids) {
    if (id >= v) throw ShapeError("gather_cols", "id " + std::to_string(id) + " out of range");
  }
  std::vector<T> out(d * l);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < l; ++j) out[i * l + j] = table.values()[i * v + ids[j]];
  return detail::emit<T>("gather_cols", {d, l}, std::move(out), {table},
                         [table, ids, d, v, l](const std::vector<T>& g) {
                           std::vector<T> gt(d * v, T(0));
                           for (std::size_t i = 0; i < d; ++i)
                             for (std::size_t j = 0; j < l; ++j)
                               gt[i * v + ids[j]] += g[i * l + j];
                           detail::accum(table, gt);
                         });
}

// Picks x[ids[j], j] from a (V, N) tensor -> (N).
template <typename T>
Tensor<T> pick_per_column(const Tensor<T>& x, const std::vector<std::size_t>& ids) {
  if (x.rank() != 2) throw ShapeError("pick_per_column", "expects rank 2");
  const std::size_t v = x.extent(0), n = x.extent(1);
  if (ids.size() != n) throw ShapeError("pick_per_column", "one id per column required");
  for (std::size_t id : ids) {
    if (id >= v) throw ShapeError("pick_per_column", "id out of range");
  }
  std::vector<T> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = x.values()[ids[j] * n + j];
  return detail::emit<T>("pick_per_column", {n}, std::move(out), {x},
                         [x, ids, v, n](const std::vector<T>& g) {
                           std::vector<T> gx(v * n, T(0));
                           for (std::size_t j = 0; j < n; ++j) gx[ids[j] * n + j] += g[j];
                           detail::accum(x, gx);
                         });
}

// ---------------------------------------------------------------------------
// small conveniences built on the primitives
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

// Mean cross-entropy of one-hot targets against columns of a (V, N) logit
// matrix.
template <typename T>
Tensor<T> cross_entropy_columns(const Tensor<T>& logits, const std::vector<std::size_t>& targets) {
  Tensor<T> ls = log_softmax(logits, 0);
  Tensor<T> picked = pick_per_column(ls, targets);
  return scale(sum(picked), -T(1) / static_cast<T>(targets.size()));
}

}  // namespace ddatr
