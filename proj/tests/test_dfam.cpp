#include <doctest.h>

#include <cmath>

#include "ddatr/dfam.hpp"
#include "ddatr/gradcheck.hpp"
#include "ddatr/rng.hpp"

using namespace ddatr;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> data(numel(shape));
  for (auto& v : data) v = rng.normal(0.0, scale);
  return Tensor<double>::from_data(std::move(shape), std::move(data));
}

// Scalar conv1x1: y = W x (+ b) applied per position of a (C, N) matrix.
std::vector<double> lin(const std::vector<double>& w, const std::vector<double>& b,
                        const std::vector<double>& x, std::size_t cout, std::size_t cin,
                        std::size_t n) {
  std::vector<double> y(cout * n, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = b.empty() ? 0.0 : b[o];
      for (std::size_t i = 0; i < cin; ++i) acc += w[o * cin + i] * x[i * n + j];
      y[o * n + j] = acc;
    }
  return y;
}

void inorm(std::vector<double>& x, const std::vector<double>& gamma,
           const std::vector<double>& beta, std::size_t c, std::size_t n) {
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < n; ++i) mean += x[ch * n + i];
    mean /= double(n);
    for (std::size_t i = 0; i < n; ++i) var += (x[ch * n + i] - mean) * (x[ch * n + i] - mean);
    var /= double(n);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t i = 0; i < n; ++i)
      x[ch * n + i] = gamma[ch] * (x[ch * n + i] - mean) * inv + beta[ch];
  }
}

}  // namespace

TEST_CASE("single token attention copies the projected value everywhere") {
  ParameterStore<double> ps(1);
  Dfam<double> dfam(ps, "dfam", 6, 8);
  auto feature = random_tensor({6, 3, 3}, 2);
  auto text = random_tensor({8, 1}, 3);  // L = 1

  auto att = dfam.align_attention(feature, text);
  // With one key the softmax weight is exactly 1, so pre-projection rows are
  // all the single projected value column; after P^t + norm, all pixels are
  // still identical because the input to P^t is spatially constant.
  REQUIRE(att.shape() == Shape{6, 3, 3});
  for (std::size_t c = 0; c < 6; ++c) {
    const double first = att.values()[c * 9];
    for (std::size_t i = 1; i < 9; ++i) CHECK(att.values()[c * 9 + i] == doctest::Approx(first));
  }
}

TEST_CASE("identical tokens give uniform attention weights") {
  ParameterStore<double> ps(4);
  Dfam<double> dfam(ps, "dfam", 4, 5);
  auto feature = random_tensor({4, 2, 2}, 5);
  Rng rng(6);
  std::vector<double> col(5);
  for (auto& v : col) v = rng.normal(0.0, 1.0);
  std::vector<double> text(5 * 3);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) text[i * 3 + j] = col[i];
  auto ftxt = Tensor<double>::from_data({5, 3}, std::move(text));

  // All keys identical -> each pixel's weights are 1/L -> the attended map
  // equals the single-token case built from the same column.
  auto att_many = dfam.align_attention(feature, ftxt);
  auto att_one =
      dfam.align_attention(feature, Tensor<double>::from_data({5, 1}, std::move(col)));
  for (std::size_t i = 0; i < att_many.size(); ++i) {
    CHECK(att_many.values()[i] == doctest::Approx(att_one.values()[i]).epsilon(1e-9));
  }
}

TEST_CASE("attention matches the explicit pixel/token loop oracle") {
  const std::size_t C = 8, H = 4, W = 4, CT = 6, L = 5;
  ParameterStore<double> ps(0);
  Dfam<double> dfam(ps, "dfam", C, CT);
  auto feature = random_tensor({C, H, W}, 10);
  auto text = random_tensor({CT, L}, 11);

  auto got = dfam.align_attention(feature, text);

  // Oracle: explicit projections, exp/normalize per pixel, weighted value
  // sum, output projection and normalization, all with scalar loops.
  const std::size_t HW = H * W;
  auto q = lin(ps.get("dfam.pq.w").values(), ps.get("dfam.pq.b").values(), feature.values(), C, C, HW);
  inorm(q, ps.get("dfam.pq_norm.gamma").values(), ps.get("dfam.pq_norm.beta").values(), C, HW);
  auto k = lin(ps.get("dfam.pk.w").values(), ps.get("dfam.pk.b").values(), text.values(), C, CT, L);
  auto v = lin(ps.get("dfam.pv.w").values(), ps.get("dfam.pv.b").values(), text.values(), C, CT, L);

  std::vector<double> attended(HW * C, 0.0);
  for (std::size_t p = 0; p < HW; ++p) {
    std::vector<double> logits(L, 0.0);
    for (std::size_t t = 0; t < L; ++t) {
      double dot = 0;
      for (std::size_t c = 0; c < C; ++c) dot += q[c * HW + p] * k[c * L + t];
      logits[t] = dot / std::sqrt(double(C));
    }
    double mx = logits[0];
    for (double lv : logits) mx = std::max(mx, lv);
    double denom = 0;
    std::vector<double> wts(L);
    for (std::size_t t = 0; t < L; ++t) {
      wts[t] = std::exp(logits[t] - mx);
      denom += wts[t];
    }
    double wsum = 0;
    for (std::size_t t = 0; t < L; ++t) {
      wts[t] /= denom;
      wsum += wts[t];
    }
    CHECK(std::abs(wsum - 1.0) < 1e-6);  // weights normalize per pixel
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0;
      for (std::size_t t = 0; t < L; ++t) acc += wts[t] * v[c * L + t];
      attended[p * C + c] = acc;
    }
  }
  // transpose (HW, C) -> (C, HW), then P^t and its normalization
  std::vector<double> amap(C * HW);
  for (std::size_t p = 0; p < HW; ++p)
    for (std::size_t c = 0; c < C; ++c) amap[c * HW + p] = attended[p * C + c];
  auto out = lin(ps.get("dfam.pt.w").values(), ps.get("dfam.pt.b").values(), amap, C, C, HW);
  inorm(out, ps.get("dfam.pt_norm.gamma").values(), ps.get("dfam.pt_norm.beta").values(), C, HW);

  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(got.values()[i] == doctest::Approx(out[i]).epsilon(1e-9));
  }
}

TEST_CASE("empty text is rejected as missing prior text") {
  ParameterStore<double> ps(7);
  Dfam<double> dfam(ps, "dfam", 4, 4);
  auto feature = random_tensor({4, 2, 2}, 8);
  CHECK_THROWS_AS(dfam.align_attention(feature, Tensor<double>{}), MissingPriorTextError);
}

TEST_CASE("zero-initialized tanh gate forces an exactly zero module output") {
  ParameterStore<double> ps(9);
  Dfam<double> dfam(ps, "dfam", 5, 6);
  auto feature = random_tensor({5, 3, 3}, 12);
  auto text = random_tensor({6, 4}, 13);
  auto aligned = dfam.forward(feature, text);
  for (double v : aligned.values()) CHECK(v == 0.0);
}

TEST_CASE("zero attended input exercises only the bias path") {
  ParameterStore<double> ps(14);
  Dfam<double> dfam(ps, "dfam", 3, 3);
  auto feature = random_tensor({3, 2, 2}, 15);
  auto zero_att = Tensor<double>::zeros({3, 2, 2});
  auto fa = dfam.fuse_and_gate(feature, zero_att, /*dynamic_fusion=*/false);
  // F_att = 0 makes the product zero, so F_fa = relu(P^f bias).
  const auto& bias = ps.get("dfam.pf.b").values();
  for (std::size_t c = 0; c < 3; ++c) {
    const double want = bias[c] > 0 ? bias[c] : 0.0;
    for (std::size_t i = 0; i < 4; ++i) CHECK(fa.values()[c * 4 + i] == doctest::Approx(want));
  }
}

TEST_CASE("fuse_and_gate matches an independent formula replay") {
  const std::size_t C = 6, HW = 9;
  ParameterStore<double> ps(16);
  Dfam<double> dfam(ps, "dfam", C, 4);
  // Give the zero-initialized gate conv nonzero values so the replay is
  // non-trivial.
  {
    Rng rng(17);
    for (auto& v : ps.get("dfam.b2.w").values()) v = rng.normal(0.0, 0.3);
    for (auto& v : ps.get("dfam.b2.b").values()) v = rng.normal(0.0, 0.3);
  }
  auto feature = random_tensor({C, 3, 3}, 18);
  auto attended = random_tensor({C, 3, 3}, 19);
  auto got = dfam.fuse_and_gate(feature, attended);

  auto relu_v = [](std::vector<double> x) {
    for (auto& v : x) v = v > 0 ? v : 0.0;
    return x;
  };
  auto pa = relu_v(lin(ps.get("dfam.pa.w").values(), ps.get("dfam.pa.b").values(),
                       feature.values(), C, C, HW));
  std::vector<double> prod(C * HW);
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = pa[i] * attended.values()[i];
  auto fa = relu_v(lin(ps.get("dfam.pf.w").values(), ps.get("dfam.pf.b").values(), prod, C, C, HW));
  auto b1 = relu_v(lin(ps.get("dfam.b1.w").values(), ps.get("dfam.b1.b").values(), fa, C, C, HW));
  auto b2 = lin(ps.get("dfam.b2.w").values(), ps.get("dfam.b2.b").values(), b1, C, C, HW);
  for (std::size_t i = 0; i < b2.size(); ++i) b2[i] = std::tanh(b2[i]) * fa[i];

  for (std::size_t i = 0; i < b2.size(); ++i) {
    CHECK(got.values()[i] == doctest::Approx(b2[i]).epsilon(1e-9));
  }
}

TEST_CASE("token permutation only matters through positional codes") {
  // With raw token features (no positional codes), softmax-weighted sums are
  // order independent.
  ParameterStore<double> ps(20);
  Dfam<double> dfam(ps, "dfam", 4, 5);
  auto feature = random_tensor({4, 2, 2}, 21);
  auto text = random_tensor({5, 3}, 22);

  std::vector<double> permuted(text.size());
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t j = 0; j < 3; ++j) permuted[c * 3 + j] = text.values()[c * 3 + order[j]];
  auto text_perm = Tensor<double>::from_data({5, 3}, std::move(permuted));

  auto a = dfam.align_attention(feature, text);
  auto b = dfam.align_attention(feature, text_perm);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-9));
  }
}

TEST_CASE("full module gradient check against both inputs") {
  const std::size_t C = 4, CT = 3, L = 3;
  ParameterStore<double> ps(23);
  Dfam<double> dfam(ps, "dfam", C, CT);
  {
    Rng rng(24);
    for (auto& v : ps.get("dfam.b2.w").values()) v = rng.normal(0.0, 0.2);
  }
  auto text = random_tensor({CT, L}, 25);

  auto x = random_tensor({C, 6, 6}, 26);
  const double err_img = finite_difference_check(
      [&](const Tensor<double>& t) {
        auto aligned = dfam.forward(t, text);
        return sum(mul(aligned, random_tensor(aligned.shape(), 27)));
      },
      x, 1e-5);
  CHECK(err_img < 1e-4);

  // Gradient w.r.t. a module parameter through the attention path. The
  // probe tensor is the parameter handle itself, so perturbing its values
  // directly perturbs the module.
  auto pk_w = ps.get("dfam.pk.w");
  const double err_param = finite_difference_check(
      [&](const Tensor<double>&) {
        auto aligned = dfam.forward(x, text);
        auto w = random_tensor(aligned.shape(), 28);
        return sum(mul(aligned, w));
      },
      pk_w, 1e-5);
  CHECK(err_param < 1e-4);
}
