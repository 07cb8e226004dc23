#include <doctest.h>

#include <cmath>

#include "ddatr/ddam.hpp"
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

// Patch-loop oracle for the learnable-descriptor convolution: vanilla 3x3
// conv plus theta times the conv over central-difference patches
// (neighbor minus center, zero padding), plus bias.
std::vector<double> ldconv_oracle(const std::vector<double>& x, std::size_t c, std::size_t h,
                                  std::size_t w, const std::vector<double>& ker,
                                  const std::vector<double>& theta,
                                  const std::vector<double>& bias) {
  std::vector<double> y(c * h * w, 0.0);
  auto at = [&](std::size_t ch, long iy, long ix) -> double {
    if (iy < 0 || iy >= long(h) || ix < 0 || ix >= long(w)) return 0.0;
    return x[ch * h * w + iy * w + ix];
  };
  for (std::size_t oc = 0; oc < c; ++oc)
    for (std::size_t oy = 0; oy < h; ++oy)
      for (std::size_t ox = 0; ox < w; ++ox) {
        double vanilla = 0.0, cd = 0.0;
        for (std::size_t ic = 0; ic < c; ++ic) {
          const double center = at(ic, long(oy), long(ox));
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const double kv = ker[((oc * c + ic) * 3 + ky) * 3 + kx];
              const double nb = at(ic, long(oy + ky) - 1, long(ox + kx) - 1);
              vanilla += kv * nb;
              cd += kv * (nb - center);
            }
        }
        y[(oc * h + oy) * w + ox] = vanilla + theta[oc] * cd + bias[oc];
      }
  return y;
}

}  // namespace

TEST_CASE("constant input kills the central-difference branch") {
  ParameterStore<double> ps(1);
  LdConv<double> ldc(ps, "ldc", 3);
  auto x = Tensor<double>::full({3, 5, 5}, 0.7);
  auto y = ldc.forward(x);

  // theta=0 run on the same input isolates the vanilla branch.
  std::vector<double> theta_saved = ldc.theta().values();
  for (auto& v : const_cast<std::vector<double>&>(ldc.theta().values())) v = 0.0;
  auto vanilla = ldc.forward(x);
  const_cast<std::vector<double>&>(ldc.theta().values()) = theta_saved;

  // Interior pixels see constant patches, so differences vanish and the two
  // runs agree there. (Borders differ: zero padding breaks constancy.)
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t iy = 1; iy < 4; ++iy)
      for (std::size_t ix = 1; ix < 4; ++ix) {
        const std::size_t i = (c * 5 + iy) * 5 + ix;
        CHECK(y.values()[i] == doctest::Approx(vanilla.values()[i]).epsilon(1e-12));
      }
}

TEST_CASE("theta=0 reduces ldconv to the vanilla convolution exactly") {
  ParameterStore<double> ps(2);
  LdConv<double> ldc(ps, "ldc", 2);
  for (auto& v : const_cast<std::vector<double>&>(ldc.theta().values())) v = 0.0;
  auto x = random_tensor({2, 4, 4}, 3);
  auto y = ldc.forward(x);
  auto vanilla = conv2d(x, ldc.kernel(), ldc.bias(), 1, 1);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.values()[i] == vanilla.values()[i]);
}

TEST_CASE("ldconv matches the patch-loop oracle") {
  ParameterStore<double> ps(4);
  LdConv<double> ldc(ps, "ldc", 4);
  {
    Rng rng(5);
    for (auto& v : const_cast<std::vector<double>&>(ldc.theta().values()))
      v = rng.uniform(0.05, 0.4);
    for (auto& v : const_cast<std::vector<double>&>(ldc.bias().values())) v = rng.normal(0.0, 0.2);
  }
  auto x = random_tensor({4, 5, 5}, 6);
  auto y = ldc.forward(x);
  auto want = ldconv_oracle(x.values(), 4, 5, 5, ldc.kernel().values(), ldc.theta().values(),
                            ldc.bias().values());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(y.values()[i] == doctest::Approx(want[i]).epsilon(1e-9));
  }
}

TEST_CASE("pixel difference of identical features is exactly one half") {
  ParameterStore<double> ps(7);
  Ddam<double> ddam(ps, "ddam", 3);
  auto f = random_tensor({3, 4, 4}, 8);
  auto pd = ddam.pixel_difference(f, f);
  REQUIRE(pd.shape() == Shape{1, 4, 4});
  for (double v : pd.values()) CHECK(v == 0.5);
}

TEST_CASE("pixel difference saturates for large gaps and stays inside (0,1)") {
  ParameterStore<double> ps(9);
  Ddam<double> ddam(ps, "ddam", 2);
  auto lo = Tensor<double>::zeros({2, 2, 2});
  auto hi = Tensor<double>::full({2, 2, 2}, 20.0);
  auto pd = ddam.pixel_difference(hi, lo);
  for (double v : pd.values()) CHECK(std::abs(v - 1.0) < 1e-6);

  auto rnd = ddam.pixel_difference(random_tensor({2, 2, 2}, 10, 4.0), lo);
  for (double v : rnd.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("pixel difference matches the per-pixel mean+sigmoid oracle") {
  ParameterStore<double> ps(11);
  Ddam<double> ddam(ps, "ddam", 5);
  auto a = random_tensor({5, 3, 3}, 12);
  auto b = random_tensor({5, 3, 3}, 13);
  auto pd = ddam.pixel_difference(a, b);
  for (std::size_t p = 0; p < 9; ++p) {
    double mean = 0;
    for (std::size_t c = 0; c < 5; ++c) mean += a.values()[c * 9 + p] - b.values()[c * 9 + p];
    mean /= 5.0;
    const double want = 1.0 / (1.0 + std::exp(-mean));
    CHECK(pd.values()[p] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("monotone saliency response in the channel-mean difference") {
  ParameterStore<double> ps(14);
  Ddam<double> ddam(ps, "ddam", 2);
  auto base = Tensor<double>::zeros({2, 1, 1});
  double prev = 0.0;
  for (int step = 0; step < 6; ++step) {
    auto cur = Tensor<double>::full({2, 1, 1}, 0.5 * step);
    const double v = ddam.pixel_difference(cur, base).values()[0];
    if (step > 0) CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("zero saliency reduces difference_amplify to the relu'd bias") {
  ParameterStore<double> ps(15);
  Ddam<double> ddam(ps, "ddam", 3);
  {
    Rng rng(16);
    for (auto& v : ps.get("ddam.pd.b").values()) v = rng.normal(0.0, 0.5);
  }
  auto a = random_tensor({3, 2, 2}, 17);
  auto b = random_tensor({3, 2, 2}, 18);
  auto zero_sal = Tensor<double>::zeros({1, 2, 2});
  auto da = ddam.difference_amplify(a, b, zero_sal);
  const auto& bias = ps.get("ddam.pd.b").values();
  for (std::size_t c = 0; c < 3; ++c) {
    const double want = bias[c] > 0 ? bias[c] : 0.0;
    for (std::size_t i = 0; i < 4; ++i) CHECK(da.values()[c * 4 + i] == doctest::Approx(want));
  }
}

TEST_CASE("equal features with half-symmetric projection reproduce a channel sum") {
  // With F_enc == F_enp the two concat halves are equal, so a projection
  // whose two halves are identical acts like projecting 2 * (F_enc * 0.5).
  ParameterStore<double> ps(19);
  Ddam<double> ddam(ps, "ddam", 2);
  auto w = ps.get("ddam.pd.w");  // (2, 4)
  w.values() = {0.25, 0.5, 0.25, 0.5, -0.3, 0.1, -0.3, 0.1};
  for (auto& v : ps.get("ddam.pd.b").values()) v = 0.0;

  auto f = random_tensor({2, 2, 2}, 20);
  auto pd = ddam.pixel_difference(f, f);  // 0.5 everywhere
  auto da = ddam.difference_amplify(f, f, pd);
  for (std::size_t p = 0; p < 4; ++p) {
    for (std::size_t oc = 0; oc < 2; ++oc) {
      double acc = 0;
      for (std::size_t ic = 0; ic < 2; ++ic) {
        acc += w.values()[oc * 4 + ic] * f.values()[ic * 4 + p];  // 2 * 0.5 * w = w
      }
      const double want = acc > 0 ? acc : 0.0;
      CHECK(da.values()[oc * 4 + p] == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero-initialized gate keeps the current feature bit-identical") {
  ParameterStore<double> ps(21);
  Ddam<double> ddam(ps, "ddam", 4);
  auto cur = random_tensor({4, 3, 3}, 22);
  auto prior = random_tensor({4, 3, 3}, 23);
  auto out = ddam.forward(cur, prior);
  CHECK(out.values() == cur.values());
}

TEST_CASE("ddam forward matches a full formula replay with trained parameters") {
  ParameterStore<double> ps(24);
  Ddam<double> ddam(ps, "ddam", 3);
  {
    Rng rng(25);
    for (auto& v : ps.get("ddam.dy2.w").values()) v = rng.normal(0.0, 0.3);
    for (auto& v : ps.get("ddam.dy2.b").values()) v = rng.normal(0.0, 0.1);
  }
  auto cur = random_tensor({3, 4, 4}, 26);
  auto prior = random_tensor({3, 4, 4}, 27);
  auto got = ddam.forward(cur, prior);

  // Replay: ldconv via oracle, then saliency, amplify, gate, residual.
  auto enc = ldconv_oracle(cur.values(), 3, 4, 4, ps.get("ddam.ldc_c.w").values(),
                           ps.get("ddam.ldc_c.theta").values(), ps.get("ddam.ldc_c.b").values());
  auto enp = ldconv_oracle(prior.values(), 3, 4, 4, ps.get("ddam.ldc_p.w").values(),
                           ps.get("ddam.ldc_p.theta").values(), ps.get("ddam.ldc_p.b").values());
  std::vector<double> pd(16);
  for (std::size_t p = 0; p < 16; ++p) {
    double mean = 0;
    for (std::size_t c = 0; c < 3; ++c) mean += enc[c * 16 + p] - enp[c * 16 + p];
    pd[p] = 1.0 / (1.0 + std::exp(-mean / 3.0));
  }
  std::vector<double> cat(6 * 16);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 16; ++p) {
      cat[c * 16 + p] = enc[c * 16 + p] * pd[p];
      cat[(c + 3) * 16 + p] = enp[c * 16 + p] * pd[p];
    }
  const auto& pdw = ps.get("ddam.pd.w").values();
  const auto& pdb = ps.get("ddam.pd.b").values();
  std::vector<double> da(3 * 16);
  for (std::size_t oc = 0; oc < 3; ++oc)
    for (std::size_t p = 0; p < 16; ++p) {
      double acc = pdb[oc];
      for (std::size_t ic = 0; ic < 6; ++ic) acc += pdw[oc * 6 + ic] * cat[ic * 16 + p];
      da[oc * 16 + p] = acc > 0 ? acc : 0.0;
    }
  const auto& g1w = ps.get("ddam.dy1.w").values();
  const auto& g1b = ps.get("ddam.dy1.b").values();
  const auto& g2w = ps.get("ddam.dy2.w").values();
  const auto& g2b = ps.get("ddam.dy2.b").values();
  std::vector<double> h(3 * 16), dy(3 * 16);
  for (std::size_t oc = 0; oc < 3; ++oc)
    for (std::size_t p = 0; p < 16; ++p) {
      double acc = g1b[oc];
      for (std::size_t ic = 0; ic < 3; ++ic) acc += g1w[oc * 3 + ic] * da[ic * 16 + p];
      h[oc * 16 + p] = acc > 0 ? acc : 0.0;
    }
  for (std::size_t oc = 0; oc < 3; ++oc)
    for (std::size_t p = 0; p < 16; ++p) {
      double acc = g2b[oc];
      for (std::size_t ic = 0; ic < 3; ++ic) acc += g2w[oc * 3 + ic] * h[ic * 16 + p];
      dy[oc * 16 + p] = std::tanh(acc);
    }
  for (std::size_t i = 0; i < 48; ++i) {
    const double want = cur.values()[i] + dy[i] * da[i];
    CHECK(got.values()[i] == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("missing prior feature despite has_prior is a contract violation") {
  ParameterStore<double> ps(28);
  Ddam<double> ddam(ps, "ddam", 2);
  auto cur = random_tensor({2, 2, 2}, 29);
  CHECK_THROWS_AS(ddam.forward(cur, Tensor<double>{}), std::logic_error);
}

TEST_CASE("full block gradient check over inputs and parameters") {
  ParameterStore<double> ps(30);
  Ddam<double> ddam(ps, "ddam", 3);
  {
    Rng rng(31);
    for (auto& v : ps.get("ddam.dy2.w").values()) v = rng.normal(0.0, 0.2);
  }
  auto cur = random_tensor({3, 4, 4}, 32);
  auto prior = random_tensor({3, 4, 4}, 33);
  auto weigh = [&](const Tensor<double>& out) {
    return sum(mul(out, random_tensor(out.shape(), 34)));
  };

  const double err_cur = finite_difference_check(
      [&](const Tensor<double>& t) { return weigh(ddam.forward(t, prior)); }, cur, 1e-5);
  CHECK(err_cur < 1e-4);

  const double err_prior = finite_difference_check(
      [&](const Tensor<double>& t) { return weigh(ddam.forward(cur, t)); }, prior, 1e-5);
  CHECK(err_prior < 1e-4);

  for (const char* pname : {"ddam.ldc_c.w", "ddam.ldc_c.theta", "ddam.ldc_p.w", "ddam.pd.w",
                            "ddam.dy1.w", "ddam.dy2.w"}) {
    CAPTURE(pname);
    auto param = ps.get(pname);
    const double err = finite_difference_check(
        [&](const Tensor<double>&) { return weigh(ddam.forward(cur, prior)); }, param, 1e-5, 32);
    CHECK_MESSAGE(err < 1e-4, pname << " gradient error " << err);
  }
}
