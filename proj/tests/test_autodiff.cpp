#include <doctest.h>

#include <cmath>

#include "ddatr/gradcheck.hpp"
#include "ddatr/ops.hpp"
#include "ddatr/rng.hpp"
#include "ddatr/tensor.hpp"

using namespace ddatr;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> data(numel(shape));
  for (auto& v : data) v = rng.normal(0.0, scale);
  return Tensor<double>::from_data(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("backward of sum gives all-ones") {
  auto x = random_tensor({3, 3}, 1).set_requires_grad(true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto loss = sum(x);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of a loss independent of x leaves its grad zero") {
  auto x = random_tensor({4}, 2).set_requires_grad(true);
  auto y = random_tensor({4}, 3).set_requires_grad(true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto loss = sum(mul(y, y));
  tape.backward(loss);
  CHECK_FALSE(x.has_grad());
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
  auto x = random_tensor({3}, 4).set_requires_grad(true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto y = relu(x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("two backward passes double every gradient exactly") {
  auto x = random_tensor({5}, 5).set_requires_grad(true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto loss = sum(mul(x, x));
  tape.backward(loss);
  const auto once = x.grad();
  tape.backward(loss);
  const auto twice = x.grad();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == 2.0 * once[i]);
}

TEST_CASE("requires_grad=false never accumulates") {
  auto x = random_tensor({4}, 6);  // leaf without grad
  auto w = random_tensor({4}, 7).set_requires_grad(true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto loss = sum(mul(x, w));
  tape.backward(loss);
  CHECK_FALSE(x.has_grad());
  CHECK(w.has_grad());
}

TEST_CASE("ops do not record when no tape is installed") {
  auto x = random_tensor({4}, 8).set_requires_grad(true);
  auto y = relu(x);  // no TapeScope active
  CHECK(y.defined());
  Tape<double> tape;
  CHECK(tape.empty());
}

TEST_CASE("gradient of 0.5*||x||^2 is x itself") {
  auto x = random_tensor({6}, 9).set_requires_grad(true);
  const double err = finite_difference_check(
      [](const Tensor<double>& t) { return scale(sum(mul(t, t)), 0.5); }, x, 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("gradient of sum(sigmoid(x)) passes a tight check") {
  auto x = random_tensor({8}, 10).set_requires_grad(true);
  const double err =
      finite_difference_check([](const Tensor<double>& t) { return sum(sigmoid(t)); }, x, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("finite differences validate every differentiable primitive") {
  // Each lambda reduces to a scalar through a fixed random weighting so the
  // check exercises non-trivial output gradients.
  auto weighted_sum = [](const Tensor<double>& t, std::uint64_t seed) {
    auto w = random_tensor(t.shape(), seed);
    return sum(mul(t, w));
  };

  struct Case {
    const char* name;
    Shape shape;
    std::function<Tensor<double>(const Tensor<double>&)> f;
  };
  auto aux2 = random_tensor({4, 5}, 100);
  auto aux_mat = random_tensor({5, 3}, 101);
  auto gamma = random_tensor({4}, 102, 0.5);
  auto beta = random_tensor({4}, 103, 0.5);
  auto kernel = random_tensor({3, 2, 3, 3}, 104);
  auto kbias = random_tensor({3}, 105);
  auto cw = random_tensor({3, 4}, 106);
  auto cb = random_tensor({3}, 107);

  const std::vector<Case> cases = {
      {"add", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(add(t, aux2), 1); }},
      {"sub", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(sub(aux2, t), 2); }},
      {"mul", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(mul(t, aux2), 3); }},
      {"scale", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(scale(t, -1.7), 4); }},
      {"relu", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(relu(t), 5); }},
      {"tanh", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(tanh_op(t), 6); }},
      {"sigmoid", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(sigmoid(t), 7); }},
      {"matmul_lhs", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(matmul(t, aux_mat), 8); }},
      {"matmul_rhs", {5, 3}, [&](const Tensor<double>& t) { return weighted_sum(matmul(transpose(aux_mat), t), 9); }},
      {"transpose", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(transpose(t), 10); }},
      {"reshape", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(reshape(t, {2, 10}), 11); }},
      {"broadcast", {4, 1, 1}, [&](const Tensor<double>& t) { return weighted_sum(broadcast(t, {4, 3, 2}), 12); }},
      {"softmax", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(softmax(t, 1), 13); }},
      {"log_softmax", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(log_softmax(t, 0), 14); }},
      {"instance_norm", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(instance_norm(t, gamma, beta), 15); }},
      {"instance_norm_gamma", {4}, [&](const Tensor<double>& t) {
         auto x = random_tensor({4, 5}, 200);
         return weighted_sum(instance_norm(x.set_requires_grad(true), t, beta), 16);
       }},
      {"layer_norm", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(layer_norm(t, gamma, beta), 17); }},
      {"conv2d_input", {2, 6, 6}, [&](const Tensor<double>& t) { return weighted_sum(conv2d(t, kernel, kbias, 2, 1), 18); }},
      {"conv2d_weight", {3, 2, 3, 3}, [&](const Tensor<double>& t) {
         auto x = random_tensor({2, 6, 6}, 201);
         return weighted_sum(conv2d(x, t, kbias, 1, 1), 19);
       }},
      {"conv1x1_input", {4, 7}, [&](const Tensor<double>& t) { return weighted_sum(conv1x1(t, cw, cb), 20); }},
      {"conv1x1_weight", {3, 4}, [&](const Tensor<double>& t) {
         auto x = random_tensor({4, 7}, 202);
         return weighted_sum(conv1x1(x, t, cb), 21);
       }},
      {"concat", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(concat<double>(0, {t, aux2}), 22); }},
      {"slice", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(slice(t, 1, 1, 3), 23); }},
      {"sum_axes", {3, 2, 3, 3}, [&](const Tensor<double>& t) { return weighted_sum(sum_axes(t, {2, 3}), 24); }},
      {"global_avg_pool", {4, 5}, [&](const Tensor<double>& t) { return weighted_sum(global_avg_pool(t), 25); }},
      {"channel_mean", {4, 3, 2}, [&](const Tensor<double>& t) { return weighted_sum(channel_mean(t), 26); }},
      {"gather_cols", {4, 6}, [&](const Tensor<double>& t) { return weighted_sum(gather_cols(t, {1, 5, 1, 0}), 27); }},
      {"pick_per_column", {4, 5}, [&](const Tensor<double>& t) {
         return scale(sum(pick_per_column(t, {1, 3, 0, 2, 2})), 1.0);
       }},
      {"cross_entropy_columns", {4, 5}, [&](const Tensor<double>& t) {
         return cross_entropy_columns(t, {1, 3, 0, 2, 2});
       }},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    auto x = random_tensor(c.shape, derive_seed(42, c.name));
    const double err = finite_difference_check(c.f, x, 1e-5);
    CHECK_MESSAGE(err < 1e-4, c.name << " gradient error " << err);
  }
}

TEST_CASE("finite_difference_check rejects non-deterministic functions") {
  auto x = random_tensor({3}, 50);
  int calls = 0;
  auto f = [&calls](const Tensor<double>& t) {
    ++calls;
    return scale(sum(t), calls == 1 ? 1.0 : 2.0);
  };
  CHECK_THROWS_WITH_AS(finite_difference_check(f, x, 1e-5),
                       "finite_difference_check: function is not deterministic",
                       std::runtime_error);
}

TEST_CASE("uniform logits cross-entropy equals ln(V)") {
  auto logits = Tensor<double>::zeros({4, 3});
  auto loss = cross_entropy_columns(logits, {0, 1, 2});
  CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}
