#pragma once

// Central finite-difference validation of reverse-mode gradients.
// Only meaningful at 64-bit; float step sizes drown in rounding error.

#include <functional>
#include <vector>

#include "ddatr/ops.hpp"
#include "ddatr/tensor.hpp"

namespace ddatr {

// f maps the probe tensor to a scalar. Returns the max over coordinates of
// |analytic - central| / max(1, |central|). f must be deterministic; this is
// verified by evaluating the base point twice. Coordinates may be
// subsampled via max_coords (0 = all).
inline double finite_difference_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                      Tensor<double> x, double step = 1e-5,
                                      std::size_t max_coords = 0) {
  x.set_requires_grad(true);
  x.zero_grad();

  Tape<double> tape;
  double base;
  {
    TapeScope<double> scope(tape);
    Tensor<double> loss = f(x);
    base = loss.item();
    tape.backward(loss);
  }
  {
    Tensor<double> again = f(x);  // no tape installed: pure re-evaluation
    if (again.item() != base) {
      throw std::runtime_error("finite_difference_check: function is not deterministic");
    }
  }
  const std::vector<double> analytic = x.grad();

  std::size_t n = x.size();
  std::size_t stride = 1;
  if (max_coords > 0 && n > max_coords) stride = n / max_coords;

  double worst = 0.0;
  for (std::size_t i = 0; i < n; i += stride) {
    const double saved = x.values()[i];
    x.values()[i] = saved + step;
    const double up = f(x).item();
    x.values()[i] = saved - step;
    const double down = f(x).item();
    x.values()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace ddatr
