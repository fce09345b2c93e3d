#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mcdseg/autodiff.hpp"
#include "mcdseg/rng.hpp"
#include "mcdseg/tensor.hpp"

namespace testutil {

using mcdseg::RngStream;
using mcdseg::Shape;
using mcdseg::Tensor;
using mcdseg::Var;

template <typename T>
Tensor<T> random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.next_uniform(lo, hi));
  return t;
}

template <typename T>
Tensor<T> random_binary(Shape shape, RngStream& rng, double p = 0.5) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = rng.next_uniform() < p ? T{1} : T{0};
  return t;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// ||a - b|| / max(||a||, ||b||, floor). The floor stops a gradient that is
/// zero by construction (conv bias feeding batch norm) from dividing
/// round-off by round-off.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-5) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm(d) / std::max({norm(a), norm(b), floor});
}

/// Central difference of loss_fn at coordinate i of x. A ReLU kink inside
/// [x - h, x + h] spoils the estimate, so the step shrinks by 4 until two
/// successive estimates agree; on a smooth stretch the first pair already does.
inline double central_difference(Tensor<double>& x, std::size_t i, const std::function<Var<double>()>& loss_fn,
                                 double h) {
  auto at = [&](double step) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = loss_fn().value()[0];
    x[i] = orig - step;
    const double down = loss_fn().value()[0];
    x[i] = orig;
    return (up - down) / (2.0 * step);
  };
  double est = at(h);
  for (double step = h / 4; step >= 1e-9; step /= 4) {
    const double next = at(step);
    const bool agree = std::abs(next - est) <= 1e-8 + 1e-5 * std::abs(next);
    est = next;
    if (agree) break;
  }
  return est;
}

/// Finite-difference check of d loss / d input for every input, using the
/// per-tensor norm error. `coords`, when nonzero, limits each tensor to that
/// many randomly chosen coordinates. Returns the worst tensor error.
inline double gradient_check(const std::vector<Var<double>>& inputs, const std::function<Var<double>()>& loss_fn,
                             double h = 1e-5, std::size_t coords = 0, std::uint64_t coord_seed = 0,
                             std::vector<double>* per_tensor = nullptr) {
  for (auto v : inputs) v.zero_grad();
  mcdseg::backward(loss_fn());
  RngStream pick(coord_seed, 77);
  double worst = 0.0;
  for (auto v : inputs) {
    Tensor<double>& x = v.value();
    std::vector<std::size_t> idx;
    if (coords == 0 || coords >= x.size()) {
      for (std::size_t i = 0; i < x.size(); ++i) idx.push_back(i);
    } else {
      for (std::size_t i = 0; i < coords; ++i) idx.push_back(static_cast<std::size_t>(pick.next_below(x.size())));
    }
    std::vector<double> analytic, numeric;
    for (std::size_t i : idx) {
      analytic.push_back(v.has_grad() ? v.grad()[i] : 0.0);
      numeric.push_back(central_difference(x, i, loss_fn, h));
    }
    const double e = relative_error(analytic, numeric);
    if (per_tensor) per_tensor->push_back(e);
    worst = std::max(worst, e);
  }
  return worst;
}

}  // namespace testutil
