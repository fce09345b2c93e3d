#pragma once

#include <cstdint>

#include "mcdseg/autodiff.hpp"

namespace mcdseg {

/// Trainable tensor with its Adam moment estimates.
template <typename T>
struct Parameter {
  Var<T> value;
  Tensor<T> adam_m;
  Tensor<T> adam_v;
  std::uint64_t step_count = 0;

  Parameter() = default;
  explicit Parameter(Tensor<T> init)
      : value(std::move(init), true), adam_m(value.shape()), adam_v(value.shape()) {}

  const Shape& shape() const { return value.shape(); }
  const Tensor<T>& grad() const { return value.grad(); }
  void zero_grad() { value.zero_grad(); }
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update. A parameter whose gradient was never
/// populated is treated as having a zero gradient.
template <typename T>
void adam_step(Parameter<T>& param, const AdamConfig& cfg);

}  // namespace mcdseg
