#pragma once

#include <optional>
#include <span>

#include "mcdseg/autodiff.hpp"
#include "mcdseg/rng.hpp"

namespace mcdseg {

enum class Activation { relu, sigmoid };
enum class NormMode { train, eval };

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels)
      : running_mean(Shape{channels}, T{0}), running_var(Shape{channels}, T{1}) {}
};

struct BatchNormOptions {
  double momentum = 0.1;  // new = (1 - m) * old + m * batch
  double epsilon = 1e-5;
};

/// Same-padded convolution. input [N,C,H,W], weight [O,C,k,k], bias [O] or none.
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const std::optional<Var<T>>& bias);

/// 2x2 stride-2 up-convolution. input [N,C,H,W], weight [C,O,2,2] -> [N,O,2H,2W].
template <typename T>
Var<T> transposed_conv2d(const Var<T>& input, const Var<T>& weight,
                         const std::optional<Var<T>>& bias);

template <typename T>
Var<T> max_pool2d(const Var<T>& input);

/// Per-channel batch normalization. Train mode normalizes with the batch mean
/// and (biased) batch variance and folds both into `state`; eval mode reads
/// `state` only.
template <typename T>
Var<T> batch_norm2d(const Var<T>& input, const Var<T>& gamma, const Var<T>& beta,
                    BatchNormState<T>& state, NormMode mode, const BatchNormOptions& opts = {});

/// Inverted dropout. `streams` holds one stream per batch sample (leading
/// dimension), or a single stream covering the whole tensor. Each stream
/// advances by the number of elements it masked.
template <typename T>
Var<T> dropout(const Var<T>& input, double rate, std::span<RngStream> streams, bool active);

template <typename T>
Var<T> dropout(const Var<T>& input, double rate, RngStream& rng, bool active) {
  return dropout(input, rate, std::span<RngStream>(&rng, 1), active);
}

template <typename T>
Var<T> activation(const Var<T>& input, Activation kind);

template <typename T>
Var<T> relu(const Var<T>& input) { return activation(input, Activation::relu); }

template <typename T>
Var<T> sigmoid(const Var<T>& input) { return activation(input, Activation::sigmoid); }

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

// Small elementwise/reduction set, enough for hand-built losses and tests.
template <typename T>
Var<T> sum(const Var<T>& input);

template <typename T>
Var<T> mean(const Var<T>& input);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& a, T factor);

}  // namespace mcdseg
