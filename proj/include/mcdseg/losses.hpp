#pragma once

#include <optional>
#include <string>

#include "mcdseg/autodiff.hpp"

namespace mcdseg {

enum class LossKind { bce, dice, tversky };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

struct LossConfig {
  LossKind kind = LossKind::dice;
  std::optional<double> beta;  // tversky only
  double smooth_epsilon = 1.0;
  double clamp_epsilon = 1e-7;  // bce only

  static LossConfig bce();
  static LossConfig dice();
  static LossConfig tversky(double beta);

  void validate() const;
};

/// Soft confusion counts summed over every element.
struct SoftConfusion {
  double tp = 0.0;
  double fp = 0.0;
  double fn_ = 0.0;
};

/// tp = sum(y * p), fp = sum((1 - y) * p), fn = sum(y * (1 - p)).
/// Throws InputError if the reference is not binary.
template <typename T>
SoftConfusion soft_confusion(const Tensor<T>& reference, const Tensor<T>& predicted);

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
template <typename T>
Var<T> bce_loss(const Tensor<T>& reference, const Var<T>& predicted, double clamp_epsilon = 1e-7);

/// 1 - (2 tp + eps) / (2 tp + fp + fn + eps).
template <typename T>
Var<T> dice_loss(const Tensor<T>& reference, const Var<T>& predicted, double smooth_epsilon = 1.0);

/// 1 - (2 tp + eps) / (2 tp + 2 (1 - beta) fp + 2 beta fn + eps).
///
/// At eps = 0 this is 1 - tp / (tp + (1 - beta) fp + beta fn). The smoothing
/// term is written against the doubled counts so that beta = 0.5 reproduces
/// dice_loss exactly for every eps.
template <typename T>
Var<T> tversky_loss(const Tensor<T>& reference, const Var<T>& predicted, double beta,
                    double smooth_epsilon = 1.0);

template <typename T>
Var<T> compute_loss(const LossConfig& config, const Tensor<T>& reference, const Var<T>& predicted);

/// Value-only convenience wrapper.
template <typename T>
double loss_value(const LossConfig& config, const Tensor<T>& reference, const Tensor<T>& predicted) {
  NoGradGuard guard;
  return static_cast<double>(compute_loss(config, reference, Var<T>(predicted)).value()[0]);
}

}  // namespace mcdseg
