#include "mcdseg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mcdseg {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::bce: return "bce";
    case LossKind::dice: return "dice";
    case LossKind::tversky: return "tversky";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "dice") return LossKind::dice;
  if (s == "tversky") return LossKind::tversky;
  throw ConfigError("unknown loss kind '" + s + "'");
}

LossConfig LossConfig::bce() { return LossConfig{LossKind::bce, std::nullopt, 1.0, 1e-7}; }
LossConfig LossConfig::dice() { return LossConfig{LossKind::dice, std::nullopt, 1.0, 1e-7}; }
LossConfig LossConfig::tversky(double beta) { return LossConfig{LossKind::tversky, beta, 1.0, 1e-7}; }

void LossConfig::validate() const {
  if (kind == LossKind::tversky) {
    if (!beta) throw ConfigError("tversky loss requires beta");
    if (!(*beta > 0.0 && *beta < 1.0)) throw ParameterError("tversky beta must lie in (0, 1)");
  } else if (beta) {
    throw ConfigError("beta is only meaningful for the tversky loss");
  }
  if (!(smooth_epsilon >= 0.0)) throw ConfigError("smooth_epsilon must be non-negative");
  if (!(clamp_epsilon > 0.0 && clamp_epsilon < 0.5)) throw ConfigError("clamp_epsilon must lie in (0, 0.5)");
}

namespace {

template <typename T>
void check_pair(const Tensor<T>& reference, const Shape& predicted) {
  if (reference.shape() != predicted) {
    throw DimensionError("loss: reference " + shape_str(reference.shape()) + " vs prediction " +
                         shape_str(predicted));
  }
}

template <typename T>
void check_binary(const Tensor<T>& reference) {
  for (T v : reference.data()) {
    if (v != T{0} && v != T{1}) throw InputError("reference mask must be binary");
  }
}

// Shared form for dice and tversky: 1 - (2 tp + eps) / (2 tp + a fp + b fn + eps).
template <typename T>
Var<T> overlap_loss(const Tensor<T>& reference, const Var<T>& predicted, double fp_weight,
                    double fn_weight, double eps) {
  check_pair(reference, predicted.shape());
  const SoftConfusion c = soft_confusion(reference, predicted.value());
  const double num = 2.0 * c.tp + eps;
  const double den = 2.0 * c.tp + fp_weight * c.fp + fn_weight * c.fn_ + eps;
  const double loss = den > 0.0 ? 1.0 - num / den : 0.0;
  return detail::make_result<T>(
      Tensor<T>(Shape{1}, static_cast<T>(loss)), {predicted},
      [reference, num, den, fp_weight, fn_weight](Node<T>& self) {
        if (den <= 0.0) return;
        auto& dp = self.inputs[0]->grad_buffer();
        const double g = self.grad[0];
        // d num / dp_i = 2 y_i; d den / dp_i = 2 y_i + a (1 - y_i) - b y_i.
        const double inv = 1.0 / (den * den);
        for (std::size_t i = 0; i < dp.size(); ++i) {
          const double y = reference[i];
          const double dnum = 2.0 * y;
          const double dden = 2.0 * y + fp_weight * (1.0 - y) - fn_weight * y;
          dp[i] += static_cast<T>(-g * (dnum * den - num * dden) * inv);
        }
      });
}

}  // namespace

template <typename T>
SoftConfusion soft_confusion(const Tensor<T>& reference, const Tensor<T>& predicted) {
  check_pair(reference, predicted.shape());
  check_binary(reference);
  SoftConfusion c;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double y = reference[i], p = predicted[i];
    c.tp += y * p;
    c.fp += (1.0 - y) * p;
    c.fn_ += y * (1.0 - p);
  }
  return c;
}

template <typename T>
Var<T> bce_loss(const Tensor<T>& reference, const Var<T>& predicted, double clamp_epsilon) {
  check_pair(reference, predicted.shape());
  const std::size_t k = reference.size();
  if (k == 0) throw DimensionError("bce_loss: empty input");
  const double lo = clamp_epsilon, hi = 1.0 - clamp_epsilon;
  auto term = [&](std::size_t i) {
    const double y = reference[i];
    const double p = std::clamp(static_cast<double>(predicted.value()[i]), lo, hi);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  };
  // Mean taken as an offset from the first term, so equal terms average to
  // exactly that term (bce at p = 0.5 is ln 2 for any size).
  const double first = term(0);
  double offset = 0.0;
  for (std::size_t i = 1; i < k; ++i) offset += term(i) - first;
  const double loss = first + offset / static_cast<double>(k);
  return detail::make_result<T>(Tensor<T>(Shape{1}, static_cast<T>(loss)), {predicted},
                                [reference, lo, hi, k](Node<T>& self) {
                                  auto& in = self.inputs[0];
                                  auto& dp = in->grad_buffer();
                                  const double g = self.grad[0] / static_cast<double>(k);
                                  for (std::size_t i = 0; i < k; ++i) {
                                    const double raw = in->value[i];
                                    if (raw < lo || raw > hi) continue;  // clamped: flat
                                    const double y = reference[i];
                                    dp[i] += static_cast<T>(g * (-y / raw + (1.0 - y) / (1.0 - raw)));
                                  }
                                });
}

template <typename T>
Var<T> dice_loss(const Tensor<T>& reference, const Var<T>& predicted, double smooth_epsilon) {
  return overlap_loss(reference, predicted, 1.0, 1.0, smooth_epsilon);
}

template <typename T>
Var<T> tversky_loss(const Tensor<T>& reference, const Var<T>& predicted, double beta,
                    double smooth_epsilon) {
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("tversky beta must lie in (0, 1)");
  return overlap_loss(reference, predicted, 2.0 * (1.0 - beta), 2.0 * beta, smooth_epsilon);
}

template <typename T>
Var<T> compute_loss(const LossConfig& config, const Tensor<T>& reference, const Var<T>& predicted) {
  config.validate();
  switch (config.kind) {
    case LossKind::bce: return bce_loss(reference, predicted, config.clamp_epsilon);
    case LossKind::dice: return dice_loss(reference, predicted, config.smooth_epsilon);
    case LossKind::tversky: return tversky_loss(reference, predicted, *config.beta, config.smooth_epsilon);
  }
  throw ConfigError("unknown loss kind");
}

#define MCDSEG_INSTANTIATE(T)                                                                  \
  template SoftConfusion soft_confusion(const Tensor<T>&, const Tensor<T>&);                   \
  template Var<T> bce_loss(const Tensor<T>&, const Var<T>&, double);                           \
  template Var<T> dice_loss(const Tensor<T>&, const Var<T>&, double);                          \
  template Var<T> tversky_loss(const Tensor<T>&, const Var<T>&, double, double);               \
  template Var<T> compute_loss(const LossConfig&, const Tensor<T>&, const Var<T>&);

MCDSEG_INSTANTIATE(float)
MCDSEG_INSTANTIATE(double)

#undef MCDSEG_INSTANTIATE

}  // namespace mcdseg
