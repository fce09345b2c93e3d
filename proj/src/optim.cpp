#include "mcdseg/optim.hpp"

#include <cmath>

namespace mcdseg {

template <typename T>
void adam_step(Parameter<T>& param, const AdamConfig& cfg) {
  Tensor<T>& value = param.value.value();
  const bool has_grad = param.value.has_grad();
  const std::uint64_t t = param.step_count + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = has_grad ? static_cast<double>(param.value.grad()[i]) : 0.0;
    const double m = cfg.beta1 * param.adam_m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * param.adam_v[i] + (1.0 - cfg.beta2) * g * g;
    param.adam_m[i] = static_cast<T>(m);
    param.adam_v[i] = static_cast<T>(v);
    const double update = cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
    value[i] = static_cast<T>(static_cast<double>(value[i]) - update);
  }
  param.step_count = t;
}

template void adam_step<float>(Parameter<float>&, const AdamConfig&);
template void adam_step<double>(Parameter<double>&, const AdamConfig&);

}  // namespace mcdseg
