#include "mcdseg/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace mcdseg {

double evaluate_loss(UNetModel<float>& model, const std::vector<Sample>& samples, const LossConfig& loss,
                     std::size_t batch_size) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard guard;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double total = 0.0;
  Tensor<float> images, masks;
  RngStream unused(0, 0);
  for (std::size_t first = 0; first < order.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - first);
    stack_batch(samples, std::span<const std::size_t>(order).subspan(first, count), images, masks);
    const Var<float> out = model.forward(images, ForwardMode::deterministic, unused);
    total += loss_value(loss, masks, out.value()) * static_cast<double>(count);
  }
  return total / static_cast<double>(samples.size());
}

std::vector<BinaryMask> predict_masks(UNetModel<float>& model, const std::vector<Sample>& samples,
                                      std::size_t batch_size) {
  NoGradGuard guard;
  std::vector<BinaryMask> out;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Tensor<float> images, masks;
  RngStream unused(0, 0);
  for (std::size_t first = 0; first < order.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - first);
    stack_batch(samples, std::span<const std::size_t>(order).subspan(first, count), images, masks);
    const Var<float> probs = model.forward(images, ForwardMode::deterministic, unused);
    const std::size_t h = images.dim(2), w = images.dim(3);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(BinaryMask::threshold(probs.value().data().subspan(i * h * w, h * w), h, w));
    }
  }
  return out;
}

std::vector<BinaryMask> reference_masks(const std::vector<Sample>& samples) {
  std::vector<BinaryMask> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(BinaryMask::threshold(s.mask.data(), s.mask.dim(1), s.mask.dim(2)));
  }
  return out;
}

TrainResult train_model(UNetModel<float>& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                        TrainingState& state, const TrainOptions& options) {
  if (train.empty()) throw UsageError("train_model: no training samples");
  if (options.batch_size < 1) throw ParameterError("train_model: batch_size must be positive");
  options.loss.validate();

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  auto params = model.parameters();
  std::vector<std::size_t> order(train.size());
  Tensor<float> images, masks;

  for (int e = 0; e < options.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(state.rng.next_below(i))]);
    }
    double epoch_loss = 0.0;
    for (std::size_t first = 0; first < order.size(); first += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - first);
      stack_batch(train, std::span<const std::size_t>(order).subspan(first, count), images, masks);
      model.zero_grad();
      const Var<float> probs = model.forward(images, ForwardMode::train, state.rng);
      const Var<float> loss = compute_loss(options.loss, masks, probs);
      backward(loss);
      for (auto& [name, p] : params) adam_step(*p, state.adam);
      epoch_loss += static_cast<double>(loss.value()[0]) * static_cast<double>(count);
    }
    ++state.epoch;

    EpochLog log;
    log.epoch = state.epoch;
    log.train_loss = epoch_loss / static_cast<double>(train.size());
    log.val_loss = evaluate_loss(model, val, options.loss, options.batch_size);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (options.keep_best && !val.empty() && log.val_loss < result.best_val_loss) {
      result.best_val_loss = log.val_loss;
      result.best_epoch = log.epoch;
      result.best = checkpoint_container(model, state);
    }
    if (options.on_epoch) options.on_epoch(log);
  }
  return result;
}

}  // namespace mcdseg
