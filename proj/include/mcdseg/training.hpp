#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mcdseg/checkpoint.hpp"
#include "mcdseg/dataset.hpp"
#include "mcdseg/losses.hpp"
#include "mcdseg/mask.hpp"

namespace mcdseg {

struct EpochLog {
  std::uint64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double seconds = 0.0;
};

struct TrainOptions {
  int epochs = 150;
  std::size_t batch_size = 12;
  LossConfig loss = LossConfig::dice();
  bool keep_best = true;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::uint64_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::optional<TensorContainer> best;  // checkpoint at the best validation loss
};

/// Shuffled mini-batch Adam. Shuffling and dropout draw from state.rng, so a
/// run is a pure function of the model, the samples and the state.
TrainResult train_model(UNetModel<float>& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                        TrainingState& state, const TrainOptions& options);

/// Mean loss over fixed-order batches in deterministic mode.
double evaluate_loss(UNetModel<float>& model, const std::vector<Sample>& samples, const LossConfig& loss,
                     std::size_t batch_size);

/// Deterministic-mode binary predictions, one per sample.
std::vector<BinaryMask> predict_masks(UNetModel<float>& model, const std::vector<Sample>& samples,
                                      std::size_t batch_size = 16);

std::vector<BinaryMask> reference_masks(const std::vector<Sample>& samples);

}  // namespace mcdseg
