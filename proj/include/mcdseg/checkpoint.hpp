#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "mcdseg/container.hpp"
#include "mcdseg/unet.hpp"

namespace mcdseg {

/// Everything besides the network needed to resume training.
struct TrainingState {
  std::uint64_t epoch = 0;
  RngStream rng;
  AdamConfig adam;
  nlohmann::json extra = nlohmann::json::object();  // free-form, e.g. the loss config
};

/// Tensors: param/<name>, adam_m/<name>, adam_v/<name>, bn/<name>/running_{mean,var},
/// adam_steps (i64, one per parameter). Metadata holds the configs, epoch and RNG state.
template <typename T>
TensorContainer checkpoint_container(const UNetModel<T>& model, const TrainingState& state);

/// Copies tensors from a checkpoint into `model`. Throws ConfigMismatch when
/// the stored UNetConfig or dtype differs from the model's.
template <typename T>
TrainingState restore_checkpoint(const TensorContainer& c, UNetModel<T>& model);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const UNetModel<T>& model, const TrainingState& state) {
  checkpoint_container(model, state).save(path);
}

template <typename T>
TrainingState load_checkpoint(const std::filesystem::path& path, UNetModel<T>& model) {
  return restore_checkpoint(TensorContainer::load(path), model);
}

UNetConfig checkpoint_unet_config(const TensorContainer& c);

/// Builds a model with the stored config and restores it.
template <typename T>
UNetModel<T> load_model(const std::filesystem::path& path, TrainingState* state = nullptr);

}  // namespace mcdseg
