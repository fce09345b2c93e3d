#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcdseg/losses.hpp"
#include "mcdseg/optim.hpp"
#include "mcdseg/phantom.hpp"
#include "mcdseg/unet.hpp"

namespace mcdseg {

nlohmann::json to_json(const UNetConfig& c);
UNetConfig unet_config_from_json(const nlohmann::json& j, UNetConfig base = {});
nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j, LossConfig base = {});
nlohmann::json to_json(const AdamConfig& c);
AdamConfig adam_config_from_json(const nlohmann::json& j, AdamConfig base = {});
nlohmann::json to_json(const PhantomConfig& c);
PhantomConfig phantom_config_from_json(const nlohmann::json& j, PhantomConfig base = {});

enum class ImageSubset { control, labeled, both };
std::string to_string(ImageSubset s);
ImageSubset parse_image_subset(const std::string& s);

/// Every knob of every subcommand. Unknown keys in a config file are
/// rejected so typos do not silently fall back to defaults.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string dataset_dir;  // defaults to out_dir for generate, required elsewhere
  std::string checkpoint;   // model to evaluate
  std::string init_from;    // fine-tuning start point

  // generate
  PhantomConfig phantom;
  std::size_t train_series = 73;  // x6 images: 438 / 42 / 144
  std::size_t val_series = 7;
  std::size_t test_series = 24;

  // train
  UNetConfig unet = UNetConfig::desk();
  LossConfig loss = LossConfig::dice();
  int epochs = 150;
  std::size_t batch_size = 12;
  double learning_rate = 1e-4;
  ImageSubset subset = ImageSubset::both;
  std::size_t max_train_images = 0;  // 0 = all

  // uncertainty / timing / mbf-eval
  std::size_t n_mc_trials = 256;
  std::size_t trial_batch = 16;
  ImageSubset eval_subset = ImageSubset::control;
  std::size_t max_eval_images = 0;  // 0 = all
  std::vector<std::size_t> timing_batch_sizes{1, 4, 16, 64, 256};
  std::size_t timing_trials = 1024;

  // beta-sweep
  std::vector<double> betas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::uint64_t> sweep_seeds{1};

  void validate() const;
  AdamConfig adam() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Applies the keys present in `j` on top of `base`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace mcdseg
