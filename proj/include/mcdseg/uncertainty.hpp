#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcdseg/mask.hpp"
#include "mcdseg/unet.hpp"

namespace mcdseg {

/// N stochastic predictions of one image.
struct StochasticPredictionSet {
  std::string image_id;
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint64_t base_seed = 0;
  Tensor<float> prob_maps;            // [N, H, W]
  std::vector<BinaryMask> bin_masks;  // prob >= 0.5

  std::size_t n_trials() const { return bin_masks.size(); }
};

struct UncertaintyReport {
  std::string image_id;
  double mean_dice = 0.0;         // mean of per-trial Dice against the reference
  double dice_uncertainty = 0.0;  // population std of per-trial Dice
  std::optional<double> mcd_uncertainty;  // empty when the mean prediction is empty
  std::size_t predicted_volume = 0;
};

/// Stream used by trial i of an MC run.
inline RngStream trial_stream(std::uint64_t base_seed, std::uint64_t trial) {
  return RngStream(base_seed, base_seed ^ trial);
}

/// Runs n_trials mc_dropout forwards of `image` ([1,H,W] or [H,W]), trial_batch
/// trials per forward pass. Trial i always uses trial_stream(base_seed, i), so
/// the result is identical for every trial_batch and thread count.
template <typename T>
StochasticPredictionSet mc_predict(UNetModel<T>& model, const Tensor<T>& image, std::size_t n_trials,
                                   std::uint64_t base_seed, std::size_t trial_batch,
                                   std::string image_id = {});

/// Pixel-wise mean of the binary trial masks, foreground where >= 0.5.
BinaryMask mean_prediction(const StochasticPredictionSet& set);

/// Pixel-wise population std of the binary trial masks, [H, W], values in [0, 0.5].
Tensor<double> uncertainty_map(const StochasticPredictionSet& set);

/// Dice of each trial mask against the reference.
std::vector<double> trial_dice(const StochasticPredictionSet& set, const BinaryMask& reference);

/// Population std of the per-trial Dice values.
double dice_uncertainty(const StochasticPredictionSet& set, const BinaryMask& reference);

/// Sum of the uncertainty map divided by the mean-prediction volume.
/// Throws EmptyPrediction when the mean prediction has no foreground.
double mcd_uncertainty(const StochasticPredictionSet& set);

UncertaintyReport uncertainty_report(const StochasticPredictionSet& set, const BinaryMask& reference);

enum class UncertaintyScore { mcd, dice };

struct BootstrapPoint {
  std::size_t n_trials = 0;
  double mean = 0.0;
  double std = 0.0;  // population std over the bootstrap replicates
};

/// Re-estimates the chosen score from n_boot subsamples of each size in
/// trial_counts, drawn without replacement from the stored trials.
/// `reference` is required for UncertaintyScore::dice.
std::vector<BootstrapPoint> bootstrap_trial_convergence(const StochasticPredictionSet& set,
                                                        std::span<const std::size_t> trial_counts,
                                                        std::size_t n_boot, RngStream& rng,
                                                        UncertaintyScore score = UncertaintyScore::mcd,
                                                        const BinaryMask* reference = nullptr);

}  // namespace mcdseg
