#pragma once

#include <array>
#include <span>
#include <vector>

#include "mcdseg/mask.hpp"
#include "mcdseg/rng.hpp"
#include "mcdseg/tensor.hpp"

namespace mcdseg {

/// Constants of the single-inversion-time difference model.
struct MbfConstants {
  double inversion_time = 1.0;         // s
  double t1_blood = 1.65;              // s
  double m0 = 100.0;                   // a.u.
  double partition_coefficient = 0.9;  // ml/g

  /// Control-minus-labeled myocardial signal produced by `mbf`.
  double signal_difference(double mbf) const;
  /// Inverse of signal_difference.
  double flow_from_difference(double diff) const;
};

/// Synthetic short-axis slice: a blood-pool disk inside a myocardial annulus
/// on a flat background.
///
/// Control blood sits `control_cnr` noise units above control myocardium and
/// labeled blood `labeled_cnr` units above labeled myocardium; each series
/// scales both targets by its own factor drawn uniformly with relative std
/// `cnr_spread`. Labeled myocardium is control myocardium minus
/// signal_difference(true_mbf), so the blood pool ends up with a larger
/// control-labeled difference than the muscle.
struct PhantomConfig {
  std::size_t image_size = 48;
  double center_jitter = 2.0;                    // max center offset, pixels
  std::array<double, 2> blood_radius{5.0, 8.0};  // pixels
  std::array<double, 2> myo_thickness{8.0, 10.0};
  double background_margin = 3.0;  // background starts this far outside the annulus

  double background_control = 400.0;
  double background_labeled = 200.0;
  double myo_control = 1000.0;
  double control_cnr = 21.44;
  double labeled_cnr = 6.46;
  double cnr_spread = 0.17;

  double noise_sigma = 20.0;
  std::array<double, 2> noise_scale{1.0, 1.0};  // per-series multiplier of noise_sigma
  std::array<double, 2> true_mbf{0.5, 2.0};     // ml/g/min
  MbfConstants constants;

  void validate() const;
};

inline constexpr std::size_t kPairsPerSeries = 6;

struct ASLSeries {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Tensor<double>> control;  // kPairsPerSeries images [H, W]
  std::vector<Tensor<double>> labeled;
  BinaryMask reference_mask;  // myocardial annulus
  BinaryMask blood_mask;
  BinaryMask background_mask;
  double true_mbf = 0.0;
  double noise_sigma = 0.0;  // effective std of the added noise
  double center_y = 0.0;
  double center_x = 0.0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
};

ASLSeries generate_series(const PhantomConfig& config, RngStream& rng);

struct MBFResult {
  std::vector<double> per_pair_mbf;
  double mean_mbf = 0.0;
  double physiological_noise = 0.0;
};

/// Per pair: flow_from_difference(mean_masked(control) - mean_masked(labeled)).
MBFResult quantify_mbf(std::span<const Tensor<double>> control, std::span<const Tensor<double>> labeled,
                       const BinaryMask& mask, const MbfConstants& constants = {});
MBFResult quantify_mbf(const ASLSeries& series, const BinaryMask& mask, const MbfConstants& constants = {});

/// Population std of the per-pair values.
double physiological_noise(const MBFResult& result);

/// (mean(blood) - mean(myo)) / std(background), population std.
double compute_cnr(const Tensor<double>& image, const BinaryMask& myo, const BinaryMask& blood,
                   const BinaryMask& background);

/// (x - mean) / std with population std. Constant images throw DegenerateError.
template <typename T>
Tensor<T> normalize_image(const Tensor<T>& image);

}  // namespace mcdseg
