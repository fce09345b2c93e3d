#include "mcdseg/phantom.hpp"

#include <cmath>
#include <string>

#include "mcdseg/metrics.hpp"

namespace mcdseg {

double MbfConstants::signal_difference(double mbf) const {
  return 2.0 * m0 * mbf * inversion_time * std::exp(-inversion_time / t1_blood) / partition_coefficient;
}

double MbfConstants::flow_from_difference(double diff) const {
  return partition_coefficient * diff / (2.0 * m0 * inversion_time * std::exp(-inversion_time / t1_blood));
}

void PhantomConfig::validate() const {
  auto range_ok = [](const std::array<double, 2>& r) { return r[0] <= r[1]; };
  if (image_size < 8) throw ConfigError("phantom: image_size must be at least 8");
  if (!range_ok(blood_radius) || !range_ok(myo_thickness) || !range_ok(noise_scale) || !range_ok(true_mbf)) {
    throw ConfigError("phantom: every range needs lo <= hi");
  }
  if (blood_radius[0] <= 0.0) throw ConfigError("phantom: blood radius must be positive");
  if (myo_thickness[0] <= 0.0) throw ConfigError("phantom: annulus outer radius must exceed the inner radius");
  if (center_jitter < 0.0 || background_margin < 0.0) throw ConfigError("phantom: negative jitter or margin");
  const double reach = blood_radius[1] + myo_thickness[1] + center_jitter + background_margin;
  if (reach >= 0.5 * static_cast<double>(image_size) - 0.5) {
    throw ConfigError("phantom: annulus plus margin (" + std::to_string(reach) + " px) exceeds the image");
  }
  if (noise_sigma < 0.0 || noise_scale[0] < 0.0) throw ConfigError("phantom: noise must be nonnegative");
  if (true_mbf[0] < 0.0) throw ConfigError("phantom: true_mbf must be nonnegative");
  if (cnr_spread < 0.0 || cnr_spread * std::sqrt(3.0) >= 1.0) throw ConfigError("phantom: cnr_spread out of range");
  if (!(control_cnr > labeled_cnr) || labeled_cnr < 0.0) {
    throw ConfigError("phantom: control CNR target must exceed the labeled target");
  }
  if (background_control < 0.0 || background_labeled < 0.0 || myo_control < 0.0) {
    throw ConfigError("phantom: signal levels must be nonnegative");
  }
  if (myo_control - constants.signal_difference(true_mbf[1]) < 0.0) {
    throw ConfigError("phantom: labeled myocardium would go negative at the top of the MBF range");
  }
  if (constants.inversion_time <= 0.0 || constants.t1_blood <= 0.0 || constants.m0 <= 0.0 ||
      constants.partition_coefficient <= 0.0) {
    throw ConfigError("phantom: quantification constants must be positive");
  }
}

ASLSeries generate_series(const PhantomConfig& config, RngStream& rng) {
  config.validate();
  const std::size_t n = config.image_size;
  ASLSeries s;
  s.height = s.width = n;

  const double mid = 0.5 * static_cast<double>(n - 1);
  s.center_y = mid + rng.next_uniform(-config.center_jitter, config.center_jitter);
  s.center_x = mid + rng.next_uniform(-config.center_jitter, config.center_jitter);
  s.inner_radius = rng.next_uniform(config.blood_radius[0], config.blood_radius[1]);
  s.outer_radius = s.inner_radius + rng.next_uniform(config.myo_thickness[0], config.myo_thickness[1]);
  s.true_mbf = rng.next_uniform(config.true_mbf[0], config.true_mbf[1]);
  const double spread = config.cnr_spread * std::sqrt(3.0);
  const double control_factor = 1.0 + rng.next_uniform(-spread, spread);
  const double labeled_factor = 1.0 + rng.next_uniform(-spread, spread);
  s.noise_sigma = config.noise_sigma * rng.next_uniform(config.noise_scale[0], config.noise_scale[1]);

  // Contrast is tied to the nominal sigma so that noise_scale alone moves the CNR.
  const double sigma0 = config.noise_sigma;
  const double myo_c = config.myo_control;
  const double blood_c = myo_c + config.control_cnr * control_factor * sigma0;
  const double myo_l = myo_c - config.constants.signal_difference(s.true_mbf);
  const double blood_l = myo_l + config.labeled_cnr * labeled_factor * sigma0;

  s.reference_mask = BinaryMask(n, n);
  s.blood_mask = BinaryMask(n, n);
  s.background_mask = BinaryMask(n, n);
  Tensor<double> base_c(Shape{n, n}), base_l(Shape{n, n});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double d = std::hypot(static_cast<double>(y) - s.center_y, static_cast<double>(x) - s.center_x);
      const std::size_t i = y * n + x;
      if (d <= s.inner_radius) {
        s.blood_mask[i] = 1;
        base_c[i] = blood_c;
        base_l[i] = blood_l;
      } else if (d <= s.outer_radius) {
        s.reference_mask[i] = 1;
        base_c[i] = myo_c;
        base_l[i] = myo_l;
      } else {
        if (d > s.outer_radius + config.background_margin) s.background_mask[i] = 1;
        base_c[i] = config.background_control;
        base_l[i] = config.background_labeled;
      }
    }
  }

  for (std::size_t p = 0; p < kPairsPerSeries; ++p) {
    Tensor<double> c = base_c, l = base_l;
    if (s.noise_sigma > 0.0) {
      for (double& v : c.data()) v += s.noise_sigma * rng.next_normal();
      for (double& v : l.data()) v += s.noise_sigma * rng.next_normal();
    }
    s.control.push_back(std::move(c));
    s.labeled.push_back(std::move(l));
  }
  return s;
}

namespace {

double masked_mean(const Tensor<double>& image, const BinaryMask& mask) {
  if (image.size() != mask.size()) throw DimensionError("mask and image sizes differ");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      sum += image[i];
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

MBFResult quantify_mbf(std::span<const Tensor<double>> control, std::span<const Tensor<double>> labeled,
                       const BinaryMask& mask, const MbfConstants& constants) {
  if (mask.count() == 0) throw EmptyMask("quantify_mbf: mask is empty");
  if (control.size() != labeled.size() || control.empty()) {
    throw DimensionError("quantify_mbf: need matching nonempty control and labeled lists");
  }
  MBFResult r;
  for (std::size_t p = 0; p < control.size(); ++p) {
    const double diff = masked_mean(control[p], mask) - masked_mean(labeled[p], mask);
    r.per_pair_mbf.push_back(constants.flow_from_difference(diff));
  }
  r.mean_mbf = mean_of(r.per_pair_mbf);
  r.physiological_noise = physiological_noise(r);
  return r;
}

MBFResult quantify_mbf(const ASLSeries& series, const BinaryMask& mask, const MbfConstants& constants) {
  return quantify_mbf(series.control, series.labeled, mask, constants);
}

double physiological_noise(const MBFResult& result) {
  if (result.per_pair_mbf.empty()) throw UsageError("physiological_noise: no per-pair values");
  return population_std(result.per_pair_mbf);
}

double compute_cnr(const Tensor<double>& image, const BinaryMask& myo, const BinaryMask& blood,
                   const BinaryMask& background) {
  if (myo.count() == 0 || blood.count() == 0 || background.count() == 0) {
    throw EmptyMask("compute_cnr: every region needs at least one pixel");
  }
  std::vector<double> bg;
  for (std::size_t i = 0; i < background.size(); ++i)
    if (background[i]) bg.push_back(image[i]);
  const double noise = population_std(bg);
  if (noise == 0.0) throw DegenerateError("compute_cnr: background has zero variance");
  return (masked_mean(image, blood) - masked_mean(image, myo)) / noise;
}

template <typename T>
Tensor<T> normalize_image(const Tensor<T>& image) {
  if (image.empty()) throw DimensionError("normalize_image: empty image");
  double sum = 0.0;
  for (T v : image.data()) sum += static_cast<double>(v);
  const double mean = sum / static_cast<double>(image.size());
  double ss = 0.0;
  for (T v : image.data()) ss += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  const double sd = std::sqrt(ss / static_cast<double>(image.size()));
  if (!(sd > 0.0)) throw DegenerateError("normalize_image: constant image");
  Tensor<T> out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = static_cast<T>((static_cast<double>(image[i]) - mean) / sd);
  return out;
}

template Tensor<float> normalize_image<float>(const Tensor<float>&);
template Tensor<double> normalize_image<double>(const Tensor<double>&);

}  // namespace mcdseg
