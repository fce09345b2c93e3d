#include "mcdseg/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcdseg/metrics.hpp"

namespace mcdseg {

template <typename T>
StochasticPredictionSet mc_predict(UNetModel<T>& model, const Tensor<T>& image, std::size_t n_trials,
                                   std::uint64_t base_seed, std::size_t trial_batch, std::string image_id) {
  if (n_trials < 1) throw ParameterError("mc_predict: n_trials must be at least 1");
  if (trial_batch < 1) throw ParameterError("mc_predict: trial_batch must be at least 1");
  Shape s = image.shape();
  if (s.size() == 2) s.insert(s.begin(), 1);
  if (s.size() != 3 || s[0] != 1) throw DimensionError("mc_predict: expected [1,H,W], got " + shape_str(image.shape()));
  const std::size_t h = s[1], w = s[2], plane = h * w;
  const Tensor<T> input = image.reshaped(Shape{1, 1, h, w});

  StochasticPredictionSet set;
  set.image_id = std::move(image_id);
  set.height = h;
  set.width = w;
  set.base_seed = base_seed;
  set.prob_maps = Tensor<float>(Shape{n_trials, h, w});
  set.bin_masks.resize(n_trials);

  const std::size_t batches = (n_trials + trial_batch - 1) / trial_batch;
#pragma omp parallel for schedule(dynamic) if (batches > 1)
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t first = b * trial_batch;
    const std::size_t count = std::min(trial_batch, n_trials - first);
    std::vector<RngStream> streams;
    streams.reserve(count);
    for (std::size_t i = 0; i < count; ++i) streams.push_back(trial_stream(base_seed, first + i));
    const Tensor<T> probs = model.forward_replicated(input, streams);
    for (std::size_t i = 0; i < count; ++i) {
      const T* src = probs.ptr() + i * plane;
      float* dst = set.prob_maps.ptr() + (first + i) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<float>(src[p]);
      set.bin_masks[first + i] = BinaryMask::threshold(std::span<const T>(src, plane), h, w, 0.5);
    }
  }
  return set;
}

namespace {

std::vector<std::uint32_t> foreground_counts(const StochasticPredictionSet& set) {
  if (set.n_trials() == 0) throw InsufficientTrials("prediction set has no trials");
  std::vector<std::uint32_t> counts(set.height * set.width, 0);
  for (const auto& m : set.bin_masks)
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += m[i];
  return counts;
}

}  // namespace

BinaryMask mean_prediction(const StochasticPredictionSet& set) {
  const auto counts = foreground_counts(set);
  const std::size_t n = set.n_trials();
  BinaryMask out(set.height, set.width);
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = 2 * std::size_t{counts[i]} >= n ? 1 : 0;
  return out;
}

Tensor<double> uncertainty_map(const StochasticPredictionSet& set) {
  if (set.n_trials() < 2) throw InsufficientTrials("uncertainty map needs at least two trials");
  const auto counts = foreground_counts(set);
  const double n = static_cast<double>(set.n_trials());
  Tensor<double> map(Shape{set.height, set.width});
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double p = counts[i] / n;
    map[i] = std::sqrt(p * (1.0 - p));
  }
  return map;
}

std::vector<double> trial_dice(const StochasticPredictionSet& set, const BinaryMask& reference) {
  if (reference.size() == 0) throw UsageError("a reference mask is required");
  if (reference.height() != set.height || reference.width() != set.width) {
    throw DimensionError("reference mask dimensions do not match the prediction set");
  }
  std::vector<double> d;
  d.reserve(set.n_trials());
  for (const auto& m : set.bin_masks) d.push_back(dice_coefficient(m, reference));
  return d;
}

double dice_uncertainty(const StochasticPredictionSet& set, const BinaryMask& reference) {
  if (set.n_trials() < 2) throw InsufficientTrials("dice uncertainty needs at least two trials");
  const auto d = trial_dice(set, reference);
  return population_std(d);
}

double mcd_uncertainty(const StochasticPredictionSet& set) {
  const BinaryMask mean = mean_prediction(set);
  const std::size_t volume = mean.count();
  if (volume == 0) throw EmptyPrediction("mcd uncertainty undefined: mean prediction is empty");
  const Tensor<double> map = uncertainty_map(set);
  double total = 0.0;
  for (double v : map.data()) total += v;
  return total / static_cast<double>(volume);
}

UncertaintyReport uncertainty_report(const StochasticPredictionSet& set, const BinaryMask& reference) {
  UncertaintyReport r;
  r.image_id = set.image_id;
  const auto d = trial_dice(set, reference);
  r.mean_dice = mean_of(d);
  r.dice_uncertainty = population_std(d);
  r.predicted_volume = mean_prediction(set).count();
  if (r.predicted_volume > 0) r.mcd_uncertainty = mcd_uncertainty(set);
  return r;
}

std::vector<BootstrapPoint> bootstrap_trial_convergence(const StochasticPredictionSet& set,
                                                        std::span<const std::size_t> trial_counts,
                                                        std::size_t n_boot, RngStream& rng,
                                                        UncertaintyScore score, const BinaryMask* reference) {
  const std::size_t m = set.n_trials();
  if (n_boot < 2) throw ParameterError("bootstrap: n_boot must be at least 2");
  for (std::size_t n : trial_counts) {
    if (n == 0 || n > m) {
      throw ParameterError("bootstrap: trial count " + std::to_string(n) + " outside [1, " + std::to_string(m) + "]");
    }
  }

  std::vector<double> per_trial_dice;
  // Pixels that are foreground in every stored trial, and the per-trial
  // lists of "active" pixels (ones that flip somewhere in the pool). Constant
  // pixels contribute nothing to the uncertainty map, so the resampling loop
  // only touches active pixels.
  std::size_t always_on = 0;
  std::vector<std::uint32_t> active_index;  // pixel -> slot, or npos
  std::vector<std::vector<std::uint32_t>> trial_active_on(m);
  std::size_t n_active = 0;
  if (score == UncertaintyScore::dice) {
    if (!reference) throw UsageError("bootstrap: dice score needs a reference mask");
    per_trial_dice = trial_dice(set, *reference);
  } else {
    const auto counts = foreground_counts(set);
    constexpr std::uint32_t npos = ~std::uint32_t{0};
    active_index.assign(counts.size(), npos);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] == m) ++always_on;
      else if (counts[i] > 0) active_index[i] = static_cast<std::uint32_t>(n_active++);
    }
    for (std::size_t t = 0; t < m; ++t) {
      const auto& mask = set.bin_masks[t];
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] && active_index[i] != npos) trial_active_on[t].push_back(active_index[i]);
    }
  }

  std::vector<std::size_t> pool(m);
  std::vector<std::uint32_t> counts(n_active);
  std::vector<double> sub_dice;
  std::vector<BootstrapPoint> out;
  for (std::size_t n : trial_counts) {
    std::vector<double> scores;
    scores.reserve(n_boot);
    for (std::size_t b = 0; b < n_boot; ++b) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(m - i));
        std::swap(pool[i], pool[j]);
      }
      if (score == UncertaintyScore::dice) {
        sub_dice.clear();
        for (std::size_t i = 0; i < n; ++i) sub_dice.push_back(per_trial_dice[pool[i]]);
        scores.push_back(population_std(sub_dice));
        continue;
      }
      std::fill(counts.begin(), counts.end(), 0u);
      for (std::size_t i = 0; i < n; ++i)
        for (std::uint32_t slot : trial_active_on[pool[i]]) ++counts[slot];
      std::size_t volume = always_on;
      double total = 0.0;
      const double nn = static_cast<double>(n);
      for (std::uint32_t c : counts) {
        if (2 * std::size_t{c} >= n) ++volume;
        const double p = c / nn;
        total += std::sqrt(p * (1.0 - p));
      }
      if (volume == 0) throw EmptyPrediction("bootstrap: empty mean prediction in a resample");
      scores.push_back(total / static_cast<double>(volume));
    }
    out.push_back({n, mean_of(scores), population_std(scores)});
  }
  return out;
}

template StochasticPredictionSet mc_predict<float>(UNetModel<float>&, const Tensor<float>&, std::size_t,
                                                   std::uint64_t, std::size_t, std::string);
template StochasticPredictionSet mc_predict<double>(UNetModel<double>&, const Tensor<double>&, std::size_t,
                                                    std::uint64_t, std::size_t, std::string);

}  // namespace mcdseg
