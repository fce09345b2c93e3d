#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mcdseg/config.hpp"
#include "mcdseg/container.hpp"
#include "mcdseg/phantom.hpp"

namespace mcdseg {

struct SeriesSplit {
  std::string name;
  std::vector<ASLSeries> series;

  std::size_t image_count() const { return series.size() * 2 * kPairsPerSeries; }
};

/// Series k of the split uses RngStream(seed, split_stream_id(name)).child(k),
/// so generation is order- and thread-independent.
SeriesSplit generate_split(const std::string& name, std::size_t n_series, const PhantomConfig& config,
                           std::uint64_t seed);
std::uint64_t split_stream_id(const std::string& name);

/// Tensors: control, labeled [S,6,H,W] f64; reference_mask, blood_mask,
/// background_mask [S,H,W] u8; true_mbf, noise_sigma [S]; geometry [S,4]
/// (center_y, center_x, inner_radius, outer_radius).
TensorContainer split_container(const SeriesSplit& split, const nlohmann::json& metadata = nlohmann::json::object());
SeriesSplit split_from_container(const TensorContainer& c, const std::string& name);

void save_split(const std::filesystem::path& path, const SeriesSplit& split,
                const nlohmann::json& metadata = nlohmann::json::object());
SeriesSplit load_split(const std::filesystem::path& path, const std::string& name = {});

/// <dir>/<name>.tensors
std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& name);

/// One network input and its target, both [1,H,W].
struct Sample {
  Tensor<float> image;  // normalized
  Tensor<float> mask;
  std::size_t series = 0;
  std::size_t pair = 0;
  bool labeled = false;
};

/// Normalized per-image samples, series-major, control before labeled
/// within a pair.
std::vector<Sample> make_samples(const SeriesSplit& split, ImageSubset subset);

/// Stacks samples [first, first+count) of `order` into [B,1,H,W] tensors.
void stack_batch(const std::vector<Sample>& samples, std::span<const std::size_t> order, Tensor<float>& images,
                 Tensor<float>& masks);

}  // namespace mcdseg
