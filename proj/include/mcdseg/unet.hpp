#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcdseg/ops.hpp"
#include "mcdseg/optim.hpp"

namespace mcdseg {

struct UNetConfig {
  int depth = 3;  // number of resolution scales, bottleneck included
  int base_channels = 16;
  int kernel_size = 5;
  double dropout_rate = 0.5;
  int in_channels = 1;
  int out_channels = 1;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  // Batch-norm statistics used in mc_dropout mode: false = running
  // statistics (dropout is the only stochastic element), true = batch
  // statistics over the replicated trial batch.
  bool mc_batch_stats = false;

  /// 5 scales, 64 base feature maps, 5x5 kernels, 50% dropout.
  static UNetConfig full();
  /// 3 scales, 16 base feature maps, 5x5 kernels, 50% dropout.
  static UNetConfig desk();

  void validate() const;
  /// Channel count at scale s (0-based), doubling per scale.
  int channels_at(int scale) const { return base_channels << scale; }
  /// Spatial dims must be divisible by this.
  std::size_t spatial_multiple() const { return std::size_t{1} << (depth - 1); }

  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

enum class ForwardMode { train, mc_dropout, deterministic };

/// The MC-dropout U-Net. Each scale is two conv -> BN -> ReLU blocks
/// followed by dropout; skip connections concatenate encoder features ahead
/// of the decoder's up-convolved features; the head is 1x1 conv -> sigmoid.
template <typename T>
class UNetModel {
 public:
  struct ConvBnBlock {
    Parameter<T> weight, bias, gamma, beta;
    BatchNormState<T> stats;
  };
  struct ScaleBlocks {
    ConvBnBlock first, second;
  };
  struct UpConv {
    Parameter<T> weight, bias;
  };

  UNetModel(const UNetConfig& config, RngStream& rng);

  const UNetConfig& config() const { return config_; }

  std::vector<std::pair<std::string, Parameter<T>*>> parameters();
  std::vector<std::pair<std::string, const Parameter<T>*>> parameters() const;
  std::vector<std::pair<std::string, BatchNormState<T>*>> batch_norm_states();
  std::vector<std::pair<std::string, const BatchNormState<T>*>> batch_norm_states() const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// Per-sample dropout streams are derived from `rng`, which advances by one.
  Var<T> forward(const Tensor<T>& batch, ForwardMode mode, RngStream& rng);
  /// `streams` supplies one dropout stream per batch sample.
  Var<T> forward(const Tensor<T>& batch, ForwardMode mode, std::span<RngStream> streams);
  Var<T> forward(const Var<T>& batch, ForwardMode mode, std::span<RngStream> streams);

  /// mc_dropout forward of one image replicated once per stream. The
  /// deterministic part ahead of the first dropout is computed once and
  /// shared; results are bit-identical to forward() on a batch of copies.
  Tensor<T> forward_replicated(const Tensor<T>& image, std::span<RngStream> streams);

 private:
  Var<T> block(ConvBnBlock& b, const Var<T>& x, ForwardMode mode);
  Var<T> stem(const Var<T>& x, ForwardMode mode);
  Var<T> run(const Var<T>& x, ForwardMode mode, std::span<RngStream> streams, const Var<T>* shared_stem);
  void check_input(const Shape& s) const;

  UNetConfig config_;
  std::vector<ScaleBlocks> encoder_;  // depth entries; last is the bottleneck
  std::vector<UpConv> up_;            // depth - 1 entries, indexed by target scale
  std::vector<ScaleBlocks> decoder_;  // depth - 1 entries, indexed by scale
  Parameter<T> head_weight_, head_bias_;
};

template <typename T>
UNetModel<T> build_unet(const UNetConfig& config, RngStream& rng) {
  return UNetModel<T>(config, rng);
}

}  // namespace mcdseg
