#include "mcdseg/unet.hpp"

#include <algorithm>
#include <cmath>

namespace mcdseg {

UNetConfig UNetConfig::full() {
  UNetConfig c;
  c.depth = 5;
  c.base_channels = 64;
  return c;
}

UNetConfig UNetConfig::desk() { return UNetConfig{}; }

void UNetConfig::validate() const {
  if (depth < 2) throw ConfigError("unet: depth must be at least 2, got " + std::to_string(depth));
  if (depth > 12) throw ConfigError("unet: depth " + std::to_string(depth) + " is unreasonably large");
  if (base_channels < 1) throw ConfigError("unet: base_channels must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("unet: kernel_size must be odd");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("unet: dropout_rate must lie in [0, 1)");
  if (in_channels != 1 || out_channels != 1) throw ConfigError("unet: only single-channel in/out is supported");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ConfigError("unet: bn_momentum must lie in (0, 1]");
  if (!(bn_epsilon > 0.0)) throw ConfigError("unet: bn_epsilon must be positive");
}

namespace {

template <typename T>
Parameter<T> he_normal(Shape shape, std::size_t fan_in, RngStream& rng) {
  Tensor<T> w(std::move(shape));
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w.data()) v = static_cast<T>(std * rng.next_normal());
  return Parameter<T>(std::move(w));
}

template <typename T>
Parameter<T> filled(std::size_t n, T value) {
  return Parameter<T>(Tensor<T>(Shape{n}, value));
}

template <typename T>
typename UNetModel<T>::ConvBnBlock make_block(std::size_t in, std::size_t out, std::size_t k, RngStream& rng) {
  typename UNetModel<T>::ConvBnBlock b;
  b.weight = he_normal<T>(Shape{out, in, k, k}, in * k * k, rng);
  b.bias = filled<T>(out, T{0});
  b.gamma = filled<T>(out, T{1});
  b.beta = filled<T>(out, T{0});
  b.stats = BatchNormState<T>(out);
  return b;
}

}  // namespace

template <typename T>
UNetModel<T>::UNetModel(const UNetConfig& config, RngStream& rng) : config_(config) {
  config_.validate();
  const std::size_t k = static_cast<std::size_t>(config_.kernel_size);
  std::size_t in = static_cast<std::size_t>(config_.in_channels);
  for (int s = 0; s < config_.depth; ++s) {
    const std::size_t ch = static_cast<std::size_t>(config_.channels_at(s));
    ScaleBlocks sb;
    sb.first = make_block<T>(in, ch, k, rng);
    sb.second = make_block<T>(ch, ch, k, rng);
    encoder_.push_back(std::move(sb));
    in = ch;
  }
  up_.resize(static_cast<std::size_t>(config_.depth - 1));
  decoder_.resize(static_cast<std::size_t>(config_.depth - 1));
  for (int s = config_.depth - 2; s >= 0; --s) {
    const std::size_t ch = static_cast<std::size_t>(config_.channels_at(s));
    const std::size_t below = static_cast<std::size_t>(config_.channels_at(s + 1));
    auto& up = up_[static_cast<std::size_t>(s)];
    up.weight = he_normal<T>(Shape{below, ch, 2, 2}, below, rng);
    up.bias = filled<T>(ch, T{0});
    auto& dec = decoder_[static_cast<std::size_t>(s)];
    dec.first = make_block<T>(2 * ch, ch, k, rng);
    dec.second = make_block<T>(ch, ch, k, rng);
  }
  const std::size_t base = static_cast<std::size_t>(config_.base_channels);
  head_weight_ = he_normal<T>(Shape{static_cast<std::size_t>(config_.out_channels), base, 1, 1}, base, rng);
  head_bias_ = filled<T>(static_cast<std::size_t>(config_.out_channels), T{0});
}

template <typename T>
std::vector<std::pair<std::string, Parameter<T>*>> UNetModel<T>::parameters() {
  std::vector<std::pair<std::string, Parameter<T>*>> out;
  auto add_block = [&](const std::string& prefix, int idx, ConvBnBlock& b) {
    const std::string i = std::to_string(idx);
    out.emplace_back(prefix + ".conv" + i + ".weight", &b.weight);
    out.emplace_back(prefix + ".conv" + i + ".bias", &b.bias);
    out.emplace_back(prefix + ".bn" + i + ".gamma", &b.gamma);
    out.emplace_back(prefix + ".bn" + i + ".beta", &b.beta);
  };
  for (std::size_t s = 0; s < encoder_.size(); ++s) {
    const std::string p = "enc" + std::to_string(s);
    add_block(p, 1, encoder_[s].first);
    add_block(p, 2, encoder_[s].second);
  }
  for (std::size_t s = up_.size(); s-- > 0;) {
    const std::string u = "up" + std::to_string(s);
    out.emplace_back(u + ".weight", &up_[s].weight);
    out.emplace_back(u + ".bias", &up_[s].bias);
    const std::string d = "dec" + std::to_string(s);
    add_block(d, 1, decoder_[s].first);
    add_block(d, 2, decoder_[s].second);
  }
  out.emplace_back("head.weight", &head_weight_);
  out.emplace_back("head.bias", &head_bias_);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Parameter<T>*>> UNetModel<T>::parameters() const {
  std::vector<std::pair<std::string, const Parameter<T>*>> out;
  for (auto& [name, p] : const_cast<UNetModel*>(this)->parameters()) out.emplace_back(name, p);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, BatchNormState<T>*>> UNetModel<T>::batch_norm_states() {
  std::vector<std::pair<std::string, BatchNormState<T>*>> out;
  for (std::size_t s = 0; s < encoder_.size(); ++s) {
    const std::string p = "enc" + std::to_string(s);
    out.emplace_back(p + ".bn1", &encoder_[s].first.stats);
    out.emplace_back(p + ".bn2", &encoder_[s].second.stats);
  }
  for (std::size_t s = decoder_.size(); s-- > 0;) {
    const std::string p = "dec" + std::to_string(s);
    out.emplace_back(p + ".bn1", &decoder_[s].first.stats);
    out.emplace_back(p + ".bn2", &decoder_[s].second.stats);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const BatchNormState<T>*>> UNetModel<T>::batch_norm_states() const {
  std::vector<std::pair<std::string, const BatchNormState<T>*>> out;
  for (auto& [name, s] : const_cast<UNetModel*>(this)->batch_norm_states()) out.emplace_back(name, s);
  return out;
}

template <typename T>
std::size_t UNetModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : parameters()) n += p->value.size();
  return n;
}

template <typename T>
void UNetModel<T>::zero_grad() {
  for (auto& [name, p] : parameters()) p->zero_grad();
}

template <typename T>
void UNetModel<T>::check_input(const Shape& s) const {
  if (s.size() != 4 || s[1] != static_cast<std::size_t>(config_.in_channels)) {
    throw DimensionError("unet: expected input [N," + std::to_string(config_.in_channels) + ",H,W], got " +
                         shape_str(s));
  }
  const std::size_t m = config_.spatial_multiple();
  if (s[2] == 0 || s[3] == 0 || s[2] % m || s[3] % m) {
    throw DimensionError("unet: spatial dims " + shape_str(s) + " must be positive multiples of " +
                         std::to_string(m));
  }
}

template <typename T>
Var<T> UNetModel<T>::block(ConvBnBlock& b, const Var<T>& x, ForwardMode mode) {
  BatchNormOptions opts{config_.bn_momentum, config_.bn_epsilon};
  auto h = conv2d(x, b.weight.value, std::optional<Var<T>>(b.bias.value));
  if (mode == ForwardMode::train) {
    h = batch_norm2d(h, b.gamma.value, b.beta.value, b.stats, NormMode::train, opts);
  } else if (mode == ForwardMode::mc_dropout && config_.mc_batch_stats) {
    BatchNormState<T> scratch = b.stats;  // running statistics stay untouched at inference
    h = batch_norm2d(h, b.gamma.value, b.beta.value, scratch, NormMode::train, opts);
  } else {
    h = batch_norm2d(h, b.gamma.value, b.beta.value, b.stats, NormMode::eval, opts);
  }
  return relu(h);
}

template <typename T>
Var<T> UNetModel<T>::stem(const Var<T>& x, ForwardMode mode) {
  auto h = block(encoder_[0].first, x, mode);
  return block(encoder_[0].second, h, mode);
}

template <typename T>
Var<T> UNetModel<T>::run(const Var<T>& x, ForwardMode mode, std::span<RngStream> streams,
                         const Var<T>* shared_stem) {
  const bool active = mode != ForwardMode::deterministic;
  const double rate = config_.dropout_rate;
  const std::size_t depth = static_cast<std::size_t>(config_.depth);
  std::vector<Var<T>> skips;
  Var<T> h = x;
  for (std::size_t s = 0; s < depth; ++s) {
    if (s == 0) {
      h = shared_stem ? *shared_stem : stem(h, mode);
    } else {
      h = block(encoder_[s].first, h, mode);
      h = block(encoder_[s].second, h, mode);
    }
    h = dropout(h, rate, streams, active);
    if (s + 1 < depth) {
      skips.push_back(h);
      h = max_pool2d(h);
    }
  }
  for (std::size_t s = depth - 1; s-- > 0;) {
    h = transposed_conv2d(h, up_[s].weight.value, std::optional<Var<T>>(up_[s].bias.value));
    h = concat_channels(skips[s], h);
    h = block(decoder_[s].first, h, mode);
    h = block(decoder_[s].second, h, mode);
    h = dropout(h, rate, streams, active);
  }
  h = conv2d(h, head_weight_.value, std::optional<Var<T>>(head_bias_.value));
  return sigmoid(h);
}

template <typename T>
Var<T> UNetModel<T>::forward(const Tensor<T>& batch, ForwardMode mode, RngStream& rng) {
  check_input(batch.shape());
  std::vector<RngStream> streams;
  streams.reserve(batch.dim(0));
  for (std::size_t n = 0; n < batch.dim(0); ++n) streams.push_back(rng.child(n));
  rng.skip(1);
  return run(Var<T>(batch), mode, streams, nullptr);
}

template <typename T>
Var<T> UNetModel<T>::forward(const Tensor<T>& batch, ForwardMode mode, std::span<RngStream> streams) {
  return forward(Var<T>(batch), mode, streams);
}

template <typename T>
Var<T> UNetModel<T>::forward(const Var<T>& batch, ForwardMode mode, std::span<RngStream> streams) {
  check_input(batch.shape());
  if (mode != ForwardMode::deterministic && streams.size() != batch.shape()[0]) {
    throw DimensionError("unet: need one dropout stream per sample");
  }
  return run(batch, mode, streams, nullptr);
}

template <typename T>
Tensor<T> UNetModel<T>::forward_replicated(const Tensor<T>& image, std::span<RngStream> streams) {
  Shape s = image.shape();
  if (s.size() == 3) s.insert(s.begin(), 1);
  if (s.size() != 4 || s[0] != 1) throw DimensionError("forward_replicated: expected a single image, got " + shape_str(image.shape()));
  check_input(s);
  const std::size_t reps = streams.size();
  if (reps == 0) throw UsageError("forward_replicated: no trial streams");
  const Tensor<T> single = image.reshaped(s);
  NoGradGuard no_grad;

  auto tile = [reps](const Tensor<T>& t) {
    Shape ts = t.shape();
    ts[0] = reps;
    Tensor<T> out(ts);
    for (std::size_t r = 0; r < reps; ++r) std::copy_n(t.ptr(), t.size(), out.ptr() + r * t.size());
    return out;
  };

  if (config_.mc_batch_stats) {
    return run(Var<T>(tile(single)), ForwardMode::mc_dropout, streams, nullptr).value();
  }
  Var<T> shared = stem(Var<T>(single), ForwardMode::mc_dropout);
  Var<T> tiled(tile(shared.value()));
  return run(Var<T>(single), ForwardMode::mc_dropout, streams, &tiled).value();
}

template class UNetModel<float>;
template class UNetModel<double>;

}  // namespace mcdseg
