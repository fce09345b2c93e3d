#pragma once

#include <cstdint>
#include <string_view>

namespace mcdseg {

/// Counter-based random stream.
///
/// Value k of a stream is a pure function of (seed, stream_id, k): the
/// SplitMix64 finalizer applied to a key derived from seed and stream_id plus
/// k times the golden-ratio increment. Random access through bits_at() lets
/// kernels fill large masks in any order (or in parallel) and still produce
/// the same values as a sequential walk.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-counter-v1";
  static constexpr std::uint64_t kAlgorithmId = 0x534d3634'43545231ULL;

  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t algorithm_id() const noexcept { return kAlgorithmId; }
  /// Number of values consumed so far.
  std::uint64_t position() const noexcept { return counter_; }
  void set_position(std::uint64_t counter) noexcept { counter_ = counter; }
  void skip(std::uint64_t n) noexcept { counter_ += n; }

  std::uint64_t bits_at(std::uint64_t counter) const noexcept;
  double uniform_at(std::uint64_t counter) const noexcept { return to_unit(bits_at(counter)); }

  std::uint64_t next_u64() noexcept { return bits_at(counter_++); }
  /// Uniform in [0, 1) with 53 random bits.
  double next_uniform() noexcept { return to_unit(next_u64()); }
  double next_uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_uniform(); }
  /// Standard normal via Box-Muller; consumes exactly two values.
  double next_normal() noexcept;
  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) noexcept;

  /// Independent stream keyed on this stream's identity, its current
  /// position and `id`. Does not advance this stream.
  RngStream child(std::uint64_t id) const noexcept;

  static double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  friend bool operator==(const RngStream& a, const RngStream& b) noexcept {
    return a.seed_ == b.seed_ && a.stream_id_ == b.stream_id_ && a.counter_ == b.counter_;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace mcdseg
