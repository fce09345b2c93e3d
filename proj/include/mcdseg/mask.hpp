#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcdseg/tensor.hpp"

namespace mcdseg {

/// Row-major binary image, one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width) : height_(height), width_(width), px_(height * width, 0) {}
  BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels);

  /// Foreground where value >= threshold.
  template <typename T>
  static BinaryMask threshold(std::span<const T> values, std::size_t height, std::size_t width,
                              double threshold = 0.5);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return px_.size(); }

  std::uint8_t operator[](std::size_t i) const noexcept { return px_[i]; }
  std::uint8_t& operator[](std::size_t i) noexcept { return px_[i]; }
  std::uint8_t at(std::size_t y, std::size_t x) const noexcept { return px_[y * width_ + x]; }
  void set(std::size_t y, std::size_t x, bool on) noexcept { px_[y * width_ + x] = on ? 1 : 0; }

  std::span<const std::uint8_t> pixels() const noexcept { return px_; }
  std::size_t count() const noexcept;
  bool empty_foreground() const noexcept { return count() == 0; }
  bool same_dims(const BinaryMask& o) const noexcept { return height_ == o.height_ && width_ == o.width_; }
  bool subset_of(const BinaryMask& o) const;

  template <typename T>
  Tensor<T> to_tensor() const {
    Tensor<T> t(Shape{height_, width_});
    for (std::size_t i = 0; i < px_.size(); ++i) t[i] = static_cast<T>(px_[i]);
    return t;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> px_;
};

}  // namespace mcdseg
