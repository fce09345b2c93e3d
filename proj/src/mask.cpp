#include "mcdseg/mask.hpp"

#include <algorithm>
#include <string>

namespace mcdseg {

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels)
    : height_(height), width_(width), px_(std::move(pixels)) {
  if (px_.size() != height_ * width_) {
    throw DimensionError("mask: " + std::to_string(px_.size()) + " pixels for " + std::to_string(height_) + "x" +
                         std::to_string(width_));
  }
  for (auto v : px_) {
    if (v > 1) throw InputError("mask: pixel values must be 0 or 1");
  }
}

template <typename T>
BinaryMask BinaryMask::threshold(std::span<const T> values, std::size_t height, std::size_t width,
                                 double threshold) {
  if (values.size() != height * width) throw DimensionError("mask threshold: size mismatch");
  BinaryMask m(height, width);
  for (std::size_t i = 0; i < values.size(); ++i) m.px_[i] = values[i] >= threshold ? 1 : 0;
  return m;
}

template BinaryMask BinaryMask::threshold<float>(std::span<const float>, std::size_t, std::size_t, double);
template BinaryMask BinaryMask::threshold<double>(std::span<const double>, std::size_t, std::size_t, double);

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(px_.begin(), px_.end(), std::uint8_t{1}));
}

bool BinaryMask::subset_of(const BinaryMask& o) const {
  if (!same_dims(o)) throw DimensionError("mask subset: dimension mismatch");
  for (std::size_t i = 0; i < px_.size(); ++i)
    if (px_[i] && !o.px_[i]) return false;
  return true;
}

}  // namespace mcdseg
