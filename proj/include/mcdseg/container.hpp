#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mcdseg/tensor.hpp"

namespace mcdseg {

/// Binary file of named arrays:
///   8 bytes  "TENSORS1"
///   8 bytes  little-endian u64 header length
///   header   UTF-8 JSON {"metadata": {...}, "tensors": [{name, dtype, shape, offset, length}]}
///   payload  raw little-endian row-major arrays; offsets are relative to the payload start
class TensorContainer {
 public:
  enum class DType { f32, f64, u8, i64 };

  struct Entry {
    std::string name;
    DType dtype = DType::f64;
    Shape shape;
    std::vector<std::byte> bytes;  // little-endian
  };

  static constexpr std::string_view kMagic = "TENSORS1";

  nlohmann::json metadata = nlohmann::json::object();

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t);
  void put_u8(const std::string& name, const Shape& shape, std::span<const std::uint8_t> values);
  void put_i64(const std::string& name, const Shape& shape, std::span<const std::int64_t> values);

  bool contains(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  /// Reads f32 or f64 entries, converting to T.
  template <typename T>
  Tensor<T> get(const std::string& name) const;
  std::vector<std::uint8_t> get_u8(const std::string& name, Shape* shape = nullptr) const;
  std::vector<std::int64_t> get_i64(const std::string& name, Shape* shape = nullptr) const;

  std::vector<std::byte> serialize() const;
  static TensorContainer parse(std::span<const std::byte> bytes);

  void save(const std::filesystem::path& path) const;
  static TensorContainer load(const std::filesystem::path& path);

 private:
  Entry& insert(const std::string& name, DType dtype, const Shape& shape);
  std::vector<Entry> entries_;
};

std::string to_string(TensorContainer::DType d);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace mcdseg
