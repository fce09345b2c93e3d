#include "mcdseg/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace mcdseg {

namespace {

std::size_t dtype_size(TensorContainer::DType d) {
  switch (d) {
    case TensorContainer::DType::f32: return 4;
    case TensorContainer::DType::f64: return 8;
    case TensorContainer::DType::u8: return 1;
    case TensorContainer::DType::i64: return 8;
  }
  return 0;
}

TensorContainer::DType parse_dtype(const std::string& s) {
  if (s == "f32") return TensorContainer::DType::f32;
  if (s == "f64") return TensorContainer::DType::f64;
  if (s == "u8") return TensorContainer::DType::u8;
  if (s == "i64") return TensorContainer::DType::i64;
  throw BadHeader("container: unknown dtype '" + s + "'");
}

// Copies `count` elements of `width` bytes, reversing each element on
// big-endian hosts so the file is always little-endian.
void copy_le(std::byte* dst, const std::byte* src, std::size_t count, std::size_t width) {
  std::memcpy(dst, src, count * width);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < count; ++i) std::reverse(dst + i * width, dst + (i + 1) * width);
  }
}

void put_u64_le(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const std::byte* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
  return v;
}

}  // namespace

std::string to_string(TensorContainer::DType d) {
  switch (d) {
    case TensorContainer::DType::f32: return "f32";
    case TensorContainer::DType::f64: return "f64";
    case TensorContainer::DType::u8: return "u8";
    case TensorContainer::DType::i64: return "i64";
  }
  return "?";
}

TensorContainer::Entry& TensorContainer::insert(const std::string& name, DType dtype, const Shape& shape) {
  if (contains(name)) throw UsageError("container: duplicate tensor name '" + name + "'");
  Entry e;
  e.name = name;
  e.dtype = dtype;
  e.shape = shape;
  e.bytes.resize(numel(shape) * dtype_size(dtype));
  entries_.push_back(std::move(e));
  return entries_.back();
}

template <typename T>
void TensorContainer::put(const std::string& name, const Tensor<T>& t) {
  Entry& e = insert(name, std::is_same_v<T, float> ? DType::f32 : DType::f64, t.shape());
  copy_le(e.bytes.data(), reinterpret_cast<const std::byte*>(t.ptr()), t.size(), sizeof(T));
}

void TensorContainer::put_u8(const std::string& name, const Shape& shape, std::span<const std::uint8_t> values) {
  if (values.size() != numel(shape)) throw DimensionError("container: u8 data does not match shape");
  Entry& e = insert(name, DType::u8, shape);
  std::memcpy(e.bytes.data(), values.data(), values.size());
}

void TensorContainer::put_i64(const std::string& name, const Shape& shape, std::span<const std::int64_t> values) {
  if (values.size() != numel(shape)) throw DimensionError("container: i64 data does not match shape");
  Entry& e = insert(name, DType::i64, shape);
  copy_le(e.bytes.data(), reinterpret_cast<const std::byte*>(values.data()), values.size(), 8);
}

bool TensorContainer::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const TensorContainer::Entry& TensorContainer::entry(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw InputError("container: no tensor named '" + name + "'");
}

template <typename T>
Tensor<T> TensorContainer::get(const std::string& name) const {
  const Entry& e = entry(name);
  Tensor<T> out(e.shape);
  const std::size_t n = out.size();
  if (e.dtype == DType::f32) {
    std::vector<float> tmp(n);
    copy_le(reinterpret_cast<std::byte*>(tmp.data()), e.bytes.data(), n, 4);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(tmp[i]);
  } else if (e.dtype == DType::f64) {
    std::vector<double> tmp(n);
    copy_le(reinterpret_cast<std::byte*>(tmp.data()), e.bytes.data(), n, 8);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(tmp[i]);
  } else {
    throw InputError("container: tensor '" + name + "' is " + to_string(e.dtype) + ", not floating point");
  }
  return out;
}

std::vector<std::uint8_t> TensorContainer::get_u8(const std::string& name, Shape* shape) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::u8) throw InputError("container: tensor '" + name + "' is not u8");
  if (shape) *shape = e.shape;
  std::vector<std::uint8_t> out(e.bytes.size());
  std::memcpy(out.data(), e.bytes.data(), out.size());
  return out;
}

std::vector<std::int64_t> TensorContainer::get_i64(const std::string& name, Shape* shape) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::i64) throw InputError("container: tensor '" + name + "' is not i64");
  if (shape) *shape = e.shape;
  std::vector<std::int64_t> out(numel(e.shape));
  copy_le(reinterpret_cast<std::byte*>(out.data()), e.bytes.data(), out.size(), 8);
  return out;
}

std::vector<std::byte> TensorContainer::serialize() const {
  nlohmann::json header;
  header["metadata"] = metadata;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    header["tensors"].push_back({{"name", e.name},
                                 {"dtype", to_string(e.dtype)},
                                 {"shape", e.shape},
                                 {"offset", offset},
                                 {"length", e.bytes.size()}});
    offset += e.bytes.size();
  }
  const std::string text = header.dump();
  std::vector<std::byte> out;
  out.reserve(16 + text.size() + offset);
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_u64_le(out, text.size());
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  for (const auto& e : entries_) out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  return out;
}

TensorContainer TensorContainer::parse(std::span<const std::byte> bytes) {
  if (bytes.size() < kMagic.size()) throw TruncatedFile("container: file shorter than the magic");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw MagicMismatch("container: bad magic bytes");
  }
  if (bytes.size() < 16) throw TruncatedFile("container: missing header length");
  const std::uint64_t header_len = get_u64_le(bytes.data() + 8);
  if (header_len > bytes.size() - 16) throw TruncatedFile("container: header runs past end of file");

  nlohmann::json header;
  try {
    const char* text = reinterpret_cast<const char*>(bytes.data() + 16);
    header = nlohmann::json::parse(text, text + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw BadHeader(std::string("container: header is not valid JSON: ") + e.what());
  }

  TensorContainer c;
  const std::byte* payload = bytes.data() + 16 + header_len;
  const std::uint64_t payload_len = bytes.size() - 16 - header_len;
  try {
    if (!header.is_object() || !header.contains("tensors") || !header["tensors"].is_array()) {
      throw BadHeader("container: header lacks a tensors array");
    }
    if (header.contains("metadata")) c.metadata = header["metadata"];
    for (const auto& t : header["tensors"]) {
      const auto dtype = parse_dtype(t.at("dtype").get<std::string>());
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto length = t.at("length").get<std::uint64_t>();
      if (length != numel(shape) * dtype_size(dtype)) {
        throw BadHeader("container: length of '" + t.at("name").get<std::string>() + "' disagrees with its shape");
      }
      if (offset > payload_len || length > payload_len - offset) {
        throw TruncatedFile("container: payload of '" + t.at("name").get<std::string>() + "' is truncated");
      }
      Entry& e = c.insert(t.at("name").get<std::string>(), dtype, shape);
      std::memcpy(e.bytes.data(), payload + offset, length);
    }
  } catch (const nlohmann::json::exception& e) {
    throw BadHeader(std::string("container: malformed tensor entry: ") + e.what());
  }
  return c;
}

void TensorContainer::save(const std::filesystem::path& path) const { write_file_bytes(path, serialize()); }

TensorContainer TensorContainer::load(const std::filesystem::path& path) { return parse(read_file_bytes(path)); }

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

template void TensorContainer::put<float>(const std::string&, const Tensor<float>&);
template void TensorContainer::put<double>(const std::string&, const Tensor<double>&);
template Tensor<float> TensorContainer::get<float>(const std::string&) const;
template Tensor<double> TensorContainer::get<double>(const std::string&) const;

}  // namespace mcdseg
