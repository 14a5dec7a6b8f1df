#ifndef XBARSIM_IO_HPP
#define XBARSIM_IO_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbarsim/tensor.hpp"

namespace xbarsim {

// Portable tensor file: 8-byte magic, 1 dtype byte (0 = float32 LE,
// 1 = uint8), 1 rank byte, rank x 8-byte LE extents, raw row-major payload.
inline constexpr char kTensorMagic[8] = {'T', 'N', 'S', 'R', '0', '0', '0', '1'};

enum class TensorDType : std::uint8_t { Float32 = 0, Uint8 = 1 };

struct PortableTensor {
  TensorDType dtype = TensorDType::Float32;
  Shape shape;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  std::int64_t numel() const { return shape_numel(shape); }
};

namespace detail {

inline void put_u64_le(std::ofstream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f32_le(std::ofstream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

}  // namespace detail

inline void write_tensor_file(const std::filesystem::path& path, const PortableTensor& t) {
  if (t.shape.size() > 255) throw std::invalid_argument("write_tensor_file: rank > 255");
  for (auto e : t.shape)
    if (e < 1) throw std::invalid_argument("write_tensor_file: extent < 1");
  const std::int64_t n = t.numel();
  if ((t.dtype == TensorDType::Float32 && static_cast<std::int64_t>(t.f32.size()) != n) ||
      (t.dtype == TensorDType::Uint8 && static_cast<std::int64_t>(t.u8.size()) != n))
    throw std::invalid_argument("write_tensor_file: payload does not match shape");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_tensor_file: cannot open " + path.string());
  os.write(kTensorMagic, 8);
  os.put(static_cast<char>(t.dtype));
  os.put(static_cast<char>(t.shape.size()));
  for (auto e : t.shape) detail::put_u64_le(os, static_cast<std::uint64_t>(e));
  if (t.dtype == TensorDType::Float32) {
    for (float f : t.f32) detail::put_f32_le(os, f);
  } else {
    os.write(reinterpret_cast<const char*>(t.u8.data()), static_cast<std::streamsize>(t.u8.size()));
  }
  if (!os) throw std::runtime_error("write_tensor_file: write failed for " + path.string());
}

inline PortableTensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_tensor_file: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kTensorMagic, 8) != 0)
    throw std::runtime_error("read_tensor_file: bad magic in " + path.string());
  const int dtype = is.get();
  const int rank = is.get();
  if (dtype != 0 && dtype != 1)
    throw std::runtime_error("read_tensor_file: unknown dtype in " + path.string());
  if (rank < 0 || is.eof()) throw std::runtime_error("read_tensor_file: truncated header");

  PortableTensor t;
  t.dtype = static_cast<TensorDType>(dtype);
  t.shape.resize(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) {
    t.shape[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(detail::get_u64_le(is));
    if (!is || t.shape[static_cast<std::size_t>(i)] < 1)
      throw std::runtime_error("read_tensor_file: bad extent in " + path.string());
  }
  const std::int64_t n = t.numel();
  const std::int64_t elem = t.dtype == TensorDType::Float32 ? 4 : 1;
  const std::int64_t expected = 8 + 2 + 8 * rank + n * elem;
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec || static_cast<std::int64_t>(actual) != expected)
    throw std::runtime_error("read_tensor_file: payload length mismatch in " + path.string() +
                             " (expected " + std::to_string(expected) + " bytes)");

  if (t.dtype == TensorDType::Float32) {
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 4);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw std::runtime_error("read_tensor_file: truncated payload in " + path.string());
    t.f32.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(raw[static_cast<std::size_t>(4 * i + b)]) << (8 * b);
      std::memcpy(&t.f32[static_cast<std::size_t>(i)], &bits, 4);
    }
  } else {
    t.u8.resize(static_cast<std::size_t>(n));
    is.read(reinterpret_cast<char*>(t.u8.data()), static_cast<std::streamsize>(t.u8.size()));
    if (!is) throw std::runtime_error("read_tensor_file: truncated payload in " + path.string());
  }
  return t;
}

inline void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  PortableTensor pt;
  pt.dtype = TensorDType::Float32;
  pt.shape = t.shape();
  pt.f32 = t.vec();
  write_tensor_file(path, pt);
}

inline Tensor read_float_tensor(const std::filesystem::path& path) {
  PortableTensor pt = read_tensor_file(path);
  if (pt.dtype != TensorDType::Float32)
    throw std::runtime_error("read_float_tensor: " + path.string() + " is not float32");
  return Tensor(pt.shape, std::move(pt.f32));
}

}  // namespace xbarsim

#endif
