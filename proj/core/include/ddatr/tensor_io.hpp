#pragma once

// Raw tensor fixture format. Little-endian throughout:
//   magic "DDTR" | version u16 | rank u16 | elem width u16 (4 or 8)
//   | extents u64[rank] | payload f32/f64[numel]

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "ddatr/tensor.hpp"

namespace ddatr {

inline constexpr std::uint16_t kTensorFormatVersion = 1;

class TensorIoError : public std::runtime_error {
 public:
  explicit TensorIoError(const std::string& what) : std::runtime_error("tensor io: " + what) {}
};

namespace detail {

template <typename U>
void write_le(std::ostream& os, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U read_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  is.read(reinterpret_cast<char*>(buf), sizeof(U));
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_le<std::uint32_t>(os, bits);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_le<std::uint64_t>(os, bits);
}

inline float read_f32(std::istream& is) {
  const std::uint32_t bits = read_le<std::uint32_t>(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline double read_f64(std::istream& is) {
  const std::uint64_t bits = read_le<std::uint64_t>(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.write("DDTR", 4);
  detail::write_le<std::uint16_t>(os, kTensorFormatVersion);
  detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(t.rank()));
  detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(sizeof(T)));
  for (std::size_t d : t.shape()) detail::write_le<std::uint64_t>(os, d);
  for (T v : t.values()) {
    if constexpr (sizeof(T) == 4) {
      detail::write_f32(os, static_cast<float>(v));
    } else {
      detail::write_f64(os, static_cast<double>(v));
    }
  }
  if (!os) throw TensorIoError("write failed");
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DDTR", 4) != 0) throw TensorIoError("bad magic");
  const auto version = detail::read_le<std::uint16_t>(is);
  if (version != kTensorFormatVersion) {
    throw TensorIoError("unsupported version " + std::to_string(version));
  }
  const auto rank = detail::read_le<std::uint16_t>(is);
  const auto width = detail::read_le<std::uint16_t>(is);
  if (width != 4 && width != 8) throw TensorIoError("bad element width");
  Shape shape(rank);
  for (auto& d : shape) {
    d = static_cast<std::size_t>(detail::read_le<std::uint64_t>(is));
    if (d == 0) throw TensorIoError("zero extent");
  }
  std::vector<T> data(numel(shape));
  for (auto& v : data) {
    v = width == 4 ? static_cast<T>(detail::read_f32(is)) : static_cast<T>(detail::read_f64(is));
  }
  if (!is) throw TensorIoError("truncated payload");
  return Tensor<T>::from_data(std::move(shape), std::move(data));
}

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw TensorIoError("cannot open " + path + " for writing");
  write_tensor(os, t);
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorIoError("cannot open " + path);
  return read_tensor<T>(is);
}

}  // namespace ddatr
