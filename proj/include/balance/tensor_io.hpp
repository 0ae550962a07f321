#pragma once

// BLT1 binary tensor format:
//   bytes 0..3   "BLT1"
//   3 x uint32   C, H, W (little endian)
//   C*H*W x f64  IEEE-754 doubles, little endian, row-major (c, h, w)

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "balance/error.hpp"
#include "balance/tensor.hpp"

namespace balance {

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int k = 0; k < bytes; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
  return v;
}

}  // namespace detail

inline std::string encode_tensor(const Tensor& t) {
  std::string out = "BLT1";
  out.reserve(16 + 8 * t.size());
  detail::put_le(out, t.channels(), 4);
  detail::put_le(out, t.height(), 4);
  detail::put_le(out, t.width(), 4);
  for (double v : t.data()) detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

inline Tensor decode_tensor(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "BLT1") != 0) {
    throw InvalidArgument("not a BLT1 tensor (bad magic or truncated header)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto c = static_cast<std::size_t>(detail::get_le(p + 4, 4));
  const auto h = static_cast<std::size_t>(detail::get_le(p + 8, 4));
  const auto w = static_cast<std::size_t>(detail::get_le(p + 12, 4));
  const std::size_t n = c * h * w;
  if (bytes.size() != 16 + 8 * n) {
    throw InvalidArgument("BLT1 payload length " + std::to_string(bytes.size() - 16) + " does not match " +
                          Shape{c, h, w}.str());
  }
  std::vector<double> data(n);
  for (std::size_t k = 0; k < n; ++k) data[k] = std::bit_cast<double>(detail::get_le(p + 16 + 8 * k, 8));
  return Tensor(c, h, w, std::move(data));
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Tensor read_tensor(const std::string& path) { return decode_tensor(read_file_bytes(path)); }

inline void write_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path);
  const std::string bytes = encode_tensor(t);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace balance
