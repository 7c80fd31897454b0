#pragma once

// Little-endian primitives shared by the model file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "harmony/error.hpp"
#include "harmony/types.hpp"

namespace harmony::binary {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes;
  for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), 4);
}

inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_magic(std::ostream& out, std::string_view magic) { out.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

inline void get_bytes(std::istream& in, char* dst, std::size_t n, std::string_view what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("model file truncated while reading " + std::string(what));
}

inline std::uint64_t get_u64(std::istream& in, std::string_view what) {
  std::array<unsigned char, 8> bytes;
  get_bytes(in, reinterpret_cast<char*>(bytes.data()), 8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

inline std::uint32_t get_u32(std::istream& in, std::string_view what) {
  std::array<unsigned char, 4> bytes;
  get_bytes(in, reinterpret_cast<char*>(bytes.data()), 4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

inline std::uint8_t get_u8(std::istream& in, std::string_view what) {
  char c;
  get_bytes(in, &c, 1, what);
  return static_cast<std::uint8_t>(c);
}

inline double get_f64(std::istream& in, std::string_view what) { return std::bit_cast<double>(get_u64(in, what)); }

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  get_bytes(in, got.data(), magic.size(), "magic");
  if (got != magic) throw DataError("not a " + std::string(magic.substr(0, magic.size() - 1)) + " file (bad magic)");
}

inline void put_ids(std::ostream& out, const std::vector<ClassId>& ids) {
  put_u32(out, static_cast<std::uint32_t>(ids.size()));
  for (ClassId c : ids) put_u32(out, static_cast<std::uint32_t>(c));
}

inline std::vector<ClassId> get_ids(std::istream& in, std::string_view what) {
  const auto n = get_u32(in, what);
  std::vector<ClassId> ids;
  for (std::uint32_t i = 0; i < n; ++i) ids.push_back(static_cast<ClassId>(get_u32(in, what)));
  return ids;
}

}  // namespace harmony::binary
