// SPDX-License-Identifier: Apache-2.0
#pragma once

// Little-endian primitives shared by the on-disk formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "author2vec/common.hpp"

namespace a2v::binio {

template <typename UInt>
void put_uint(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

inline void put_u8(std::ostream& out, std::uint8_t v) { put_uint(out, v); }
inline void put_u16(std::ostream& out, std::uint16_t v) { put_uint(out, v); }
inline void put_u32(std::ostream& out, std::uint32_t v) { put_uint(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_uint(out, v); }
inline void put_i64(std::ostream& out, std::int64_t v) {
  put_uint(out, static_cast<std::uint64_t>(v));
}
inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

/// u16 length prefix + UTF-8 bytes.
inline void put_string(std::ostream& out, std::string_view s) {
  if (s.size() > 0xffff) throw DataError("string too long for u16 length prefix: " + std::string(s.substr(0, 32)));
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Thrown by the readers below when the stream ends early.
class TruncatedStream : public DataError {
 public:
  explicit TruncatedStream(const std::string& what) : DataError(what) {}
};

inline void read_exact(std::istream& in, char* dst, std::size_t n, std::string_view what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw TruncatedStream("unexpected end of file while reading " + std::string(what));
  }
}

template <typename UInt>
UInt get_uint(std::istream& in, std::string_view what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  read_exact(in, reinterpret_cast<char*>(bytes.data()), bytes.size(), what);
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

inline std::uint8_t get_u8(std::istream& in, std::string_view what) { return get_uint<std::uint8_t>(in, what); }
inline std::uint16_t get_u16(std::istream& in, std::string_view what) { return get_uint<std::uint16_t>(in, what); }
inline std::uint32_t get_u32(std::istream& in, std::string_view what) { return get_uint<std::uint32_t>(in, what); }
inline std::uint64_t get_u64(std::istream& in, std::string_view what) { return get_uint<std::uint64_t>(in, what); }
inline std::int64_t get_i64(std::istream& in, std::string_view what) {
  return static_cast<std::int64_t>(get_u64(in, what));
}
inline float get_f32(std::istream& in, std::string_view what) { return std::bit_cast<float>(get_u32(in, what)); }
inline double get_f64(std::istream& in, std::string_view what) { return std::bit_cast<double>(get_u64(in, what)); }

inline std::string get_string(std::istream& in, std::string_view what) {
  const auto len = get_u16(in, what);
  std::string s(len, '\0');
  read_exact(in, s.data(), len, what);
  return s;
}

/// Reads `magic.size()` bytes and compares. Returns false on mismatch or short read.
inline bool check_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  return static_cast<std::size_t>(in.gcount()) == magic.size() && got == magic;
}

}  // namespace a2v::binio
