#pragma once

// Little-endian primitive encoding shared by the descriptor and model formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "copr/error.hpp"

namespace copr::binary {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFFu), static_cast<char>((v >> 8) & 0xFFu),
                              static_cast<char>((v >> 16) & 0xFFu),
                              static_cast<char>((v >> 24) & 0xFFu)};
  os.write(b.data(), 4);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (is.gcount() != 4) throw Error(ErrorCode::ParseError, "truncated " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get_u32(is, what));
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  is.read(got, 4);
  if (is.gcount() != 4 || std::memcmp(got, magic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, std::string("expected magic '") + magic + "'");
  }
}

}  // namespace copr::binary
