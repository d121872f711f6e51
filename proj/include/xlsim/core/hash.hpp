#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "xlsim/core/error.hpp"

namespace xlsim::hash {

using Digest = std::array<uint8_t, 32>;

inline Digest sha256_bytes(std::span<const uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw DataError("sha256 failed");
  return out;
}

inline Digest sha256_bytes(std::string_view s) {
  return sha256_bytes(std::span(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

inline std::string hex(std::span<const uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

inline std::string sha256_hex(std::string_view s) { return hex(sha256_bytes(s)); }

/// First eight digest bytes as a little-endian integer; used for seeding.
inline uint64_t sha256_u64(std::string_view s) {
  const auto d = sha256_bytes(s);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace xlsim::hash
