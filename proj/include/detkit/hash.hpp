#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <openssl/evp.h>

#include "detkit/errors.hpp"

namespace detkit {

namespace detail {

template <std::size_t N>
std::array<std::uint8_t, N> evp_digest(const EVP_MD* md, const void* data,
                                       std::size_t len) {
  std::array<std::uint8_t, N> out{};
  unsigned int out_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, md, nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data, len) != 1 ||
      EVP_DigestFinal_ex(ctx, out.data(), &out_len) != 1 || out_len != N) {
    EVP_MD_CTX_free(ctx);
    throw numeric_error("digest computation failed");
  }
  EVP_MD_CTX_free(ctx);
  return out;
}

inline std::string to_hex(const std::uint8_t* bytes, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = digits[bytes[i] >> 4];
    s[2 * i + 1] = digits[bytes[i] & 0xF];
  }
  return s;
}

}  // namespace detail

/// MD5 per RFC 1321, lowercase hex. An integrity fingerprint for
/// run-to-run comparison, not a security boundary.
inline std::string md5_hex(const std::string& bytes) {
  auto d = detail::evp_digest<16>(EVP_md5(), bytes.data(), bytes.size());
  return detail::to_hex(d.data(), d.size());
}

inline std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len) {
  return detail::evp_digest<32>(EVP_sha256(), data, len);
}

/// First 8 digest bytes of SHA-256 interpreted as a big-endian u64.
inline std::uint64_t sha256_prefix_u64(const std::string& bytes) {
  auto d = sha256(bytes.data(), bytes.size());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace detkit
