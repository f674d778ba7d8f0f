#pragma once

// Thin wrappers over OpenSSL for AES-128-GCM and SHA-256.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sgxmr {

inline constexpr std::size_t kKeySize = 16;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;

using Key = std::array<std::uint8_t, kKeySize>;
using Nonce = std::array<std::uint8_t, kNonceSize>;
using Tag = std::array<std::uint8_t, kTagSize>;
using Digest = std::array<std::uint8_t, 32>;

/// Parses 32 hex digits. Throws std::invalid_argument otherwise.
Key parse_key_hex(std::string_view hex);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// 4-byte little-endian domain followed by an 8-byte little-endian counter.
Nonce make_nonce(std::uint32_t domain, std::uint64_t counter);

Digest sha256(std::span<const std::uint8_t> data);

/// Encrypts `plaintext` into `ciphertext` (same length) and returns the tag.
Tag aes_gcm_encrypt(const Key& key, const Nonce& nonce, std::span<const std::uint8_t> aad,
                    std::span<const std::uint8_t> plaintext, std::span<std::uint8_t> ciphertext);

/// Returns false if the tag does not verify; `plaintext` is then unspecified.
bool aes_gcm_decrypt(const Key& key, std::span<const std::uint8_t> nonce,
                     std::span<const std::uint8_t> aad, std::span<const std::uint8_t> ciphertext,
                     std::span<const std::uint8_t> tag, std::span<std::uint8_t> plaintext);

}  // namespace sgxmr
