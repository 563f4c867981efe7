// Copyright 2026 The Auditem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "auditem/digest.hpp"

namespace auditem {

/// Symmetric key material for one verification record. Each (key, nonce)
/// pair encrypts exactly one plaintext.
struct KeyMaterial {
  static constexpr std::size_t kKeySize = 32;
  static constexpr std::size_t kNonceSize = 12;

  std::array<std::uint8_t, kKeySize> secret_key{};
  std::array<std::uint8_t, kNonceSize> nonce{};

  std::string secret_key_hex() const { return to_hex(secret_key); }
  std::string nonce_hex() const { return to_hex(nonce); }
  /// Throws Errc::validation on wrong lengths or bad hex.
  static KeyMaterial from_hex(std::string_view secret_key_hex, std::string_view nonce_hex);

  friend bool operator==(const KeyMaterial&, const KeyMaterial&) = default;
};

/// AES-256-GCM output: ciphertext followed by the 16-byte tag.
struct CipherEnvelope {
  static constexpr std::size_t kTagSize = 16;

  Bytes bytes;

  std::size_t plaintext_size() const noexcept {
    return bytes.size() >= kTagSize ? bytes.size() - kTagSize : 0;
  }
  friend bool operator==(const CipherEnvelope&, const CipherEnvelope&) = default;
};

/// Fresh material from the OpenSSL CSPRNG; Errc::environment if it fails.
KeyMaterial keygen();

CipherEnvelope encrypt(std::span<const std::uint8_t> plaintext, const KeyMaterial& key);
inline CipherEnvelope encrypt(std::string_view plaintext, const KeyMaterial& key) {
  return encrypt(as_bytes(plaintext), key);
}

/// Throws Errc::authentication for a wrong key, wrong nonce or any
/// modification of the envelope; the cause is deliberately not reported.
Bytes decrypt(const CipherEnvelope& envelope, const KeyMaterial& key);

}  // namespace auditem
