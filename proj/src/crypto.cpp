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

#include "auditem/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <memory>

#include "auditem/error.hpp"

namespace auditem {

namespace {

struct CtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const noexcept { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;

CipherCtx new_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw Error(Errc::environment, "EVP_CIPHER_CTX_new failed");
  return ctx;
}

}  // namespace

KeyMaterial KeyMaterial::from_hex(std::string_view secret_key_hex, std::string_view nonce_hex) {
  Bytes key = auditem::from_hex(secret_key_hex);
  Bytes nonce = auditem::from_hex(nonce_hex);
  if (key.size() != kKeySize || nonce.size() != kNonceSize) {
    throw Error(Errc::validation, "key material must be 32 key bytes and 12 nonce bytes");
  }
  KeyMaterial k;
  std::copy(key.begin(), key.end(), k.secret_key.begin());
  std::copy(nonce.begin(), nonce.end(), k.nonce.begin());
  return k;
}

KeyMaterial keygen() {
  KeyMaterial k;
  if (RAND_bytes(k.secret_key.data(), static_cast<int>(k.secret_key.size())) != 1 ||
      RAND_bytes(k.nonce.data(), static_cast<int>(k.nonce.size())) != 1) {
    throw Error(Errc::environment, "secure randomness source unavailable");
  }
  return k;
}

CipherEnvelope encrypt(std::span<const std::uint8_t> plaintext, const KeyMaterial& key) {
  CipherCtx ctx = new_ctx();
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, KeyMaterial::kNonceSize, nullptr) != 1 ||
      EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.secret_key.data(), key.nonce.data()) != 1) {
    throw Error(Errc::environment, "AES-256-GCM encrypt init failed");
  }
  CipherEnvelope env;
  env.bytes.resize(plaintext.size() + CipherEnvelope::kTagSize);
  int len = 0;
  std::size_t written = 0;
  if (!plaintext.empty()) {
    if (EVP_EncryptUpdate(ctx.get(), env.bytes.data(), &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1) {
      throw Error(Errc::environment, "AES-256-GCM encrypt failed");
    }
    written = static_cast<std::size_t>(len);
  }
  if (EVP_EncryptFinal_ex(ctx.get(), env.bytes.data() + written, &len) != 1) {
    throw Error(Errc::environment, "AES-256-GCM finalization failed");
  }
  written += static_cast<std::size_t>(len);
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, CipherEnvelope::kTagSize,
                          env.bytes.data() + written) != 1) {
    throw Error(Errc::environment, "AES-256-GCM tag extraction failed");
  }
  env.bytes.resize(written + CipherEnvelope::kTagSize);
  return env;
}

Bytes decrypt(const CipherEnvelope& envelope, const KeyMaterial& key) {
  if (envelope.bytes.size() < CipherEnvelope::kTagSize) {
    throw Error(Errc::authentication, "envelope authentication failed");
  }
  const std::size_t body = envelope.bytes.size() - CipherEnvelope::kTagSize;
  CipherCtx ctx = new_ctx();
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, KeyMaterial::kNonceSize, nullptr) != 1 ||
      EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.secret_key.data(), key.nonce.data()) != 1) {
    throw Error(Errc::environment, "AES-256-GCM decrypt init failed");
  }
  Bytes plain(body);
  int len = 0;
  std::size_t written = 0;
  if (body > 0) {
    if (EVP_DecryptUpdate(ctx.get(), plain.data(), &len, envelope.bytes.data(),
                          static_cast<int>(body)) != 1) {
      throw Error(Errc::authentication, "envelope authentication failed");
    }
    written = static_cast<std::size_t>(len);
  }
  // OpenSSL takes a non-const tag pointer but does not write through it.
  auto* tag = const_cast<std::uint8_t*>(envelope.bytes.data() + body);
  std::uint8_t tail[16];
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, CipherEnvelope::kTagSize, tag) != 1 ||
      EVP_DecryptFinal_ex(ctx.get(), tail, &len) != 1) {
    throw Error(Errc::authentication, "envelope authentication failed");
  }
  // GCM is a stream mode: finalization never emits bytes.
  plain.resize(written);
  return plain;
}

}  // namespace auditem
