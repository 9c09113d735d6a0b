// Copyright 2026 The Social PaL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>

#include "socialpal/bytes.hpp"

namespace socialpal {

inline constexpr std::size_t kDigestBytes = crypto_hash_sha256_BYTES;
inline constexpr std::size_t kPublicKeyBytes = crypto_scalarmult_curve25519_BYTES;
inline constexpr std::size_t kSecretKeyBytes = crypto_scalarmult_curve25519_SCALARBYTES;
inline constexpr std::size_t kSessionKeyBytes = crypto_aead_chacha20poly1305_ietf_KEYBYTES;
inline constexpr std::size_t kAeadNonceBytes = crypto_aead_chacha20poly1305_ietf_NPUBBYTES;
inline constexpr std::size_t kAeadTagBytes = crypto_aead_chacha20poly1305_ietf_ABYTES;
inline constexpr std::size_t kDefaultCapabilityBits = 256;

using Digest = std::array<std::uint8_t, kDigestBytes>;
using PublicKey = std::array<std::uint8_t, kPublicKeyBytes>;
using SessionKey = std::array<std::uint8_t, kSessionKeyBytes>;

class CryptoError : public Error {
 public:
  using Error::Error;
};

/// One-byte context labels prepended to every hash input.
enum class HashLabel : std::uint8_t {
  kChain = 0x01,
  kBloom = 0x02,
  kKdf = 0x03,
  kChallenge = 0x04,
};

namespace detail {
inline void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw CryptoError("libsodium initialisation failed");
}
}  // namespace detail

/// SHA-256 over label || parts[0] || parts[1] || ...
inline Digest labeled_hash(HashLabel label, std::initializer_list<ByteView> parts) {
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  const auto tag = static_cast<std::uint8_t>(label);
  crypto_hash_sha256_update(&st, &tag, 1);
  for (auto p : parts) crypto_hash_sha256_update(&st, p.data(), p.size());
  Digest out;
  crypto_hash_sha256_final(&st, out.data());
  return out;
}

/// h^i(x): i-fold application of the chain hash; returns x unchanged for i == 0.
inline Bytes hash_chain(ByteView x, std::size_t i) {
  Bytes cur(x.begin(), x.end());
  for (std::size_t n = 0; n < i; ++n) {
    auto d = labeled_hash(HashLabel::kChain, {cur});
    cur.assign(d.begin(), d.end());
  }
  return cur;
}

inline Bytes random_bytes(std::size_t n) {
  detail::ensure_sodium();
  Bytes out(n);
  randombytes_buf(out.data(), out.size());
  return out;
}

/// A bearer capability: l uniformly random bits.
class Capability {
 public:
  Capability() = default;
  explicit Capability(Bytes value) : value_(std::move(value)) {}

  static Capability random(std::size_t bits = kDefaultCapabilityBits) {
    if (bits == 0 || bits % 8 != 0) throw CryptoError("capability length must be a positive multiple of 8 bits");
    return Capability(random_bytes(bits / 8));
  }

  const Bytes& value() const { return value_; }
  std::size_t bits() const { return value_.size() * 8; }
  std::string hex() const { return to_hex(value_); }

  friend bool operator==(const Capability&, const Capability&) = default;

 private:
  Bytes value_;
};

/// c^k = h^k(c).
struct DegreedCapability {
  unsigned degree = 0;
  Bytes value;

  static DegreedCapability of(const Capability& base, unsigned k) { return {k, hash_chain(base.value(), k)}; }

  /// Advances this value by `steps` further hash applications.
  DegreedCapability derive(unsigned steps) const { return {degree + steps, hash_chain(value, steps)}; }

  friend bool operator==(const DegreedCapability&, const DegreedCapability&) = default;
};

/// X25519 key-agreement pair.
struct KeyPair {
  std::array<std::uint8_t, kSecretKeyBytes> secret{};
  PublicKey public_key{};

  static KeyPair generate() {
    detail::ensure_sodium();
    KeyPair kp;
    randombytes_buf(kp.secret.data(), kp.secret.size());
    crypto_scalarmult_curve25519_base(kp.public_key.data(), kp.secret.data());
    return kp;
  }

  static KeyPair from_secret(ByteView secret) {
    detail::ensure_sodium();
    if (secret.size() != kSecretKeyBytes) throw CryptoError("bad secret key length");
    KeyPair kp;
    std::copy(secret.begin(), secret.end(), kp.secret.begin());
    crypto_scalarmult_curve25519_base(kp.public_key.data(), kp.secret.data());
    return kp;
  }
};

struct SessionKeys {
  KeyPair own;
  PublicKey peer_public{};
  SessionKey shared{};
  bool own_is_initiator = true;

  const PublicKey& initiator_public() const { return own_is_initiator ? own.public_key : peer_public; }
  const PublicKey& responder_public() const { return own_is_initiator ? peer_public : own.public_key; }
};

/// Derives the shared key as H(dh || PK_initiator || PK_responder).
/// Throws CryptoError for a degenerate peer key (all-zero agreement output).
inline SessionKeys establish_session(const KeyPair& own, const PublicKey& peer_public, bool own_is_initiator) {
  detail::ensure_sodium();
  std::array<std::uint8_t, crypto_scalarmult_curve25519_BYTES> dh{};
  if (crypto_scalarmult_curve25519(dh.data(), own.secret.data(), peer_public.data()) != 0)
    throw CryptoError("degenerate peer public key");
  SessionKeys keys{own, peer_public, {}, own_is_initiator};
  auto d = labeled_hash(HashLabel::kKdf, {dh, keys.initiator_public(), keys.responder_public()});
  sodium_memzero(dh.data(), dh.size());
  std::copy(d.begin(), d.end(), keys.shared.begin());
  return keys;
}

using AeadNonce = std::array<std::uint8_t, kAeadNonceBytes>;

inline Bytes aead_seal(const SessionKey& key, const AeadNonce& nonce, ByteView aad, ByteView plaintext) {
  Bytes out(plaintext.size() + kAeadTagBytes);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(), plaintext.size(), aad.data(),
                                            aad.size(), nullptr, nonce.data(), key.data());
  out.resize(out_len);
  return out;
}

inline std::optional<Bytes> aead_open(const SessionKey& key, const AeadNonce& nonce, ByteView aad,
                                      ByteView ciphertext) {
  if (ciphertext.size() < kAeadTagBytes) return std::nullopt;
  Bytes out(ciphertext.size() - kAeadTagBytes);
  unsigned long long out_len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr, ciphertext.data(), ciphertext.size(),
                                                aad.data(), aad.size(), nonce.data(), key.data()) != 0)
    return std::nullopt;
  out.resize(out_len);
  return out;
}

}  // namespace socialpal
