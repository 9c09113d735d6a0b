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

#include <cmath>
#include <cstdint>
#include <vector>

#include "socialpal/bytes.hpp"
#include "socialpal/crypto.hpp"

namespace socialpal {

inline constexpr std::size_t kBloomSaltBytes = 16;
inline constexpr std::uint8_t kBloomFormatVersion = 1;

/// Filter size in bits for `alpha` items at target false-positive rate p:
/// ceil(-log2(p) / ln 2) * alpha.
inline std::size_t bf_optimal_size(std::size_t alpha, double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("false-positive target must lie in (0, 1)");
  const auto per_item = static_cast<std::size_t>(std::ceil(-std::log2(p) / std::log(2.0)));
  return per_item * alpha;
}

/// p = (1 - (1 - 1/beta)^(gamma*alpha))^gamma
inline double bf_false_positive_estimate(std::size_t alpha, std::size_t beta, std::size_t gamma) {
  if (beta == 0) throw Error("bloom filter size must be positive");
  if (gamma == 0) throw Error("bloom filter hash count must be positive");
  if (alpha == 0) return 0.0;
  const double exponent = static_cast<double>(gamma) * static_cast<double>(alpha);
  const double keep = std::exp(exponent * std::log1p(-1.0 / static_cast<double>(beta)));
  return std::pow(1.0 - keep, static_cast<double>(gamma));
}

/// Hash count used for a target rate: round(-log2 p), at least 1.
inline unsigned bf_hash_count(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("false-positive target must lie in (0, 1)");
  return static_cast<unsigned>(std::max(1L, std::lround(-std::log2(p))));
}

/// Bloom filter whose gamma index functions are SHA-256 keyed by per-filter salts.
/// Not safe for concurrent mutation.
class BloomFilter {
 public:
  using Salt = std::array<std::uint8_t, kBloomSaltBytes>;

  BloomFilter() = default;

  BloomFilter(std::size_t beta, std::vector<Salt> salts)
      : beta_(beta), salts_(std::move(salts)), bits_((beta + 7) / 8, 0) {
    if (salts_.empty() || salts_.size() > 255) throw Error("bloom filter hash count must be in [1, 255]");
    if (beta > 0xffffffffu) throw Error("bloom filter too large");
  }

  /// A filter with `gamma` fresh random salts.
  static BloomFilter with_fresh_salts(std::size_t beta, unsigned gamma) {
    std::vector<Salt> salts(gamma);
    for (auto& s : salts) {
      auto r = random_bytes(kBloomSaltBytes);
      std::copy(r.begin(), r.end(), s.begin());
    }
    return BloomFilter(beta, std::move(salts));
  }

  std::size_t beta() const { return beta_; }
  unsigned gamma() const { return static_cast<unsigned>(salts_.size()); }
  std::size_t inserted_count() const { return inserted_; }
  const std::vector<Salt>& salts() const { return salts_; }

  void insert(ByteView item) {
    if (beta_ == 0) throw Error("cannot insert into a zero-size bloom filter");
    for (const auto& salt : salts_) {
      auto j = index(salt, item);
      bits_[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    }
    ++inserted_;
  }

  bool contains(ByteView item) const {
    if (beta_ == 0) return false;
    for (const auto& salt : salts_) {
      auto j = index(salt, item);
      if ((bits_[j / 8] & (1u << (j % 8))) == 0) return false;
    }
    return true;
  }

  /// version | beta (u32 BE) | gamma (u8) | gamma x 16-byte salts | ceil(beta/8) bit bytes
  Bytes serialize() const {
    Bytes out;
    out.reserve(6 + salts_.size() * kBloomSaltBytes + bits_.size());
    out.push_back(kBloomFormatVersion);
    append_u32be(out, static_cast<std::uint32_t>(beta_));
    out.push_back(static_cast<std::uint8_t>(salts_.size()));
    for (const auto& s : salts_) append(out, s);
    append(out, bits_);
    return out;
  }

  /// Parses a serialized filter. Rejects a declared beta above `max_beta`.
  static BloomFilter deserialize(ByteView data, std::size_t max_beta) {
    ByteReader in(data);
    if (in.u8() != kBloomFormatVersion) throw Error("unsupported bloom filter version");
    const std::size_t beta = in.u32be();
    if (beta > max_beta) throw Error("declared bloom filter size exceeds cap");
    const unsigned gamma = in.u8();
    std::vector<Salt> salts(gamma);
    for (auto& s : salts) {
      auto raw = in.take(kBloomSaltBytes);
      std::copy(raw.begin(), raw.end(), s.begin());
    }
    BloomFilter bf(beta, std::move(salts));
    auto raw_bits = in.take((beta + 7) / 8);
    if (!in.done()) throw Error("trailing bytes after bloom filter");
    bf.bits_.assign(raw_bits.begin(), raw_bits.end());
    return bf;
  }

 private:
  std::size_t index(const Salt& salt, ByteView item) const {
    auto d = labeled_hash(HashLabel::kBloom, {salt, item});
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    return static_cast<std::size_t>(v % beta_);
  }

  std::size_t beta_ = 0;
  std::vector<Salt> salts_;
  std::vector<std::uint8_t> bits_;
  std::size_t inserted_ = 0;
};

}  // namespace socialpal
