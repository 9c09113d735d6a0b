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

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "socialpal/bloom_filter.hpp"
#include "socialpal/bytes.hpp"
#include "socialpal/crypto.hpp"

namespace socialpal::psi {

// Wire envelope:
//   version (1) | type (1) | session id (16) | payload length (4, BE) | payload
// HELLO payloads are plaintext; every later payload is AEAD ciphertext keyed by
// the session key, with nonce = sender role || 0,0,0 || counter (8, BE) and
// associated data = version | type | session id.

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kSessionIdBytes = 16;
inline constexpr std::size_t kEnvelopeHeaderBytes = 2 + kSessionIdBytes + 4;
inline constexpr std::size_t kTagBytes = kDigestBytes;
inline constexpr std::size_t kDefaultBetaCap = std::size_t{1} << 24;

using SessionId = std::array<std::uint8_t, kSessionIdBytes>;

enum class Role : std::uint8_t { kInitiator = 1, kResponder = 2 };

enum class MessageType : std::uint8_t {
  kHello = 1,
  kBloom = 2,
  kChallenge = 3,
  kResponse = 4,
  kReject = 5,
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

struct Frame {
  std::uint8_t version = kProtocolVersion;
  MessageType type = MessageType::kHello;
  SessionId session_id{};
  Bytes payload;

  Bytes header_prefix() const {
    Bytes out(2 + kSessionIdBytes);
    out[0] = version;
    out[1] = static_cast<std::uint8_t>(type);
    std::copy(session_id.begin(), session_id.end(), out.begin() + 2);
    return out;
  }

  Bytes encode() const {
    Bytes out = header_prefix();
    append_u32be(out, static_cast<std::uint32_t>(payload.size()));
    append(out, payload);
    return out;
  }

  static Frame decode(ByteView data) {
    ByteReader in(data);
    Frame f;
    f.version = in.u8();
    const auto type = in.u8();
    if (type < 1 || type > 5) throw ProtocolError("unknown message type");
    f.type = static_cast<MessageType>(type);
    auto sid = in.take(kSessionIdBytes);
    std::copy(sid.begin(), sid.end(), f.session_id.begin());
    const auto len = in.u32be();
    if (len != in.remaining()) throw ProtocolError("payload length mismatch");
    auto body = in.take(len);
    f.payload.assign(body.begin(), body.end());
    return f;
  }
};

/// HELLO payload: role (1) | public key (32) | id length (2, BE) | id | beta (4, BE) | gamma (1)
struct Hello {
  Role role = Role::kInitiator;
  PublicKey public_key{};
  std::string osn_id;
  std::uint32_t beta = 0;
  std::uint8_t gamma = 1;

  Bytes encode() const {
    if (osn_id.size() > 0xffff) throw ProtocolError("OSN id too long");
    Bytes out{static_cast<std::uint8_t>(role)};
    append(out, public_key);
    out.push_back(static_cast<std::uint8_t>(osn_id.size() >> 8));
    out.push_back(static_cast<std::uint8_t>(osn_id.size()));
    append(out, as_bytes(osn_id));
    append_u32be(out, beta);
    out.push_back(gamma);
    return out;
  }

  static Hello decode(ByteView data) {
    ByteReader in(data);
    Hello h;
    const auto role = in.u8();
    if (role != 1 && role != 2) throw ProtocolError("bad role in HELLO");
    h.role = static_cast<Role>(role);
    auto pk = in.take(kPublicKeyBytes);
    std::copy(pk.begin(), pk.end(), h.public_key.begin());
    const std::size_t id_len = (std::size_t{in.u8()} << 8) | in.u8();
    auto id = in.take(id_len);
    h.osn_id.assign(id.begin(), id.end());
    h.beta = in.u32be();
    h.gamma = in.u8();
    if (!in.done()) throw ProtocolError("trailing bytes in HELLO");
    return h;
  }
};

/// Challenge/response tag t_k(y) = H(label || "chal<k>" || y).
inline Digest challenge_tag(int round, ByteView payload) {
  const char* label = round == 0 ? "chal0" : "chal1";
  return labeled_hash(HashLabel::kChallenge, {as_bytes(label), payload});
}

/// payload = value || PK_initiator || PK_responder
inline Bytes bind_item(ByteView value, const PublicKey& initiator_pk, const PublicKey& responder_pk) {
  Bytes out(value.begin(), value.end());
  append(out, initiator_pk);
  append(out, responder_pk);
  return out;
}

inline Bytes encode_tags(const std::vector<Digest>& tags) {
  Bytes out;
  out.reserve(4 + tags.size() * kTagBytes);
  append_u32be(out, static_cast<std::uint32_t>(tags.size()));
  for (const auto& t : tags) append(out, t);
  return out;
}

inline std::vector<Digest> decode_tags(ByteView data) {
  ByteReader in(data);
  const std::size_t count = in.u32be();
  if (in.remaining() != count * kTagBytes) throw ProtocolError("tag list length mismatch");
  std::vector<Digest> tags(count);
  for (auto& t : tags) {
    auto raw = in.take(kTagBytes);
    std::copy(raw.begin(), raw.end(), t.begin());
  }
  return tags;
}

struct PsiConfig {
  double fp_target = 0.001;
  std::size_t beta_cap = kDefaultBetaCap;
  /// Test hooks: force filter parameters regardless of the input size.
  std::optional<std::size_t> beta_override;
  std::optional<unsigned> gamma_override;
};

enum class Phase {
  kHello,
  kBloomSent,      // initiator: filter sent, awaiting challenge
  kBloomAwaited,   // responder: hello exchanged, awaiting filter
  kChallenged,     // responder: challenge sent, awaiting response
  kDone,
  kFailed,
  kRejected,
};

struct StepResult {
  std::optional<Bytes> outbound;
  bool done = false;
};

/// Observer of every outbound payload before encryption (type, plaintext).
using TranscriptObserver = std::function<void(MessageType, ByteView)>;

/// One side of a Bloom-filter PSI run. Driven single-threaded by feeding
/// inbound frames to step(); movable between threads.
class PsiSession {
 public:
  /// Creates a session over `values` (duplicates collapse). The initiator's
  /// HELLO is returned by start(); a responder answers the initiator's HELLO.
  PsiSession(Role role, std::vector<Bytes> values, KeyPair keys, std::string osn_id, PsiConfig config = {})
      : role_(role), own_keys_(std::move(keys)), osn_id_(std::move(osn_id)), config_(config) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    values_ = std::move(values);
  }

  /// Returns the first outbound frame: the HELLO for an initiator, nothing for a responder.
  std::optional<Bytes> start() {
    if (role_ != Role::kInitiator) return std::nullopt;
    auto sid = random_bytes(kSessionIdBytes);
    std::copy(sid.begin(), sid.end(), session_id_.begin());
    return make_hello().encode();
  }

  StepResult step(ByteView inbound) {
    if (finished()) return {std::nullopt, true};
    try {
      return dispatch(Frame::decode(inbound));
    } catch (const std::exception& e) {
      return fail(e.what());
    }
  }

  /// Builds a REJECT frame and moves this session to the rejected state.
  Bytes reject(const std::string& reason = "rejected") {
    phase_ = Phase::kRejected;
    diagnostic_ = reason;
    Frame f;
    f.type = MessageType::kReject;
    f.session_id = session_id_;
    if (keys_) f.payload = seal(f, as_bytes(reason));
    return f.encode();
  }

  Role role() const { return role_; }
  Phase phase() const { return phase_; }
  bool finished() const { return phase_ == Phase::kDone || phase_ == Phase::kFailed || phase_ == Phase::kRejected; }
  bool succeeded() const { return phase_ == Phase::kDone; }
  const std::string& diagnostic() const { return diagnostic_; }
  const SessionId& session_id() const { return session_id_; }
  const std::optional<SessionKeys>& keys() const { return keys_; }
  const std::string& peer_osn_id() const { return peer_osn_id_; }
  const std::vector<Bytes>& input_values() const { return values_; }
  std::size_t declared_beta() const { return own_beta(); }

  /// Raw values (without key binding) in the final intersection, sorted.
  const std::vector<Bytes>& intersection() const { return intersection_; }
  /// Bound payloads of the candidate set X' (responder only).
  const std::vector<Bytes>& candidates() const { return candidates_; }

  void set_transcript_observer(TranscriptObserver obs) { observer_ = std::move(obs); }

 private:
  std::size_t own_beta() const {
    return config_.beta_override.value_or(bf_optimal_size(values_.size(), config_.fp_target));
  }
  unsigned own_gamma() const { return config_.gamma_override.value_or(bf_hash_count(config_.fp_target)); }

  Frame make_hello() const {
    Hello h{role_, own_keys_.public_key, osn_id_, static_cast<std::uint32_t>(own_beta()),
            static_cast<std::uint8_t>(own_gamma())};
    Frame f;
    f.type = MessageType::kHello;
    f.session_id = session_id_;
    f.payload = h.encode();
    if (observer_) observer_(f.type, f.payload);
    return f;
  }

  AeadNonce nonce(Role sender, std::uint64_t counter) const {
    AeadNonce n{};
    n[0] = static_cast<std::uint8_t>(sender);
    for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
    return n;
  }

  Bytes seal(const Frame& f, ByteView plaintext) {
    if (observer_) observer_(f.type, plaintext);
    return aead_seal(keys_->shared, nonce(role_, send_counter_++), f.header_prefix(), plaintext);
  }

  Bytes open(const Frame& f) {
    const Role sender = role_ == Role::kInitiator ? Role::kResponder : Role::kInitiator;
    auto pt = aead_open(keys_->shared, nonce(sender, recv_counter_), f.header_prefix(), f.payload);
    if (!pt) throw ProtocolError("decryption failed");
    ++recv_counter_;
    return std::move(*pt);
  }

  Bytes encrypted_frame(MessageType type, ByteView plaintext) {
    Frame f;
    f.type = type;
    f.session_id = session_id_;
    f.payload = seal(f, plaintext);
    return f.encode();
  }

  StepResult fail(std::string why) {
    phase_ = Phase::kFailed;
    diagnostic_ = std::move(why);
    return {std::nullopt, true};
  }

  StepResult dispatch(const Frame& f) {
    if (f.version != kProtocolVersion) return fail("unsupported protocol version");
    if (f.type == MessageType::kReject) {
      phase_ = Phase::kRejected;
      diagnostic_ = "peer rejected session";
      return {std::nullopt, true};
    }
    if (f.type == MessageType::kHello) return on_hello(f);
    if (!keys_) return fail("encrypted message before key exchange");
    if (f.session_id != session_id_) return fail("session id mismatch");
    switch (f.type) {
      case MessageType::kBloom:
        if (role_ != Role::kResponder || phase_ != Phase::kBloomAwaited) return fail("unexpected BF message");
        return on_bloom(open(f));
      case MessageType::kChallenge:
        if (role_ != Role::kInitiator || phase_ != Phase::kBloomSent) return fail("unexpected CHAL message");
        return on_challenge(open(f));
      case MessageType::kResponse:
        if (role_ != Role::kResponder || phase_ != Phase::kChallenged) return fail("unexpected RESP message");
        return on_response(open(f));
      default:
        return fail("unexpected message type");
    }
  }

  StepResult on_hello(const Frame& f) {
    if (phase_ != Phase::kHello) return fail("unexpected HELLO");
    const Hello peer = Hello::decode(f.payload);
    if (peer.role == role_) return fail("peer claims the same role");
    if (role_ == Role::kInitiator && f.session_id != session_id_) return fail("session id mismatch");
    if (peer.beta > config_.beta_cap) return fail("declared bloom filter size exceeds cap");
    if (peer.gamma == 0) return fail("declared hash count is zero");
    keys_ = establish_session(own_keys_, peer.public_key, role_ == Role::kInitiator);
    peer_osn_id_ = peer.osn_id;
    peer_beta_ = peer.beta;
    peer_gamma_ = peer.gamma;
    payloads_.reserve(values_.size());
    for (const auto& v : values_)
      payloads_.push_back(bind_item(v, keys_->initiator_public(), keys_->responder_public()));

    if (role_ == Role::kResponder) {
      session_id_ = f.session_id;
      phase_ = Phase::kBloomAwaited;
      return {make_hello().encode(), false};
    }
    auto bf = BloomFilter::with_fresh_salts(own_beta(), own_gamma());
    for (const auto& p : payloads_) bf.insert(p);
    phase_ = Phase::kBloomSent;
    return {encrypted_frame(MessageType::kBloom, bf.serialize()), false};
  }

  StepResult on_bloom(const Bytes& plaintext) {
    const auto bf = BloomFilter::deserialize(plaintext, config_.beta_cap);
    if (bf.beta() != peer_beta_ || bf.gamma() != peer_gamma_) return fail("filter disagrees with HELLO parameters");
    std::vector<Digest> tags;
    for (std::size_t i = 0; i < payloads_.size(); ++i) {
      if (!bf.contains(payloads_[i])) continue;
      candidates_.push_back(payloads_[i]);
      candidate_index_.push_back(i);
      tags.push_back(challenge_tag(0, payloads_[i]));
    }
    shuffle(tags);
    phase_ = Phase::kChallenged;
    return {encrypted_frame(MessageType::kChallenge, encode_tags(tags)), false};
  }

  StepResult on_challenge(const Bytes& plaintext) {
    std::map<Digest, std::size_t> own;
    for (std::size_t i = 0; i < payloads_.size(); ++i) own.emplace(challenge_tag(0, payloads_[i]), i);
    std::set<std::size_t> matched;
    for (const auto& t : decode_tags(plaintext))
      if (auto it = own.find(t); it != own.end()) matched.insert(it->second);
    std::vector<Digest> answers;
    for (auto i : matched) {
      answers.push_back(challenge_tag(1, payloads_[i]));
      intersection_.push_back(values_[i]);
    }
    shuffle(answers);
    phase_ = Phase::kDone;
    return {encrypted_frame(MessageType::kResponse, encode_tags(answers)), true};
  }

  StepResult on_response(const Bytes& plaintext) {
    const auto answers = decode_tags(plaintext);
    std::set<Digest> proven(answers.begin(), answers.end());
    for (std::size_t k = 0; k < candidates_.size(); ++k)
      if (proven.count(challenge_tag(1, candidates_[k]))) intersection_.push_back(values_[candidate_index_[k]]);
    phase_ = Phase::kDone;
    return {std::nullopt, true};
  }

  static void shuffle(std::vector<Digest>& v) {
    detail::ensure_sodium();
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = randombytes_uniform(static_cast<std::uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  Role role_;
  KeyPair own_keys_;
  std::string osn_id_;
  PsiConfig config_;
  std::vector<Bytes> values_;
  std::vector<Bytes> payloads_;

  Phase phase_ = Phase::kHello;
  std::string diagnostic_;
  SessionId session_id_{};
  std::optional<SessionKeys> keys_;
  std::string peer_osn_id_;
  std::size_t peer_beta_ = 0;
  unsigned peer_gamma_ = 0;
  std::uint64_t send_counter_ = 0;
  std::uint64_t recv_counter_ = 0;

  std::vector<Bytes> candidates_;
  std::vector<std::size_t> candidate_index_;
  std::vector<Bytes> intersection_;
  TranscriptObserver observer_;
};

/// Runs two sessions against each other in memory until both finish.
/// Returns every frame exchanged, in order.
inline std::vector<Bytes> run_local(PsiSession& initiator, PsiSession& responder) {
  std::vector<Bytes> transcript;
  auto msg = initiator.start();
  PsiSession* receiver = &responder;
  PsiSession* sender = &initiator;
  while (msg) {
    transcript.push_back(*msg);
    auto r = receiver->step(*msg);
    msg = std::move(r.outbound);
    std::swap(receiver, sender);
  }
  return transcript;
}

}  // namespace socialpal::psi
