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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "socialpal/psi_session.hpp"

namespace socialpal::psi {
namespace {

std::vector<Bytes> random_values(std::size_t n) {
  std::vector<Bytes> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(random_bytes(32));
  return v;
}

std::vector<Bytes> brute_force_intersection(std::vector<Bytes> a, const std::vector<Bytes>& b) {
  std::set<Bytes> bs(b.begin(), b.end());
  std::set<Bytes> out;
  for (auto& x : a)
    if (bs.count(x)) out.insert(x);
  return {out.begin(), out.end()};
}

struct Pair {
  PsiSession init;
  PsiSession resp;
  std::vector<Bytes> transcript;
};

Pair run(std::vector<Bytes> a, std::vector<Bytes> b, PsiConfig cfg_a = {}, PsiConfig cfg_b = {}) {
  Pair p{PsiSession(Role::kInitiator, std::move(a), KeyPair::generate(), "alice", cfg_a),
         PsiSession(Role::kResponder, std::move(b), KeyPair::generate(), "bob", cfg_b),
         {}};
  p.transcript = run_local(p.init, p.resp);
  return p;
}

TEST(PsiSession, EmptyInputsGiveEmptyIntersection) {
  auto p = run({}, {});
  ASSERT_TRUE(p.init.succeeded()) << p.init.diagnostic();
  ASSERT_TRUE(p.resp.succeeded()) << p.resp.diagnostic();
  EXPECT_TRUE(p.init.intersection().empty());
  EXPECT_TRUE(p.resp.intersection().empty());
  auto q = run({}, random_values(5));
  EXPECT_TRUE(q.resp.succeeded());
  EXPECT_TRUE(q.resp.intersection().empty());
}

TEST(PsiSession, HelloDeclaresOptimalBeta) {
  PsiConfig cfg;
  cfg.fp_target = 0.01;
  PsiSession s(Role::kInitiator, random_values(3), KeyPair::generate(), "alice", cfg);
  auto frame = Frame::decode(*s.start());
  ASSERT_EQ(frame.type, MessageType::kHello);
  auto hello = Hello::decode(frame.payload);
  EXPECT_EQ(hello.beta, bf_optimal_size(3, 0.01));
  EXPECT_EQ(hello.beta, 30u);
  EXPECT_EQ(hello.gamma, bf_hash_count(0.01));
  EXPECT_EQ(hello.osn_id, "alice");
  EXPECT_EQ(hello.role, Role::kInitiator);
}

TEST(PsiSession, ResponderWaitsForInitiatorHello) {
  PsiSession r(Role::kResponder, random_values(2), KeyPair::generate(), "bob");
  EXPECT_FALSE(r.start().has_value());
  EXPECT_EQ(r.phase(), Phase::kHello);
}

TEST(PsiSession, FreshKeysBindPayloadsDifferently) {
  auto values = random_values(4);
  auto p1 = run(values, values);
  auto p2 = run(values, values);
  const auto& k1 = *p1.init.keys();
  const auto& k2 = *p2.init.keys();
  auto b1 = bind_item(values[0], k1.initiator_public(), k1.responder_public());
  auto b2 = bind_item(values[0], k2.initiator_public(), k2.responder_public());
  EXPECT_NE(b1, b2);
  EXPECT_EQ(b1.size(), 32u + 2 * kPublicKeyBytes);
}

TEST(PsiSession, DisjointSets) {
  auto p = run(random_values(20), random_values(30));
  ASSERT_TRUE(p.init.succeeded());
  ASSERT_TRUE(p.resp.succeeded());
  EXPECT_TRUE(p.init.intersection().empty());
  EXPECT_TRUE(p.resp.intersection().empty());
}

TEST(PsiSession, IdenticalSets) {
  auto v = random_values(5);
  auto p = run(v, v);
  EXPECT_EQ(p.init.intersection().size(), 5u);
  EXPECT_EQ(p.resp.intersection().size(), 5u);
  EXPECT_EQ(p.init.intersection(), p.resp.intersection());
}

TEST(PsiSession, ChallengeResponseRemovesForcedFalsePositives) {
  auto common = random_values(2);
  auto a = random_values(6);
  auto b = random_values(7);
  a.insert(a.end(), common.begin(), common.end());
  b.insert(b.end(), common.begin(), common.end());
  PsiConfig tiny;
  tiny.beta_override = 1;  // every probe hits
  auto p = run(a, b, tiny);
  ASSERT_TRUE(p.resp.succeeded()) << p.resp.diagnostic();
  EXPECT_EQ(p.resp.candidates().size(), b.size());  // all of B looked like members
  auto expect = brute_force_intersection(a, b);
  EXPECT_EQ(expect.size(), 2u);
  EXPECT_EQ(p.init.intersection(), expect);
  EXPECT_EQ(p.resp.intersection(), expect);
}

TEST(PsiSession, RandomSetsMatchBruteForce) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto pool = random_values(60);
    std::vector<Bytes> a, b;
    for (auto& x : pool) {
      if (rng() % 2) a.push_back(x);
      if (rng() % 2) b.push_back(x);
    }
    PsiConfig cfg;
    if (trial % 3 == 0) cfg.beta_override = 1 + rng() % 16;
    if (trial % 5 == 0) cfg.gamma_override = 1;
    auto p = run(a, b, cfg);
    ASSERT_TRUE(p.init.succeeded()) << p.init.diagnostic();
    ASSERT_TRUE(p.resp.succeeded()) << p.resp.diagnostic();
    auto expect = brute_force_intersection(a, b);
    ASSERT_EQ(p.init.intersection(), expect);
    ASSERT_EQ(p.resp.intersection(), expect);
  }
}

TEST(PsiSession, EnvelopeLayout) {
  PsiSession s(Role::kInitiator, {}, KeyPair::generate(), "al");
  auto wire = *s.start();
  ASSERT_GE(wire.size(), kEnvelopeHeaderBytes);
  EXPECT_EQ(wire[0], kProtocolVersion);
  EXPECT_EQ(wire[1], static_cast<std::uint8_t>(MessageType::kHello));
  EXPECT_TRUE(std::equal(s.session_id().begin(), s.session_id().end(), wire.begin() + 2));
  const auto len = read_u32be(ByteView(wire).subspan(18, 4));
  EXPECT_EQ(len, wire.size() - kEnvelopeHeaderBytes);
  // role | pk(32) | id len (2) | "al" | beta (4) | gamma
  EXPECT_EQ(len, 1u + 32 + 2 + 2 + 4 + 1);
  EXPECT_EQ(wire[22], static_cast<std::uint8_t>(Role::kInitiator));
  EXPECT_EQ(wire[22 + 33], 0);
  EXPECT_EQ(wire[22 + 34], 2);
}

TEST(PsiSession, PayloadsAfterHelloAreCiphertext) {
  auto v = random_values(10);
  std::vector<std::pair<MessageType, Bytes>> plaintexts;
  PsiSession a(Role::kInitiator, v, KeyPair::generate(), "alice");
  PsiSession b(Role::kResponder, v, KeyPair::generate(), "bob");
  a.set_transcript_observer([&](MessageType t, ByteView p) { plaintexts.emplace_back(t, Bytes(p.begin(), p.end())); });
  b.set_transcript_observer([&](MessageType t, ByteView p) { plaintexts.emplace_back(t, Bytes(p.begin(), p.end())); });
  auto frames = run_local(a, b);
  ASSERT_EQ(frames.size(), 5u);  // HELLO, HELLO, BF, CHAL, RESP
  for (const auto& plain : plaintexts) {
    if (plain.first == MessageType::kHello) continue;
    for (const auto& raw : frames) {
      auto f = Frame::decode(raw);
      if (f.type != plain.first) continue;
      EXPECT_NE(f.payload, plain.second);
      EXPECT_EQ(f.payload.size(), plain.second.size() + kAeadTagBytes);
    }
  }
}

TEST(PsiSession, OutOfOrderMessageFails) {
  auto v = random_values(3);
  PsiSession a(Role::kInitiator, v, KeyPair::generate(), "alice");
  PsiSession b(Role::kResponder, v, KeyPair::generate(), "bob");
  auto hello_a = *a.start();
  auto hello_b = *b.step(hello_a).outbound;
  auto bf = *a.step(hello_b).outbound;
  // Second HELLO to the responder is a phase violation.
  auto r = b.step(hello_a);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(b.phase(), Phase::kFailed);
  EXPECT_FALSE(b.diagnostic().empty());
  // A finished session ignores further input.
  EXPECT_FALSE(b.step(bf).outbound.has_value());
  EXPECT_EQ(b.phase(), Phase::kFailed);
}

TEST(PsiSession, InitiatorRejectsBloomMessage) {
  auto v = random_values(3);
  PsiSession a(Role::kInitiator, v, KeyPair::generate(), "alice");
  PsiSession b(Role::kResponder, v, KeyPair::generate(), "bob");
  auto hello_b = *b.step(*a.start()).outbound;
  auto bf = *a.step(hello_b).outbound;
  a.step(bf);
  EXPECT_EQ(a.phase(), Phase::kFailed);
}

TEST(PsiSession, TamperedCiphertextFails) {
  auto v = random_values(3);
  PsiSession a(Role::kInitiator, v, KeyPair::generate(), "alice");
  PsiSession b(Role::kResponder, v, KeyPair::generate(), "bob");
  auto hello_b = *b.step(*a.start()).outbound;
  auto bf = *a.step(hello_b).outbound;
  bf.back() ^= 0x40;
  b.step(bf);
  EXPECT_EQ(b.phase(), Phase::kFailed);
  EXPECT_EQ(b.diagnostic(), "decryption failed");
}

TEST(PsiSession, MalformedFrameFails) {
  PsiSession b(Role::kResponder, {}, KeyPair::generate(), "bob");
  Bytes junk{1, 2, 3};
  b.step(junk);
  EXPECT_EQ(b.phase(), Phase::kFailed);
}

TEST(PsiSession, OversizedDeclaredBetaFails) {
  PsiConfig big;
  big.beta_override = kDefaultBetaCap + 1;
  PsiSession a(Role::kInitiator, random_values(2), KeyPair::generate(), "alice", big);
  PsiSession b(Role::kResponder, random_values(2), KeyPair::generate(), "bob");
  auto r = b.step(*a.start());
  EXPECT_TRUE(r.done);
  EXPECT_EQ(b.phase(), Phase::kFailed);
  EXPECT_NE(b.diagnostic().find("exceeds cap"), std::string::npos);
}

TEST(PsiSession, RejectTerminatesCleanly) {
  PsiSession a(Role::kInitiator, random_values(2), KeyPair::generate(), "alice");
  PsiSession b(Role::kResponder, random_values(2), KeyPair::generate(), "bob");
  auto hello = *a.start();
  b.step(hello);
  auto reject = b.reject("busy");
  EXPECT_EQ(b.phase(), Phase::kRejected);
  auto r = a.step(reject);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.outbound.has_value());
  EXPECT_EQ(a.phase(), Phase::kRejected);
}

TEST(PsiSession, ReplayedFilterFromAnotherSessionIsUseless) {
  auto v = random_values(8);
  // Session 1 runs to completion; capture its BF frame.
  auto p1 = run(v, v);
  const auto bf_frame_1 = p1.transcript.at(2);

  // Injecting it into session 2 fails authentication.
  PsiSession a(Role::kInitiator, v, KeyPair::generate(), "alice");
  PsiSession b(Role::kResponder, v, KeyPair::generate(), "bob");
  b.step(*a.start());
  b.step(bf_frame_1);
  EXPECT_EQ(b.phase(), Phase::kFailed);

  // Even in plaintext, a filter over session-1 payloads matches none of the
  // session-2 payloads, because each payload embeds the session public keys.
  const auto& k1 = *p1.init.keys();
  auto bf = BloomFilter::with_fresh_salts(bf_optimal_size(v.size(), 1e-6), bf_hash_count(1e-6));
  for (const auto& x : v) bf.insert(bind_item(x, k1.initiator_public(), k1.responder_public()));
  auto k2a = KeyPair::generate(), k2b = KeyPair::generate();
  std::size_t hits = 0;
  for (const auto& x : v) hits += bf.contains(bind_item(x, k2a.public_key, k2b.public_key));
  EXPECT_EQ(hits, 0u);
}

TEST(PsiSession, SessionIdMismatchFails) {
  auto v = random_values(3);
  PsiSession a(Role::kInitiator, v, KeyPair::generate(), "alice");
  PsiSession b(Role::kResponder, v, KeyPair::generate(), "bob");
  auto hello_b = *b.step(*a.start()).outbound;
  auto bf = *a.step(hello_b).outbound;
  bf[5] ^= 1;  // inside the session id
  b.step(bf);
  EXPECT_EQ(b.phase(), Phase::kFailed);
}

TEST(Tags, DomainSeparated) {
  auto y = random_bytes(96);
  EXPECT_NE(challenge_tag(0, y), challenge_tag(1, y));
  auto tags = std::vector<Digest>{challenge_tag(0, y), challenge_tag(1, y)};
  EXPECT_EQ(decode_tags(encode_tags(tags)), tags);
  Bytes bad = encode_tags(tags);
  bad.pop_back();
  EXPECT_THROW(decode_tags(bad), ProtocolError);
}

}  // namespace
}  // namespace socialpal::psi
