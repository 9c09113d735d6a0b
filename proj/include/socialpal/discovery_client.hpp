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

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "socialpal/capability_service.hpp"
#include "socialpal/crypto.hpp"
#include "socialpal/psi_session.hpp"

namespace socialpal {

class DiscoveryError : public Error {
 public:
  using Error::Error;
};

/// One element of a client's PSI input: a capability value together with
/// where it came from and how far it has been hashed.
struct AnnotatedItem {
  enum class Origin { kFriend, kAnonymous, kSelf };

  Origin origin = Origin::kAnonymous;
  OsnId friend_id;              // set only for kFriend
  unsigned received_degree = 0; // degree as delivered by the server
  unsigned item_degree = 0;     // degree after local derivation
  Bytes value;
};

struct InputSet {
  std::vector<AnnotatedItem> items;
  std::map<Bytes, std::size_t> by_value;

  std::vector<Bytes> values() const {
    std::vector<Bytes> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.value);
    return out;
  }
};

/// Expands each received value of degree i to degrees i..d_max and adds the
/// caller's own capability once, at degree 0.
inline InputSet build_input_set(const DistributionResult& dist, const Capability& own_cap, unsigned d_max) {
  InputSet set;
  auto add = [&](AnnotatedItem item) {
    set.by_value.emplace(item.value, set.items.size());
    set.items.push_back(std::move(item));
  };
  auto expand = [&](AnnotatedItem::Origin origin, const OsnId& id, const DegreedCapability& received) {
    DegreedCapability cur = received;
    for (unsigned m = received.degree; m <= d_max; ++m) {
      if (m > received.degree) cur = cur.derive(1);
      add({origin, id, received.degree, m, cur.value});
    }
  };
  for (const auto& [id, cap] : dist.r_u) expand(AnnotatedItem::Origin::kFriend, id, {0, cap.value()});
  for (const auto& h : dist.r_h) {
    if (h.degree > d_max) throw DiscoveryError("received capability degree exceeds maximum");
    if (h.degree == 0) throw DiscoveryError("anonymous capability with degree 0");
    expand(AnnotatedItem::Origin::kAnonymous, {}, h);
  }
  add({AnnotatedItem::Origin::kSelf, {}, 0, 0, own_cap.value()});
  return set;
}

struct DistResult {
  std::optional<int> dist;
  std::set<OsnId> common_friend_ids;
  /// Number of matched items achieving the minimal length.
  std::size_t match_count = 0;

  friend bool operator==(const DistResult&, const DistResult&) = default;
};

/// Path length implied by one matched item: 1 for a match on the own
/// capability or on the peer's own id-bearing entry, otherwise i + m + 2.
inline int path_length(const AnnotatedItem& item, const OsnId& peer_id) {
  if (item.origin == AnnotatedItem::Origin::kSelf) return 1;
  if (item.origin == AnnotatedItem::Origin::kFriend && item.item_degree == 0 && item.friend_id == peer_id) return 1;
  return static_cast<int>(item.received_degree + item.item_degree + 2);
}

/// Dist = minimum path length over all matched values. Common-friend ids are
/// disclosed only when Dist <= 2.
inline DistResult compute_dist(const InputSet& own, const std::vector<Bytes>& matched, const OsnId& peer_id) {
  DistResult r;
  std::vector<std::pair<int, const AnnotatedItem*>> lengths;
  for (const auto& v : matched) {
    auto it = own.by_value.find(v);
    if (it == own.by_value.end()) continue;
    const auto& item = own.items[it->second];
    lengths.emplace_back(path_length(item, peer_id), &item);
  }
  for (const auto& [l, item] : lengths)
    if (!r.dist || l < *r.dist) r.dist = l;
  if (!r.dist) return r;
  for (const auto& [l, item] : lengths) {
    if (l == *r.dist) ++r.match_count;
    if (*r.dist <= 2 && l == 2 && item->origin == AnnotatedItem::Origin::kFriend && item->received_degree == 0)
      r.common_friend_ids.insert(item->friend_id);
  }
  return r;
}

struct ClientConfig {
  unsigned d_max = 1;
  psi::PsiConfig psi;
};

struct HandleResult {
  std::optional<Bytes> response;
  bool done = false;
};

/// Client-side Social PaL. Sessions are keyed by the remote device id; the
/// application relays the byte frames over whatever carrier it has.
class SocialPalClient {
 public:
  SocialPalClient(OsnId own_id, std::shared_ptr<CapabilityService> service, ClientConfig config = {})
      : own_id_(std::move(own_id)), service_(std::move(service)), config_(config) {}

  const OsnId& id() const { return own_id_; }
  const ClientConfig& config() const { return config_; }

  /// Generates a fresh capability and uploads it. On failure the previous
  /// capability and input set stay in place.
  void renewCapability() {
    auto cap = Capability::random();
    service_->upload(cap);
    std::unique_lock lock(cache_mu_);
    own_cap_ = std::move(cap);
    rebuild_locked();
  }

  /// Re-downloads the capability sets and rebuilds the input set.
  void updateCapabilities() {
    auto dist = service_->download(config_.d_max);
    std::unique_lock lock(cache_mu_);
    distribution_ = std::move(dist);
    rebuild_locked();
  }

  /// Starts a session as initiator and returns the first frame to send.
  Bytes startSoPaLSession(const std::string& device_id) {
    auto session = make_session(psi::Role::kInitiator);
    auto first = session->psi.start();
    std::lock_guard lock(sessions_mu_);
    sessions_[device_id] = std::move(session);
    return *first;
  }

  /// Feeds one inbound frame. An unknown device id starts a responder session.
  HandleResult handleSoPaLMessage(const std::string& device_id, ByteView message) {
    std::shared_ptr<Session> session;
    {
      std::lock_guard lock(sessions_mu_);
      auto it = sessions_.find(device_id);
      if (it == sessions_.end()) it = sessions_.emplace(device_id, make_session(psi::Role::kResponder)).first;
      session = it->second;
    }
    std::lock_guard lock(session->mu);
    auto step = session->psi.step(message);
    if (session->psi.succeeded() && !session->result)
      session->result = compute_dist(*session->input, session->psi.intersection(), session->psi.peer_osn_id());
    return {std::move(step.outbound), step.done};
  }

  /// The result of a completed session; nullopt while running or after failure.
  std::optional<DistResult> getResult(const std::string& device_id) const {
    auto session = find(device_id);
    if (!session) return std::nullopt;
    std::lock_guard lock(session->mu);
    return session->result;
  }

  /// Diagnostic of a failed or rejected session (empty otherwise).
  std::string sessionDiagnostic(const std::string& device_id) const {
    auto session = find(device_id);
    if (!session) return "no such session";
    std::lock_guard lock(session->mu);
    return session->psi.diagnostic();
  }

  bool endSoPaLSession(const std::string& device_id) {
    std::lock_guard lock(sessions_mu_);
    return sessions_.erase(device_id) > 0;
  }

  /// A REJECT frame for the remote party. Any session with `device_id` is dropped.
  Bytes rejectSoPaLSession(const std::string& device_id = {}) {
    std::shared_ptr<Session> session = find(device_id);
    Bytes frame;
    if (session) {
      std::lock_guard lock(session->mu);
      frame = session->psi.reject();
    } else {
      psi::Frame f;
      f.type = psi::MessageType::kReject;
      frame = f.encode();
    }
    endSoPaLSession(device_id);
    return frame;
  }

  std::size_t session_count() const {
    std::lock_guard lock(sessions_mu_);
    return sessions_.size();
  }

  /// Snapshot of the current input set.
  std::shared_ptr<const InputSet> input_set() const {
    std::shared_lock lock(cache_mu_);
    return input_;
  }

  std::optional<Capability> own_capability() const {
    std::shared_lock lock(cache_mu_);
    return own_cap_;
  }

  /// Installs a transcript observer on every session started afterwards.
  void set_transcript_observer(psi::TranscriptObserver obs) { observer_ = std::move(obs); }

 private:
  struct Session {
    explicit Session(psi::PsiSession s, std::shared_ptr<const InputSet> in) : psi(std::move(s)), input(std::move(in)) {}
    std::mutex mu;
    psi::PsiSession psi;
    std::shared_ptr<const InputSet> input;
    std::optional<DistResult> result;
  };

  std::shared_ptr<Session> make_session(psi::Role role) {
    auto input = input_set();
    if (!input) throw DiscoveryError("no capabilities: call renewCapability and updateCapabilities first");
    auto s = std::make_shared<Session>(
        psi::PsiSession(role, input->values(), KeyPair::generate(), own_id_, config_.psi), input);
    if (observer_) s->psi.set_transcript_observer(observer_);
    return s;
  }

  std::shared_ptr<Session> find(const std::string& device_id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(device_id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  void rebuild_locked() {
    if (!own_cap_) return;
    input_ = std::make_shared<const InputSet>(build_input_set(distribution_, *own_cap_, config_.d_max));
  }

  OsnId own_id_;
  std::shared_ptr<CapabilityService> service_;
  ClientConfig config_;
  psi::TranscriptObserver observer_;

  mutable std::shared_mutex cache_mu_;
  std::optional<Capability> own_cap_;
  DistributionResult distribution_;
  std::shared_ptr<const InputSet> input_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// Carrier for discovery frames between two devices.
class FrameTransport {
 public:
  virtual ~FrameTransport() = default;
  virtual void send(ByteView frame) = 0;
  virtual Bytes receive() = 0;
};

/// Drives one side of a discovery session over a transport until it finishes.
inline std::optional<DistResult> run_discovery(SocialPalClient& client, const std::string& peer_device,
                                               FrameTransport& transport, bool initiator) {
  if (initiator) transport.send(client.startSoPaLSession(peer_device));
  for (;;) {
    auto frame = transport.receive();
    auto r = client.handleSoPaLMessage(peer_device, frame);
    if (r.response) transport.send(*r.response);
    if (r.done) break;
  }
  auto result = client.getResult(peer_device);
  if (!result) {
    auto why = client.sessionDiagnostic(peer_device);
    if (why != "peer rejected session") transport.send(client.rejectSoPaLSession(peer_device));
    client.endSoPaLSession(peer_device);
    throw DiscoveryError("discovery failed: " + why);
  }
  client.endSoPaLSession(peer_device);
  return result;
}

/// Runs a full discovery between two in-process clients, relaying frames
/// directly. Returns (initiator result, responder result).
inline std::pair<std::optional<DistResult>, std::optional<DistResult>> run_discovery(SocialPalClient& a,
                                                                                     SocialPalClient& b) {
  const std::string a_dev = "dev:" + a.id();
  const std::string b_dev = "dev:" + b.id();
  std::optional<Bytes> msg = a.startSoPaLSession(b_dev);
  bool to_b = true;
  while (msg) {
    auto r = to_b ? b.handleSoPaLMessage(a_dev, *msg) : a.handleSoPaLMessage(b_dev, *msg);
    msg = std::move(r.response);
    to_b = !to_b;
  }
  auto ra = a.getResult(b_dev);
  auto rb = b.getResult(a_dev);
  a.endSoPaLSession(b_dev);
  b.endSoPaLSession(a_dev);
  return {ra, rb};
}

}  // namespace socialpal
