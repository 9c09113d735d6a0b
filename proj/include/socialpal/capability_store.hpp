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
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "socialpal/bytes.hpp"
#include "socialpal/crypto.hpp"
#include "socialpal/osn_connector.hpp"
#include "socialpal/social_graph.hpp"

namespace socialpal {

class StoreError : public Error {
 public:
  enum class Code { kNotEnrolled, kBadCapability, kConnector, kSnapshot };

  StoreError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct CapRecord {
  OsnId id;
  Capability cap;
  NodeKind kind = NodeKind::kErsatz;
  Clock::time_point created_at;
  Clock::duration ttl{};
  bool stale = false;
};

/// What a member receives from the server: F^1 capabilities with ids, and
/// id-free higher-degree values for F^2..F^(dmax+1).
struct DistributionResult {
  std::vector<std::pair<OsnId, Capability>> r_u;
  std::vector<DegreedCapability> r_h;

  std::size_t size() const { return r_u.size() + r_h.size(); }
  friend bool operator==(const DistributionResult&, const DistributionResult&) = default;
};

struct StoreConfig {
  unsigned d_max = 1;
  Clock::duration ttl = std::chrono::hours(48);
  bool ersatz_enabled = true;
  std::size_t capability_bits = kDefaultCapabilityBits;
};

inline constexpr int kSnapshotVersion = 1;

/// Capability records plus the server-known social graph. Distribution calls
/// run concurrently; uploads and expiry are serialized writers.
class CapabilityStore {
 public:
  explicit CapabilityStore(StoreConfig config = {}, TimeSource now = Clock::now)
      : config_(config), now_(std::move(now)) {}

  const StoreConfig& config() const { return config_; }

  /// Stores `cap` as uid's member capability, merges uid's friend list into the
  /// graph and creates ersatz records for friends without one. The connector is
  /// queried before any state changes, so a connector failure leaves the store intact.
  void upload_capability(const OsnId& uid, Capability cap, const OsnConnector& connector) {
    if (cap.bits() != config_.capability_bits)
      throw StoreError(StoreError::Code::kBadCapability,
                       "capability must be " + std::to_string(config_.capability_bits) + " bits");
    std::vector<OsnId> friends;
    try {
      friends = connector.friend_list(uid);
    } catch (const std::exception& e) {
      throw StoreError(StoreError::Code::kConnector, e.what());
    }
    std::vector<std::pair<OsnId, Capability>> ersatz;
    if (config_.ersatz_enabled)
      for (const auto& f : friends) ersatz.emplace_back(f, Capability::random(config_.capability_bits));

    std::unique_lock lock(mu_);
    const auto now = now_();
    graph_.record_member(uid, friends);
    records_[uid] = CapRecord{uid, std::move(cap), NodeKind::kMember, now, config_.ttl, false};
    for (auto& [f, c] : ersatz) {
      if (f == uid || records_.count(f)) continue;
      records_.emplace(f, CapRecord{f, std::move(c), NodeKind::kErsatz, now, config_.ttl, false});
    }
  }

  /// Computes R_U and R_U^h for a member. Higher-degree values are derived on
  /// each call and never stored.
  DistributionResult distribute(const OsnId& uid, unsigned d_max) const {
    std::shared_lock lock(mu_);
    auto it = records_.find(uid);
    if (it == records_.end() || it->second.kind != NodeKind::kMember || !graph_.is_member(uid))
      throw StoreError(StoreError::Code::kNotEnrolled, uid + " is not an enrolled member");
    const auto layers = graph_.layer_friend_sets(uid, d_max + 1, !config_.ersatz_enabled);
    DistributionResult out;
    for (std::size_t i = 1; i <= layers.layers.size(); ++i) {
      for (const auto& id : layers.at(i)) {
        auto rec = records_.find(id);
        if (rec == records_.end() || rec->second.stale) continue;
        if (i == 1)
          out.r_u.emplace_back(id, rec->second.cap);
        else
          out.r_h.push_back(DegreedCapability::of(rec->second.cap, static_cast<unsigned>(i - 1)));
      }
    }
    std::sort(out.r_h.begin(), out.r_h.end(), [](const auto& a, const auto& b) {
      return std::tie(a.degree, a.value) < std::tie(b.degree, b.value);
    });
    return out;
  }

  /// Marks expired member records stale and regenerates expired ersatz
  /// capabilities. Returns the number of records that expired in this call.
  std::size_t expire_and_refresh() {
    std::unique_lock lock(mu_);
    const auto now = now_();
    std::size_t count = 0;
    for (auto& [id, rec] : records_) {
      if (rec.stale || now - rec.created_at < rec.ttl) continue;
      ++count;
      if (rec.kind == NodeKind::kMember) {
        rec.stale = true;
      } else {
        rec.cap = Capability::random(config_.capability_bits);
        rec.created_at = now;
      }
    }
    return count;
  }

  std::optional<CapRecord> record(const OsnId& id) const {
    std::shared_lock lock(mu_);
    auto it = records_.find(id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t record_count() const {
    std::shared_lock lock(mu_);
    return records_.size();
  }

  SocialGraph graph() const {
    std::shared_lock lock(mu_);
    return graph_;
  }

  // Snapshot format (JSON):
  //   {"format": "socialpal-store", "version": 1,
  //    "records": [{"id", "cap" (lowercase hex), "kind" ("member"|"ersatz"),
  //                 "created_at_ms", "ttl_s", "stale"}],
  //    "nodes": [{"id", "kind"}], "edges": [[id, id], ...]}
  nlohmann::json to_json() const {
    std::shared_lock lock(mu_);
    using namespace std::chrono;
    nlohmann::json j{{"format", "socialpal-store"}, {"version", kSnapshotVersion}};
    auto& recs = j["records"] = nlohmann::json::array();
    for (const auto& [id, r] : records_) {
      recs.push_back({{"id", id},
                      {"cap", r.cap.hex()},
                      {"kind", to_string(r.kind)},
                      {"created_at_ms", duration_cast<milliseconds>(r.created_at.time_since_epoch()).count()},
                      {"ttl_s", duration_cast<seconds>(r.ttl).count()},
                      {"stale", r.stale}});
    }
    auto& nodes = j["nodes"] = nlohmann::json::array();
    auto& edges = j["edges"] = nlohmann::json::array();
    for (const auto& [id, kind] : graph_.nodes()) {
      nodes.push_back({{"id", id}, {"kind", to_string(kind)}});
      for (const auto& v : graph_.neighbors(id))
        if (id < v) edges.push_back({id, v});
    }
    return j;
  }

  void load_json(const nlohmann::json& j) {
    using namespace std::chrono;
    try {
      if (j.at("format") != "socialpal-store") throw StoreError(StoreError::Code::kSnapshot, "not a store snapshot");
      if (j.at("version") != kSnapshotVersion)
        throw StoreError(StoreError::Code::kSnapshot, "unsupported snapshot version");
      auto parse_kind = [](const std::string& s) {
        if (s == "member") return NodeKind::kMember;
        if (s == "ersatz") return NodeKind::kErsatz;
        throw StoreError(StoreError::Code::kSnapshot, "bad node kind " + s);
      };
      std::map<OsnId, CapRecord> records;
      for (const auto& r : j.at("records")) {
        CapRecord rec;
        rec.id = r.at("id").get<std::string>();
        rec.cap = Capability(from_hex(r.at("cap").get<std::string>()));
        rec.kind = parse_kind(r.at("kind").get<std::string>());
        rec.created_at = Clock::time_point(milliseconds(r.at("created_at_ms").get<std::int64_t>()));
        rec.ttl = seconds(r.at("ttl_s").get<std::int64_t>());
        rec.stale = r.at("stale").get<bool>();
        records.emplace(rec.id, std::move(rec));
      }
      SocialGraph graph;
      for (const auto& n : j.at("nodes"))
        graph.restore_node(n.at("id").get<std::string>(), parse_kind(n.at("kind").get<std::string>()));
      for (const auto& e : j.at("edges")) graph.restore_edge(e.at(0).get<std::string>(), e.at(1).get<std::string>());
      std::unique_lock lock(mu_);
      records_ = std::move(records);
      graph_ = std::move(graph);
    } catch (const nlohmann::json::exception& e) {
      throw StoreError(StoreError::Code::kSnapshot, std::string("malformed snapshot: ") + e.what());
    } catch (const GraphError& e) {
      throw StoreError(StoreError::Code::kSnapshot, e.what());
    } catch (const StoreError&) {
      throw;
    } catch (const Error& e) {
      throw StoreError(StoreError::Code::kSnapshot, std::string("malformed snapshot: ") + e.what());
    }
  }

  /// Writes the snapshot to a temporary file and renames it over `path`.
  void save_snapshot(const std::filesystem::path& path) const {
    const auto body = to_json().dump(1);
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw StoreError(StoreError::Code::kSnapshot, "cannot write " + tmp.string());
      out << body;
      out.flush();
      if (!out) throw StoreError(StoreError::Code::kSnapshot, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw StoreError(StoreError::Code::kSnapshot, "rename failed: " + ec.message());
  }

  void load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError(StoreError::Code::kSnapshot, "cannot open " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw StoreError(StoreError::Code::kSnapshot, std::string("malformed snapshot: ") + e.what());
    }
    load_json(j);
  }

 private:
  StoreConfig config_;
  TimeSource now_;
  mutable std::shared_mutex mu_;
  std::map<OsnId, CapRecord> records_;
  SocialGraph graph_;
};

}  // namespace socialpal
