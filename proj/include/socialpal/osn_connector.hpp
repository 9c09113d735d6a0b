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

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "socialpal/bytes.hpp"
#include "socialpal/crypto.hpp"
#include "socialpal/social_graph.hpp"

namespace socialpal {

using Clock = std::chrono::system_clock;
using TimeSource = std::function<Clock::time_point()>;

class ConnectorError : public Error {
 public:
  using Error::Error;
};

struct AuthToken {
  std::string token;
  OsnId uid;
  Clock::time_point expiry;
};

/// The server's view of an online social network: token authentication and
/// friend-list lookup.
class OsnConnector {
 public:
  virtual ~OsnConnector() = default;
  /// The uid a token belongs to, or nullopt for an unknown or expired token.
  virtual std::optional<OsnId> authenticate(const std::string& token) const = 0;
  /// The complete friend list of `uid`; throws ConnectorError on failure.
  virtual std::vector<OsnId> friend_list(const OsnId& uid) const = 0;
};

/// Connector backed by a ground-truth graph. In test mode it also accepts
/// tokens of the form `mock:<uid>` for any uid present in the graph.
class MockOsnConnector : public OsnConnector {
 public:
  explicit MockOsnConnector(Graph graph, bool test_mode = true, TimeSource now = Clock::now)
      : graph_(std::move(graph)), test_mode_(test_mode), now_(std::move(now)) {}

  AuthToken issue_token(const OsnId& uid, Clock::duration lifetime) {
    AuthToken t{to_hex(random_bytes(16)), uid, now_() + lifetime};
    std::lock_guard lock(mu_);
    tokens_[t.token] = t;
    return t;
  }

  std::optional<OsnId> authenticate(const std::string& token) const override {
    static constexpr std::string_view kPrefix = "mock:";
    if (test_mode_ && token.starts_with(kPrefix)) {
      OsnId uid = token.substr(kPrefix.size());
      if (graph_.find(uid)) return uid;
      return std::nullopt;
    }
    std::lock_guard lock(mu_);
    auto it = tokens_.find(token);
    if (it == tokens_.end() || it->second.expiry <= now_()) return std::nullopt;
    return it->second.uid;
  }

  std::vector<OsnId> friend_list(const OsnId& uid) const override {
    if (!graph_.find(uid)) throw ConnectorError("unknown OSN user " + uid);
    return graph_.friends_of(uid);
  }

  const Graph& graph() const { return graph_; }

 private:
  Graph graph_;
  bool test_mode_;
  TimeSource now_;
  mutable std::mutex mu_;
  std::map<std::string, AuthToken> tokens_;
};

}  // namespace socialpal
