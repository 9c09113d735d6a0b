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
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "socialpal/bytes.hpp"

namespace socialpal {

using OsnId = std::string;

enum class NodeKind { kAbsent, kMember, kErsatz };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::kMember: return "member";
    case NodeKind::kErsatz: return "ersatz";
    default: return "absent";
  }
}

class GraphError : public Error {
 public:
  using Error::Error;
};

/// Ground-truth undirected graph with dense integer node indices.
class Graph {
 public:
  using Node = std::uint32_t;

  Node add_node(const OsnId& name) {
    auto [it, inserted] = index_.emplace(name, static_cast<Node>(names_.size()));
    if (inserted) {
      names_.push_back(name);
      adj_.emplace_back();
    }
    return it->second;
  }

  /// Adds the undirected edge u-v; self loops and duplicates are ignored.
  void add_edge(Node u, Node v) {
    if (u == v) return;
    if (has_edge(u, v)) return;
    adj_[u].push_back(v);
    adj_[v].push_back(u);
    ++edges_;
  }
  void add_edge(const OsnId& u, const OsnId& v) { add_edge(add_node(u), add_node(v)); }

  bool has_edge(Node u, Node v) const {
    const auto& a = adj_[u].size() < adj_[v].size() ? adj_[u] : adj_[v];
    const Node other = adj_[u].size() < adj_[v].size() ? v : u;
    return std::find(a.begin(), a.end(), other) != a.end();
  }

  std::size_t size() const { return names_.size(); }
  std::size_t edge_count() const { return edges_; }
  const std::vector<Node>& neighbors(Node u) const { return adj_[u]; }
  const OsnId& name(Node u) const { return names_[u]; }
  std::optional<Node> find(const OsnId& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<OsnId> friends_of(const OsnId& id) const {
    std::vector<OsnId> out;
    if (auto u = find(id))
      for (auto v : adj_[*u]) out.push_back(names_[v]);
    return out;
  }

 private:
  std::vector<OsnId> names_;
  std::unordered_map<OsnId, Node> index_;
  std::vector<std::vector<Node>> adj_;
  std::size_t edges_ = 0;
};

inline constexpr int kUnreachable = -1;

/// BFS hop counts from `src` (kUnreachable where no path); stops expanding past max_depth.
inline std::vector<int> bfs_distances(const Graph& g, Graph::Node src, int max_depth = -1) {
  std::vector<int> dist(g.size(), kUnreachable);
  std::deque<Graph::Node> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    if (max_depth >= 0 && dist[u] >= max_depth) continue;
    for (auto v : g.neighbors(u)) {
      if (dist[v] != kUnreachable) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

/// Plain BFS shortest path length on the full graph; nullopt when unreachable.
inline std::optional<int> true_shortest_distance(const Graph& g, const OsnId& u, const OsnId& v) {
  auto a = g.find(u);
  auto b = g.find(v);
  if (!a || !b) return std::nullopt;
  const int d = bfs_distances(g, *a)[*b];
  if (d == kUnreachable) return std::nullopt;
  return d;
}

/// Reads `id id` pairs, one per line; `#` starts a comment.
inline Graph load_edge_list(std::istream& in) {
  Graph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    OsnId a, b, extra;
    if (!(fields >> a)) continue;
    if (!(fields >> b) || (fields >> extra))
      throw GraphError("edge list line " + std::to_string(lineno) + ": expected two ids");
    g.add_edge(a, b);
  }
  return g;
}

inline Graph load_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open edge list: " + path);
  return load_edge_list(in);
}

inline std::vector<OsnId> load_membership(std::istream& in) {
  std::vector<OsnId> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    OsnId id;
    if (fields >> id) out.push_back(id);
  }
  return out;
}

inline std::vector<OsnId> load_membership_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open membership list: " + path);
  return load_membership(in);
}

/// F^1..F^n around a center node.
struct FriendLayers {
  OsnId center;
  std::vector<std::set<OsnId>> layers;

  /// F^k for k >= 1; empty when k exceeds the computed depth.
  const std::set<OsnId>& at(std::size_t k) const {
    static const std::set<OsnId> kEmpty;
    return k >= 1 && k <= layers.size() ? layers[k - 1] : kEmpty;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.size();
    return n;
  }
};

/// The graph as the server can observe it: every member's full friend list,
/// with non-enrolled friends standing in as ersatz nodes. Edges are never removed.
/// Const members are safe for concurrent readers; callers serialize mutation.
class SocialGraph {
 public:
  void record_member(const OsnId& uid, const std::vector<OsnId>& friend_list) {
    kinds_[uid] = NodeKind::kMember;
    for (const auto& f : friend_list) {
      if (f == uid) continue;
      kinds_.emplace(f, NodeKind::kErsatz);
      adj_[uid].insert(f);
      adj_[f].insert(uid);
    }
    adj_[uid];
  }

  /// Snapshot restore hooks; they bypass the member-attestation rule.
  void restore_node(const OsnId& id, NodeKind kind) {
    kinds_[id] = kind;
    adj_[id];
  }
  void restore_edge(const OsnId& a, const OsnId& b) {
    adj_[a].insert(b);
    adj_[b].insert(a);
  }

  NodeKind kind(const OsnId& id) const {
    auto it = kinds_.find(id);
    return it == kinds_.end() ? NodeKind::kAbsent : it->second;
  }
  bool is_member(const OsnId& id) const { return kind(id) == NodeKind::kMember; }

  bool has_edge(const OsnId& a, const OsnId& b) const {
    auto it = adj_.find(a);
    return it != adj_.end() && it->second.count(b) > 0;
  }

  const std::set<OsnId>& neighbors(const OsnId& id) const {
    static const std::set<OsnId> kEmpty;
    auto it = adj_.find(id);
    return it == adj_.end() ? kEmpty : it->second;
  }

  const std::map<OsnId, NodeKind>& nodes() const { return kinds_; }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [id, nbrs] : adj_) n += nbrs.size();
    return n / 2;
  }

  /// Breadth-first layering around a member: a node joins F^k when it is a
  /// friend of some F^(k-1) node and was not placed in an earlier layer.
  /// With `members_only`, ersatz nodes are neither traversed nor reported.
  FriendLayers layer_friend_sets(const OsnId& uid, std::size_t n, bool members_only = false) const {
    if (!is_member(uid)) throw GraphError("layering requested for non-member " + uid);
    if (n == 0) throw GraphError("layer count must be at least 1");
    FriendLayers out{uid, std::vector<std::set<OsnId>>(n)};
    std::set<OsnId> seen{uid};
    std::vector<OsnId> frontier{uid};
    for (std::size_t k = 0; k < n && !frontier.empty(); ++k) {
      std::vector<OsnId> next;
      for (const auto& u : frontier) {
        for (const auto& v : neighbors(u)) {
          if (members_only && !is_member(v)) continue;
          if (!seen.insert(v).second) continue;
          out.layers[k].insert(v);
          next.push_back(v);
        }
      }
      frontier = std::move(next);
    }
    return out;
  }

 private:
  std::map<OsnId, NodeKind> kinds_;
  std::map<OsnId, std::set<OsnId>> adj_;
};

}  // namespace socialpal
