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
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "socialpal/capability_service.hpp"
#include "socialpal/capability_store.hpp"
#include "socialpal/discovery_client.hpp"
#include "socialpal/osn_connector.hpp"
#include "socialpal/social_graph.hpp"

namespace socialpal::sim {

using Rng = std::mt19937_64;
using Node = Graph::Node;

// ---------------------------------------------------------------------------
// Synthetic graphs. Node names are decimal indices.

inline Graph empty_graph(std::size_t n) {
  Graph g;
  for (std::size_t i = 0; i < n; ++i) g.add_node(std::to_string(i));
  return g;
}

inline Graph erdos_renyi(std::size_t n, double p, Rng& rng) {
  Graph g = empty_graph(n);
  std::bernoulli_distribution coin(p);
  for (Node u = 0; u < n; ++u)
    for (Node v = u + 1; v < n; ++v)
      if (coin(rng)) g.add_edge(u, v);
  return g;
}

/// Barabasi-Albert: each new node links to `m` distinct existing nodes chosen
/// proportionally to degree.
inline Graph preferential_attachment(std::size_t n, std::size_t m, Rng& rng) {
  Graph g = empty_graph(n);
  std::vector<Node> ends;
  const std::size_t seed = std::min(n, m + 1);
  for (Node u = 0; u < seed; ++u)
    for (Node v = u + 1; v < seed; ++v) {
      g.add_edge(u, v);
      ends.push_back(u);
      ends.push_back(v);
    }
  for (Node u = static_cast<Node>(seed); u < n; ++u) {
    std::vector<Node> targets;
    while (targets.size() < std::min<std::size_t>(m, u)) {
      std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
      Node v = ends.empty() ? 0 : ends[pick(rng)];
      if (std::find(targets.begin(), targets.end(), v) == targets.end()) targets.push_back(v);
    }
    for (auto v : targets) {
      g.add_edge(u, v);
      ends.push_back(u);
      ends.push_back(v);
    }
  }
  return g;
}

/// Undirected forest-fire model: each newcomer links to a random ambassador
/// and then recursively "burns" a geometric number (mean p/(1-p)) of the
/// unvisited neighbors of every burned node.
inline Graph forest_fire(std::size_t n, double p_forward, Rng& rng) {
  Graph g = empty_graph(n);
  std::geometric_distribution<std::size_t> burn(1.0 - p_forward);
  for (Node u = 1; u < n; ++u) {
    std::uniform_int_distribution<Node> pick(0, u - 1);
    std::vector<bool> visited(u, false);
    std::vector<Node> frontier{pick(rng)};
    visited[frontier[0]] = true;
    while (!frontier.empty()) {
      Node w = frontier.back();
      frontier.pop_back();
      g.add_edge(u, w);
      std::vector<Node> fresh;
      for (auto x : g.neighbors(w))
        if (x < u && !visited[x]) fresh.push_back(x);
      std::shuffle(fresh.begin(), fresh.end(), rng);
      const auto k = std::min(burn(rng), fresh.size());
      for (std::size_t i = 0; i < k; ++i) {
        visited[fresh[i]] = true;
        frontier.push_back(fresh[i]);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Discoverability model.

struct Discovery {
  bool found = false;
  int dist = 0;  // meaningful only when found
  friend bool operator==(const Discovery&, const Discovery&) = default;
};

/// Hop counts from a member over the server-known graph, expanded to at most
/// `max_depth` hops. Known edges: every ground edge with a member endpoint
/// (ersatz on) or with two member endpoints (ersatz off).
inline std::vector<int> known_distances(const Graph& g, const std::vector<bool>& member, bool ersatz_on, Node src,
                                        int max_depth) {
  std::vector<int> dist(g.size(), kUnreachable);
  std::vector<Node> frontier{src};
  dist[src] = 0;
  for (int depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
    std::vector<Node> next;
    for (auto u : frontier)
      for (auto v : g.neighbors(u)) {
        if (dist[v] != kUnreachable) continue;
        const bool known = ersatz_on ? (member[u] || member[v]) : (member[u] && member[v]);
        if (!known) continue;
        dist[v] = depth + 1;
        next.push_back(v);
      }
    frontier = std::move(next);
  }
  return dist;
}

/// Closed-form outcome of a discovery run between members a and b, given
/// their known-graph distance vectors (depth D_max + 1).
inline Discovery discoverable_from(const Graph& g, Node a, Node b, const std::vector<int>& da,
                                   const std::vector<int>& db) {
  if (g.has_edge(a, b)) return {true, 1};
  Discovery out;
  for (Node c = 0; c < g.size(); ++c) {
    if (c == a || c == b || da[c] < 1 || db[c] < 1) continue;
    const int d = da[c] + db[c];
    if (!out.found || d < out.dist) out = {true, d};
  }
  return out;
}

inline Discovery discoverable(const Graph& g, const std::vector<bool>& member, bool ersatz_on, unsigned d_max, Node a,
                              Node b) {
  const int depth = static_cast<int>(d_max) + 1;
  return discoverable_from(g, a, b, known_distances(g, member, ersatz_on, a, depth),
                           known_distances(g, member, ersatz_on, b, depth));
}

// ---------------------------------------------------------------------------
// Coverage simulation.

struct SimConfig {
  std::vector<double> fractions{0.2, 0.4, 0.6, 0.8};
  std::vector<int> lengths{2, 3, 4};
  std::size_t pairs_per_cell = 1000;
  std::size_t repetitions = 10;
  unsigned d_max = 1;
  std::vector<bool> ersatz_modes{true, false};
  std::uint64_t seed = 1;
  std::size_t min_pairs = 1;
  std::size_t threads = 1;
};

struct CoverageCell {
  double fraction = 0;
  int length = 0;
  bool ersatz = false;
  double mean = 0;
  double stddev = 0;
  std::size_t pairs_sampled = 0;
  std::size_t repetitions = 0;
  std::vector<double> per_repetition;
};

struct CoverageReport {
  std::uint64_t seed = 0;
  std::vector<CoverageCell> cells;
  std::vector<std::string> warnings;

  const CoverageCell* find(double fraction, int length, bool ersatz) const {
    for (const auto& c : cells)
      if (std::abs(c.fraction - fraction) < 1e-12 && c.length == length && c.ersatz == ersatz) return &c;
    return nullptr;
  }

  /// Columns: fraction, length, ersatz, mean_coverage, std, pairs_sampled, seed.
  void write_csv(std::ostream& out) const {
    out << "fraction,length,ersatz,mean_coverage,std,pairs_sampled,seed\n";
    for (const auto& c : cells) {
      out << std::fixed << std::setprecision(2) << c.fraction << ',' << c.length << ',' << (c.ersatz ? 1 : 0) << ','
          << std::setprecision(6) << c.mean << ',' << c.stddev << ',' << c.pairs_sampled << ',' << seed << '\n';
    }
  }
};

/// Member pairs (a < b) whose ground-truth distance equals `length`.
inline std::vector<std::pair<Node, Node>> pairs_at_distance(const Graph& g, const std::vector<Node>& members,
                                                            int length) {
  std::vector<std::pair<Node, Node>> out;
  for (auto a : members) {
    auto d = bfs_distances(g, a, length);
    for (auto b : members)
      if (a < b && d[b] == length) out.emplace_back(a, b);
  }
  return out;
}

/// Uniform member sample of round(fraction * |V|) nodes (at least 2 when possible).
inline std::vector<Node> sample_members(const Graph& g, double fraction, Rng& rng) {
  std::vector<Node> all(g.size());
  for (Node i = 0; i < g.size(); ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(g.size())));
  k = std::min(g.size(), std::max<std::size_t>(k, std::min<std::size_t>(2, g.size())));
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

namespace detail {
struct RepResult {
  // key: (length, ersatz) -> (coverage, pairs) or nullopt when skipped
  std::map<std::pair<int, bool>, std::optional<std::pair<double, std::size_t>>> cells;
  std::vector<std::string> warnings;
};

inline RepResult run_repetition(const Graph& g, const SimConfig& cfg, double fraction, std::size_t fraction_index,
                                std::size_t rep) {
  std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(fraction_index),
                    static_cast<std::uint64_t>(rep)};
  Rng rng(seq);
  RepResult out;
  const auto members = sample_members(g, fraction, rng);
  std::vector<bool> is_member(g.size(), false);
  for (auto m : members) is_member[m] = true;
  const int depth = static_cast<int>(cfg.d_max) + 1;

  std::map<bool, std::map<Node, std::vector<int>>> cache;
  auto dists = [&](bool ersatz, Node u) -> const std::vector<int>& {
    auto& c = cache[ersatz];
    auto it = c.find(u);
    if (it == c.end()) it = c.emplace(u, known_distances(g, is_member, ersatz, u, depth)).first;
    return it->second;
  };

  for (int length : cfg.lengths) {
    auto pairs = pairs_at_distance(g, members, length);
    const bool enough = pairs.size() >= std::max<std::size_t>(1, cfg.min_pairs);
    if (!enough) {
      std::ostringstream w;
      w << "fraction " << fraction << " length " << length << " repetition " << rep << ": only " << pairs.size()
        << " qualifying pairs; skipped";
      out.warnings.push_back(w.str());
      for (bool e : cfg.ersatz_modes) out.cells[{length, e}] = std::nullopt;
      continue;
    }
    const auto take = std::min(cfg.pairs_per_cell, pairs.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pairs.size() - 1);
      std::swap(pairs[i], pairs[pick(rng)]);
    }
    for (bool e : cfg.ersatz_modes) {
      std::size_t found = 0;
      for (std::size_t i = 0; i < take; ++i) {
        auto [a, b] = pairs[i];
        if (discoverable_from(g, a, b, dists(e, a), dists(e, b)).found) ++found;
      }
      out.cells[{length, e}] = std::make_pair(static_cast<double>(found) / static_cast<double>(take), take);
    }
  }
  return out;
}
}  // namespace detail

/// Coverage per (fraction, length, ersatz mode): the share of sampled member
/// pairs at exact ground distance `length` that the model discovers, averaged
/// over repetitions. Each (fraction, repetition) job draws from its own RNG
/// stream derived from the master seed, so results do not depend on threading.
inline CoverageReport run_coverage(const Graph& g, const SimConfig& cfg) {
  for (double f : cfg.fractions)
    if (!(f > 0.0 && f <= 1.0)) throw Error("member fractions must lie in (0, 1]");
  for (int l : cfg.lengths)
    if (l < 1 || l > 2 * static_cast<int>(cfg.d_max) + 2) throw Error("path length outside detectable range");

  struct Job {
    std::size_t fi, rep;
    detail::RepResult result;
  };
  std::vector<Job> jobs;
  for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi)
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) jobs.push_back({fi, rep, {}});

  const std::size_t nthreads = std::max<std::size_t>(1, std::min(cfg.threads, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < nthreads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t j = t; j < jobs.size(); j += nthreads)
        jobs[j].result = detail::run_repetition(g, cfg, cfg.fractions[jobs[j].fi], jobs[j].fi, jobs[j].rep);
    });
  for (auto& th : pool) th.join();

  CoverageReport report;
  report.seed = cfg.seed;
  for (const auto& j : jobs)
    report.warnings.insert(report.warnings.end(), j.result.warnings.begin(), j.result.warnings.end());
  for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi)
    for (int length : cfg.lengths)
      for (bool e : cfg.ersatz_modes) {
        CoverageCell cell;
        cell.fraction = cfg.fractions[fi];
        cell.length = length;
        cell.ersatz = e;
        for (const auto& j : jobs) {
          if (j.fi != fi) continue;
          const auto& v = j.result.cells.at({length, e});
          if (!v) continue;
          cell.per_repetition.push_back(v->first);
          cell.pairs_sampled += v->second;
        }
        cell.repetitions = cell.per_repetition.size();
        if (cell.repetitions == 0) continue;
        double sum = 0;
        for (double x : cell.per_repetition) sum += x;
        cell.mean = sum / static_cast<double>(cell.repetitions);
        double sq = 0;
        for (double x : cell.per_repetition) sq += (x - cell.mean) * (x - cell.mean);
        cell.stddev = cell.repetitions > 1 ? std::sqrt(sq / static_cast<double>(cell.repetitions - 1)) : 0.0;
        report.cells.push_back(std::move(cell));
      }
  return report;
}

// ---------------------------------------------------------------------------
// Full-protocol harness.

/// A capability server plus one client per member, all in process.
class ProtocolWorld {
 public:
  ProtocolWorld(const Graph& g, const std::vector<Node>& members, unsigned d_max, bool ersatz_on,
                psi::PsiConfig psi = {})
      : connector_(std::make_shared<MockOsnConnector>(g)),
        store_(std::make_shared<CapabilityStore>(StoreConfig{d_max, std::chrono::hours(48), ersatz_on})) {
    for (auto m : members) {
      auto service = std::make_shared<LocalCapabilityService>(store_, connector_, g.name(m));
      clients_.emplace(m, std::make_unique<SocialPalClient>(g.name(m), service, ClientConfig{d_max, psi}));
    }
    for (auto& [m, c] : clients_) c->renewCapability();
    for (auto& [m, c] : clients_) c->updateCapabilities();
  }

  SocialPalClient& client(Node m) { return *clients_.at(m); }
  const std::shared_ptr<CapabilityStore>& store() const { return store_; }

  /// Runs discovery a -> b; returns the outcome seen by each side.
  std::pair<Discovery, Discovery> discover(Node a, Node b) {
    auto [ra, rb] = run_discovery(client(a), client(b));
    auto conv = [](const std::optional<DistResult>& r) {
      if (!r) throw Error("protocol session failed");
      return r->dist ? Discovery{true, *r->dist} : Discovery{};
    };
    return {conv(ra), conv(rb)};
  }

 private:
  std::shared_ptr<MockOsnConnector> connector_;
  std::shared_ptr<CapabilityStore> store_;
  std::map<Node, std::unique_ptr<SocialPalClient>> clients_;
};

struct EquivalenceReport {
  std::size_t pairs = 0;
  std::size_t mismatches = 0;
  std::vector<std::string> details;
};

/// Runs the real protocol for member pairs and compares both endpoints'
/// (found, dist) with the closed-form model. `max_pairs` of 0 means all pairs.
inline EquivalenceReport model_protocol_equivalence(const Graph& g, const std::vector<Node>& members, unsigned d_max,
                                                    bool ersatz_on, std::size_t max_pairs = 0,
                                                    std::uint64_t seed = 1) {
  ProtocolWorld world(g, members, d_max, ersatz_on);
  std::vector<bool> is_member(g.size(), false);
  for (auto m : members) is_member[m] = true;
  std::vector<std::pair<Node, Node>> pairs;
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j) pairs.emplace_back(members[i], members[j]);
  if (max_pairs && pairs.size() > max_pairs) {
    Rng rng(seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(max_pairs);
  }
  EquivalenceReport rep;
  for (auto [a, b] : pairs) {
    const auto model = discoverable(g, is_member, ersatz_on, d_max, a, b);
    const auto [pa, pb] = world.discover(a, b);
    ++rep.pairs;
    if (pa != model || pb != model) {
      ++rep.mismatches;
      std::ostringstream d;
      d << g.name(a) << "-" << g.name(b) << ": model (" << model.found << "," << model.dist << ") protocol A ("
        << pa.found << "," << pa.dist << ") B (" << pb.found << "," << pb.dist << ")";
      rep.details.push_back(d.str());
    }
  }
  return rep;
}

}  // namespace socialpal::sim
