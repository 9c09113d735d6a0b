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

#include <sstream>

#include "socialpal/coverage_sim.hpp"

namespace socialpal::sim {
namespace {

std::vector<bool> mask_of(const Graph& g, const std::vector<Node>& members) {
  std::vector<bool> m(g.size(), false);
  for (auto x : members) m[x] = true;
  return m;
}

std::vector<Node> all_nodes(const Graph& g) {
  std::vector<Node> v(g.size());
  for (Node i = 0; i < g.size(); ++i) v[i] = i;
  return v;
}

Graph path_graph(std::size_t n) {
  Graph g = empty_graph(n);
  for (Node i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return g;
}

TEST(Discoverable, PathThroughNonMember) {
  auto g = path_graph(3);  // 0 - 1 - 2, with 1 not enrolled
  auto m = mask_of(g, {0, 2});
  EXPECT_EQ(discoverable(g, m, true, 1, 0, 2), (Discovery{true, 2}));
  EXPECT_FALSE(discoverable(g, m, false, 1, 0, 2).found);
}

TEST(Discoverable, AdjacentMembers) {
  auto g = path_graph(2);
  EXPECT_EQ(discoverable(g, mask_of(g, {0, 1}), false, 1, 0, 1), (Discovery{true, 1}));
  EXPECT_EQ(discoverable(g, mask_of(g, {0, 1}), true, 1, 0, 1), (Discovery{true, 1}));
}

TEST(Discoverable, FullMembershipReachesFourHops) {
  auto g = path_graph(6);
  auto m = mask_of(g, all_nodes(g));
  EXPECT_EQ(discoverable(g, m, true, 1, 0, 4), (Discovery{true, 4}));
  EXPECT_EQ(discoverable(g, m, false, 1, 0, 4), (Discovery{true, 4}));
  EXPECT_FALSE(discoverable(g, m, true, 1, 0, 5).found);
  EXPECT_EQ(discoverable(g, m, true, 2, 0, 5), (Discovery{true, 5}));
}

TEST(Discoverable, ErsatzNodesDoNotRelayEachOther) {
  // 0 - 1 - 2 - 3 with only 0 and 3 enrolled: the 1-2 edge is unknown.
  auto g = path_graph(4);
  auto m = mask_of(g, {0, 3});
  EXPECT_FALSE(discoverable(g, m, true, 1, 0, 3).found);
  auto m2 = mask_of(g, {0, 1, 3});
  EXPECT_EQ(discoverable(g, m2, true, 1, 0, 3), (Discovery{true, 3}));
  EXPECT_FALSE(discoverable(g, m2, false, 1, 0, 3).found);
}

TEST(Discoverable, MatchesFloydWarshallOnFullMembership) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = erdos_renyi(25, 0.1, rng);
    const std::size_t n = g.size();
    std::vector<std::vector<int>> d(n, std::vector<int>(n, 1 << 20));
    for (Node i = 0; i < n; ++i) {
      d[i][i] = 0;
      for (auto j : g.neighbors(i)) d[i][j] = 1;
    }
    for (Node k = 0; k < n; ++k)
      for (Node i = 0; i < n; ++i)
        for (Node j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    auto m = mask_of(g, all_nodes(g));
    for (Node a = 0; a < n; ++a)
      for (Node b = a + 1; b < n; ++b) {
        auto r = discoverable(g, m, trial % 2 == 0, 1, a, b);
        if (d[a][b] <= 4) {
          ASSERT_EQ(r, (Discovery{true, d[a][b]}));
        } else {
          ASSERT_FALSE(r.found);
        }
      }
  }
}

TEST(Invariants, LengthTwoCompletenessWithErsatz) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = trial % 2 ? preferential_attachment(60, 2, rng) : forest_fire(60, 0.35, rng);
    auto members = sample_members(g, 0.2 + 0.2 * (trial % 4), rng);
    auto m = mask_of(g, members);
    for (auto [a, b] : pairs_at_distance(g, members, 2)) ASSERT_EQ(discoverable(g, m, true, 1, a, b), (Discovery{true, 2}));
  }
}

TEST(Invariants, MonotoneInMembershipAndErsatzDominates) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = erdos_renyi(40, 0.08, rng);
    auto order = all_nodes(g);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Node> small(order.begin(), order.begin() + 12);
    std::vector<Node> large(order.begin(), order.begin() + 24);
    auto ms = mask_of(g, small);
    auto ml = mask_of(g, large);
    for (std::size_t i = 0; i < small.size(); ++i)
      for (std::size_t j = i + 1; j < small.size(); ++j) {
        const Node a = small[i], b = small[j];
        for (bool e : {true, false}) {
          auto rs = discoverable(g, ms, e, 1, a, b);
          auto rl = discoverable(g, ml, e, 1, a, b);
          if (rs.found) {
            ASSERT_TRUE(rl.found);
            ASSERT_LE(rl.dist, rs.dist);
          }
        }
        auto off = discoverable(g, ms, false, 1, a, b);
        auto on = discoverable(g, ms, true, 1, a, b);
        if (off.found) {
          ASSERT_TRUE(on.found);
          ASSERT_LE(on.dist, off.dist);
        }
        auto truth = bfs_distances(g, a)[b];
        if (on.found) {
          ASSERT_GE(on.dist, truth);
        }
      }
  }
}

TEST(Coverage, ErsatzLengthTwoIsExact) {
  Rng rng(3);
  auto g = forest_fire(150, 0.35, rng);
  SimConfig cfg;
  cfg.pairs_per_cell = 200;
  cfg.repetitions = 4;
  auto rep = run_coverage(g, cfg);
  for (double f : cfg.fractions) {
    auto* c = rep.find(f, 2, true);
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->mean, 1.0);
    EXPECT_EQ(c->stddev, 0.0);
  }
  for (const auto& c : rep.cells) {
    EXPECT_GE(c.mean, 0.0);
    EXPECT_LE(c.mean, 1.0);
    if (!c.ersatz) {
      EXPECT_LE(c.mean, rep.find(c.fraction, c.length, true)->mean);
    }
  }
}

TEST(Coverage, FullEnrollmentFindsEverything) {
  Rng rng(4);
  auto g = erdos_renyi(80, 0.05, rng);
  SimConfig cfg;
  cfg.fractions = {1.0};
  cfg.repetitions = 2;
  cfg.pairs_per_cell = 300;
  auto rep = run_coverage(g, cfg);
  for (const auto& c : rep.cells) EXPECT_EQ(c.mean, 1.0) << c.length << " " << c.ersatz;
  EXPECT_EQ(rep.cells.size(), 6u);
}

TEST(Coverage, SameSeedSameCsvAcrossThreadCounts) {
  Rng rng(9);
  auto g = preferential_attachment(120, 2, rng);
  SimConfig cfg;
  cfg.pairs_per_cell = 100;
  cfg.repetitions = 3;
  cfg.seed = 77;
  std::ostringstream a, b, c;
  run_coverage(g, cfg).write_csv(a);
  run_coverage(g, cfg).write_csv(b);
  cfg.threads = 4;
  run_coverage(g, cfg).write_csv(c);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str(), c.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "fraction,length,ersatz,mean_coverage,std,pairs_sampled,seed");
  cfg.seed = 78;
  std::ostringstream d;
  run_coverage(g, cfg).write_csv(d);
  EXPECT_NE(a.str(), d.str());
}

TEST(Coverage, PairsCappedAtAvailable) {
  auto g = path_graph(5);
  SimConfig cfg;
  cfg.fractions = {1.0};
  cfg.lengths = {4};
  cfg.repetitions = 1;
  auto rep = run_coverage(g, cfg);
  ASSERT_EQ(rep.cells.size(), 2u);
  EXPECT_EQ(rep.cells[0].pairs_sampled, 1u);
}

TEST(Coverage, SparseCellsAreSkippedWithWarning) {
  auto g = path_graph(3);
  SimConfig cfg;
  cfg.fractions = {1.0};
  cfg.lengths = {2, 3};
  cfg.repetitions = 1;
  auto rep = run_coverage(g, cfg);
  EXPECT_NE(rep.find(1.0, 2, true), nullptr);
  EXPECT_EQ(rep.find(1.0, 3, true), nullptr);
  ASSERT_EQ(rep.warnings.size(), 1u);
  EXPECT_NE(rep.warnings[0].find("length 3"), std::string::npos);
}

TEST(Coverage, RejectsBadConfig) {
  auto g = path_graph(4);
  SimConfig cfg;
  cfg.fractions = {0.0};
  EXPECT_THROW(run_coverage(g, cfg), Error);
  cfg.fractions = {0.5};
  cfg.lengths = {5};
  EXPECT_THROW(run_coverage(g, cfg), Error);
}

TEST(Equivalence, FullyEnrolledTenNodes) {
  Rng rng(21);
  auto g = erdos_renyi(10, 0.25, rng);
  auto rep = model_protocol_equivalence(g, all_nodes(g), 1, true);
  EXPECT_EQ(rep.pairs, 45u);
  EXPECT_EQ(rep.mismatches, 0u) << (rep.details.empty() ? "" : rep.details[0]);
}

TEST(Equivalence, HalfEnrolledBothModes) {
  Rng rng(22);
  for (int trial = 0; trial < 4; ++trial) {
    auto g = erdos_renyi(30, 0.1, rng);
    auto members = sample_members(g, 0.5, rng);
    for (bool e : {true, false}) {
      auto rep = model_protocol_equivalence(g, members, 1, e);
      EXPECT_EQ(rep.mismatches, 0u) << (rep.details.empty() ? "" : rep.details[0]);
    }
  }
}

TEST(Equivalence, LengthFiveNotFound) {
  auto g = path_graph(6);
  ProtocolWorld world(g, all_nodes(g), 1, true);
  auto [a, b] = world.discover(0, 5);
  EXPECT_FALSE(a.found);
  EXPECT_FALSE(b.found);
}

TEST(Generators, ShapesAndDeterminism) {
  Rng r1(1), r2(1);
  auto a = forest_fire(200, 0.35, r1);
  auto b = forest_fire(200, 0.35, r2);
  EXPECT_EQ(a.size(), 200u);
  EXPECT_EQ(a.edge_count(), b.edge_count());
  EXPECT_GE(a.edge_count(), 199u);
  auto pa = preferential_attachment(100, 3, r1);
  EXPECT_EQ(pa.size(), 100u);
  EXPECT_GE(pa.edge_count(), 3u * 96);
  auto er = erdos_renyi(200, 0.05, r1);
  const double expected = 0.05 * 200 * 199 / 2;
  EXPECT_NEAR(static_cast<double>(er.edge_count()), expected, 0.2 * expected);
  EXPECT_EQ(empty_graph(7).edge_count(), 0u);
}

TEST(Sampling, MemberFractionRounds) {
  Rng rng(2);
  auto g = empty_graph(50);
  EXPECT_EQ(sample_members(g, 0.2, rng).size(), 10u);
  EXPECT_EQ(sample_members(g, 1.0, rng).size(), 50u);
  EXPECT_EQ(sample_members(g, 0.01, rng).size(), 2u);
}

}  // namespace
}  // namespace socialpal::sim
