#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <queue>
#include <set>

#include "fsgt/probe_graph.hpp"
#include "support/temp_dir.hpp"

namespace fsgt {
namespace {

void expect_invariants(const ProbeGraph& g) {
  const auto n = g.n_nodes();
  ASSERT_EQ(g.offsets().size(), n + 1);
  std::uint64_t degree_sum = 0;
  for (NodeId i = 0; i < n; ++i) {
    EXPECT_EQ(g.degree(i), g.offsets()[i + 1] - g.offsets()[i]);
    degree_sum += g.degree(i);
    auto adj = g.neighbors_of(i);
    EXPECT_TRUE(std::is_sorted(adj.begin(), adj.end()));
    EXPECT_EQ(std::adjacent_find(adj.begin(), adj.end()), adj.end()) << "duplicate edge at " << i;
    for (NodeId j : adj) {
      EXPECT_NE(i, j) << "self-loop";
      auto back = g.neighbors_of(j);
      EXPECT_TRUE(std::binary_search(back.begin(), back.end(), i)) << "asymmetric edge " << i << "-" << j;
    }
  }
  EXPECT_EQ(degree_sum, 2 * g.n_edges());
  EXPECT_EQ(g.n_edges(), expected_ba_edges(g.key()));

  std::vector<char> seen(n, 0);
  std::queue<NodeId> q;
  q.push(0);
  seen[0] = 1;
  std::uint64_t reached = 1;
  while (!q.empty()) {
    const NodeId v = q.front();
    q.pop();
    for (NodeId w : g.neighbors_of(v)) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        q.push(w);
      }
    }
  }
  EXPECT_EQ(reached, n) << "graph not connected";
}

TEST(ProbeGraph, TriangleFromSeedClique) {
  const auto g = build_ba_graph({3, 2, 42});
  EXPECT_EQ(g.n_edges(), 3u);
  EXPECT_EQ(std::vector<std::uint32_t>(g.degrees().begin(), g.degrees().end()),
            (std::vector<std::uint32_t>{2, 2, 2}));
  expect_invariants(g);
}

TEST(ProbeGraph, EdgeCountFormula) {
  const auto g = build_ba_graph({10, 2, 42});
  EXPECT_EQ(g.n_edges(), 17u);
  const auto degrees = g.degrees();
  EXPECT_EQ(std::accumulate(degrees.begin(), degrees.end(), 0ULL), 34ULL);
  expect_invariants(g);
}

TEST(ProbeGraph, InvariantsAcrossKeys) {
  for (std::uint32_t m : {1u, 2u, 3u, 5u}) {
    for (std::uint64_t n : {std::uint64_t{m} + 1, std::uint64_t{50}, std::uint64_t{2000}}) {
      const auto g = build_ba_graph({n, m, 7});
      expect_invariants(g);
      for (NodeId v = m + 1; v < n; ++v) EXPECT_GE(g.degree(v), m);
    }
  }
}

TEST(ProbeGraph, BuildIsPureFunctionOfKey) {
  const auto a = build_ba_graph({5000, 2, 42});
  const auto b = build_ba_graph({5000, 2, 42});
  EXPECT_TRUE(a == b);
  EXPECT_EQ(encode_graph(a), encode_graph(b));
  const auto c = build_ba_graph({5000, 2, 43});
  EXPECT_FALSE(std::equal(a.neighbors().begin(), a.neighbors().end(), c.neighbors().begin()));
}

TEST(ProbeGraph, PreferentialAttachmentProducesHubs) {
  const auto g = build_ba_graph({20000, 2, 42});
  const auto degrees = g.degrees();
  const auto max_degree = *std::max_element(degrees.begin(), degrees.end());
  // A uniform-attachment graph would have max degree ~ log N; BA hubs grow like sqrt(N).
  EXPECT_GT(max_degree, 50u);
}

TEST(ProbeGraph, RejectsInvalidKeys) {
  EXPECT_THROW(build_ba_graph({2, 2, 42}), DomainError);
  EXPECT_THROW(build_ba_graph({10, 0, 42}), DomainError);
}

TEST(ProbeGraph, FromEdgesValidates) {
  const std::vector<std::pair<NodeId, NodeId>> ok{{0, 1}, {1, 2}};
  EXPECT_EQ(ProbeGraph::from_edges(3, ok).n_edges(), 2u);
  const std::vector<std::pair<NodeId, NodeId>> loop{{0, 0}, {0, 1}};
  EXPECT_THROW(ProbeGraph::from_edges(2, loop), DomainError);
  const std::vector<std::pair<NodeId, NodeId>> dup{{0, 1}, {1, 0}};
  EXPECT_THROW(ProbeGraph::from_edges(2, dup), DomainError);
  const std::vector<std::pair<NodeId, NodeId>> isolated{{0, 1}};
  EXPECT_THROW(ProbeGraph::from_edges(3, isolated), DomainError);
}

TEST(GraphCache, EmptyCacheBuildsAndWritesOneFile) {
  test::TempDir dir;
  bool rebuilt = false;
  const GraphKey key{1000, 2, 42};
  const auto g = get_or_build(key, dir.path(), &rebuilt);
  EXPECT_TRUE(rebuilt);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    ++files;
    EXPECT_EQ(e.path().filename(), "ba_N1000_m2_s42.tdug");
  }
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(std::filesystem::file_size(dir.path() / graph_cache_file_name(key)),
            4 + 4 + 8 + 4 + 8 + 8 + 8 * 1001 + 4 * 2 * g.n_edges());
}

TEST(GraphCache, SecondCallHitsCache) {
  test::TempDir dir;
  const GraphKey key{1000, 2, 42};
  const auto first = get_or_build(key, dir.path());
  bool rebuilt = true;
  const auto second = get_or_build(key, dir.path(), &rebuilt);
  EXPECT_FALSE(rebuilt);
  EXPECT_TRUE(first == second);
  EXPECT_TRUE(second == build_ba_graph(key));
}

TEST(GraphCache, TruncatedCacheIsRebuilt) {
  test::TempDir dir;
  const GraphKey key{1000, 2, 42};
  get_or_build(key, dir.path());
  const auto path = dir.path() / graph_cache_file_name(key);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
  bool rebuilt = false;
  const auto g = get_or_build(key, dir.path(), &rebuilt);
  EXPECT_TRUE(rebuilt);
  EXPECT_TRUE(g == build_ba_graph(key));
  EXPECT_FALSE(get_or_build(key, dir.path(), &rebuilt) == ProbeGraph{});
  EXPECT_FALSE(rebuilt);
}

TEST(GraphCache, MismatchedHeaderIsRebuilt) {
  test::TempDir dir;
  const GraphKey key{500, 2, 42};
  const GraphKey other{500, 2, 43};
  // Put the seed-43 graph under the seed-42 name.
  get_or_build(other, dir.path());
  std::filesystem::rename(dir.path() / graph_cache_file_name(other), dir.path() / graph_cache_file_name(key));
  bool rebuilt = false;
  const auto g = get_or_build(key, dir.path(), &rebuilt);
  EXPECT_TRUE(rebuilt);
  EXPECT_TRUE(g == build_ba_graph(key));
}

TEST(GraphCache, HeaderLayoutIsLittleEndian) {
  const auto bytes = encode_graph(build_ba_graph({3, 2, 42}));
  ASSERT_GE(bytes.size(), 36u);
  EXPECT_EQ(std::string(bytes.data(), 4), "TDUG");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[8], 3);  // N
  EXPECT_EQ(bytes[16], 2);  // m
  EXPECT_EQ(bytes[20], 42);  // seed
  EXPECT_EQ(bytes[28], 3);  // E
  EXPECT_EQ(bytes.size(), 36u + 8 * 4 + 4 * 6);
}

}  // namespace
}  // namespace fsgt
