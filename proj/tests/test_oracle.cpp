#include <gtest/gtest.h>

#include <random>

#include "support/reference.hpp"

namespace fsgt::reference {
namespace {

TEST(ReferenceQuantile, HandCases) {
  EXPECT_DOUBLE_EQ(reference_quantile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.9), 9.1);
  EXPECT_EQ(reference_quantile({7}, 0.9), 7.0);
  EXPECT_EQ(reference_quantile({3, 3, 3, 3}, 0.9), 3.0);
  EXPECT_EQ(reference_quantile({-4, 1}, 1.0), 4.0);
  EXPECT_THROW(reference_quantile({}, 0.5), std::invalid_argument);
}

TEST(ReferenceGraph, RoundTripThroughCsrIsLossless) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_connected_graph(60, 80, seed);
    const auto back = from_probe_graph(g.to_probe_graph());
    auto a = g.edges;
    for (auto& [x, y] : a) {
      if (x > y) std::swap(x, y);
    }
    std::sort(a.begin(), a.end());
    auto b = back.edges;
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    EXPECT_EQ(back.n_nodes, g.n_nodes);
  }
}

TEST(ReferenceCascade, TriangleHandTrace) {
  const auto g = from_probe_graph(build_ba_graph({3, 2, 42}));
  const auto r = reference_cascade({10, 0, 0}, g, CascadeConfig{});
  EXPECT_DOUBLE_EQ(r.tau, 8.0);
  EXPECT_EQ(r.active_sequence, (std::vector<std::vector<NodeId>>{{0}}));
  EXPECT_EQ(r.final_field, (std::vector<double>{7.0, 1.5, 1.5}));
}

TEST(ReferenceCascade, EmptyActiveSet) {
  const auto g = from_probe_graph(build_ba_graph({3, 2, 42}));
  const auto r = reference_cascade({1, 1, 1}, g, CascadeConfig{});
  EXPECT_EQ(r.s_max, 0u);
  EXPECT_EQ(r.n_steps, 0u);
  EXPECT_TRUE(r.zero_cascade);
}

TEST(ReferenceCascade, AgreesWithEngineOnHundredBaInstances) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t n = 3 + gen() % 254;
    const auto pg = build_ba_graph({n, 2, gen()});
    std::vector<double> u(n);
    for (auto& x : u) x = nd(gen);
    const auto ref = reference_cascade(u, from_probe_graph(pg), CascadeConfig{});
    std::vector<std::vector<NodeId>> seq;
    const auto res = relax_with_threshold(u, pg, ref.tau, CascadeConfig{},
                                          [&](std::uint32_t, std::span<const NodeId> a) { seq.emplace_back(a.begin(), a.end()); });
    EXPECT_EQ(seq, ref.active_sequence);
    EXPECT_EQ(res.s_max, ref.s_max);
    EXPECT_EQ(res.n_steps, ref.n_steps);
  }
}

TEST(ReferenceCascade, Limits) {
  ReferenceGraph big{5000, {}};
  EXPECT_THROW(reference_cascade(std::vector<double>(5000, 0.0), big, CascadeConfig{}), std::invalid_argument);
  EXPECT_THROW(reference_cascade({1, 2}, ReferenceGraph{3, {}}, CascadeConfig{}), std::invalid_argument);
}

}  // namespace
}  // namespace fsgt::reference
