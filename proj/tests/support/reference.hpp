#pragma once

// Brute-force reference implementations used as independent oracles in tests.
// Nothing here shares code with the engine beyond the data types it returns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fsgt/cascade.hpp"
#include "fsgt/probe_graph.hpp"

namespace fsgt::reference {

struct ReferenceGraph {
  std::uint64_t n_nodes = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;

  ProbeGraph to_probe_graph() const { return ProbeGraph::from_edges(n_nodes, edges); }
};

// Full sort, type-7 interpolation.
inline double reference_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("reference_quantile: empty input");
  for (auto& v : values) v = std::fabs(v);
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= values.size() || frac == 0.0) return values[lo];
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

struct ReferenceResult {
  double tau = 0.0;
  std::uint64_t s_max = 0;
  std::uint32_t n_steps = 0;
  bool ceiling_limited = false;
  bool zero_cascade = false;
  std::vector<std::vector<NodeId>> active_sequence;
  std::vector<double> step_sums;  // sum of u before step 0 and after every step
  std::vector<double> final_field;
};

// Literal transcription of the relaxation rule: dense active-set scans and, per node,
// an ascending loop over all potential sources with an adjacency-matrix test.
inline ReferenceResult reference_cascade(std::vector<double> u, const ReferenceGraph& graph,
                                         const CascadeConfig& config, std::optional<double> tau_override = {}) {
  const std::size_t n = u.size();
  if (n != graph.n_nodes) throw std::invalid_argument("reference_cascade: size mismatch");
  if (n > 4096) throw std::invalid_argument("reference_cascade: N too large");
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  std::vector<std::uint32_t> degree(n, 0);
  for (auto [a, b] : graph.edges) {
    adj[a][b] = adj[b][a] = 1;
    ++degree[a];
    ++degree[b];
  }

  ReferenceResult res;
  res.tau = tau_override ? *tau_override : reference_quantile(u, config.q_threshold);
  auto sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  res.step_sums.push_back(sum(u));
  for (;;) {
    std::vector<NodeId> active;
    std::vector<char> is_active(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::fabs(u[i]) > res.tau) {
        active.push_back(static_cast<NodeId>(i));
        is_active[i] = 1;
      }
    }
    if (active.empty()) break;
    if (res.n_steps == config.max_steps) {
      res.ceiling_limited = true;
      break;
    }
    res.active_sequence.push_back(active);
    res.s_max += active.size();

    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      double value = is_active[i] ? u[i] + (-(config.alpha * u[i])) : u[i];
      double incoming = 0.0;
      bool received = false;
      for (std::size_t r = 0; r < n; ++r) {
        if (is_active[r] && adj[r][i]) {
          incoming += (config.alpha * u[r]) / static_cast<double>(degree[r]);
          received = true;
        }
      }
      next[i] = received ? value + incoming : value;
    }
    u = std::move(next);
    ++res.n_steps;
    res.step_sums.push_back(sum(u));
  }
  res.zero_cascade = res.s_max == 0;
  res.final_field = u;
  return res;
}

// Random connected simple graph: a random spanning tree plus `extra` random edges.
inline ReferenceGraph random_connected_graph(std::uint64_t n, std::uint64_t extra, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  ReferenceGraph g{n, {}};
  std::vector<std::vector<char>> used(n, std::vector<char>(n, 0));
  for (std::uint64_t v = 1; v < n; ++v) {
    const auto parent = static_cast<NodeId>(gen() % v);
    g.edges.emplace_back(static_cast<NodeId>(v), parent);
    used[v][parent] = used[parent][v] = 1;
  }
  for (std::uint64_t k = 0; k < extra; ++k) {
    const auto a = static_cast<NodeId>(gen() % n);
    const auto b = static_cast<NodeId>(gen() % n);
    if (a == b || used[a][b]) continue;
    used[a][b] = used[b][a] = 1;
    g.edges.emplace_back(a, b);
  }
  return g;
}

inline ReferenceGraph from_probe_graph(const ProbeGraph& pg) {
  ReferenceGraph g{pg.n_nodes(), {}};
  for (NodeId i = 0; i < pg.n_nodes(); ++i) {
    for (NodeId j : pg.neighbors_of(i)) {
      if (i < j) g.edges.emplace_back(i, j);
    }
  }
  return g;
}

}  // namespace fsgt::reference
