#pragma once

// Barabasi-Albert redistribution graph in CSR form, with an on-disk cache.
//
// Construction: the seed graph is the complete graph on m0 = m + 1 nodes. Every later
// node v draws m distinct targets among nodes [0, v) with probability proportional to
// current degree, by sampling uniformly from a list in which each node id appears once
// per incident edge endpoint. Duplicate draws are rejected and redrawn. Endpoints of
// v's edges join the list only after all m targets are chosen. Adjacency lists are
// stored in ascending node order.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsgt/error.hpp"
#include "fsgt/rng.hpp"

namespace fsgt {

namespace fs = std::filesystem;

using NodeId = std::uint32_t;

struct GraphKey {
  std::uint64_t n_nodes = 0;
  std::uint32_t m = 2;
  std::uint64_t seed = 42;

  bool operator==(const GraphKey&) const = default;

  void validate() const {
    if (m < 1) throw DomainError("graph key: m must be >= 1");
    if (n_nodes < static_cast<std::uint64_t>(m) + 1)
      throw DomainError("graph key: n_nodes (" + std::to_string(n_nodes) + ") must be >= m+1 (" +
                        std::to_string(m + 1) + ")");
    if (n_nodes > 0xFFFFFFFFULL) throw DomainError("graph key: n_nodes must fit in 32 bits");
  }
};

class ProbeGraph {
 public:
  ProbeGraph() = default;

  // Builds from raw CSR arrays; neighbor lists are sorted and degrees derived.
  ProbeGraph(GraphKey key, std::vector<std::uint64_t> offsets, std::vector<NodeId> neighbors)
      : key_(key), offsets_(std::move(offsets)), neighbors_(std::move(neighbors)) {
    if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != neighbors_.size())
      throw FormatError("probe graph: inconsistent CSR offsets");
    const std::size_t n = offsets_.size() - 1;
    degrees_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (offsets_[i + 1] < offsets_[i]) throw FormatError("probe graph: offsets not monotone");
      degrees_[i] = static_cast<std::uint32_t>(offsets_[i + 1] - offsets_[i]);
      std::sort(neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    }
    for (NodeId v : neighbors_) {
      if (v >= n) throw FormatError("probe graph: neighbor id out of range");
    }
  }

  // Arbitrary simple undirected graph (test fixtures, small reference graphs). Every node
  // needs at least one neighbor so that redistribution conserves the signed sum.
  static ProbeGraph from_edges(std::uint64_t n_nodes, std::span<const std::pair<NodeId, NodeId>> edges) {
    std::vector<std::uint64_t> offsets(n_nodes + 1, 0);
    for (auto [a, b] : edges) {
      if (a >= n_nodes || b >= n_nodes) throw DomainError("edge endpoint out of range");
      if (a == b) throw DomainError("self-loop on node " + std::to_string(a));
      ++offsets[a + 1];
      ++offsets[b + 1];
    }
    for (std::uint64_t i = 0; i < n_nodes; ++i) offsets[i + 1] += offsets[i];
    std::vector<NodeId> neighbors(offsets.back());
    std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
    for (auto [a, b] : edges) {
      neighbors[cursor[a]++] = b;
      neighbors[cursor[b]++] = a;
    }
    ProbeGraph g(GraphKey{n_nodes, 0, 0}, std::move(offsets), std::move(neighbors));
    for (std::uint64_t i = 0; i < n_nodes; ++i) {
      auto adj = g.neighbors_of(static_cast<NodeId>(i));
      if (adj.empty()) throw DomainError("node " + std::to_string(i) + " has no neighbors");
      if (std::adjacent_find(adj.begin(), adj.end()) != adj.end())
        throw DomainError("duplicate edge at node " + std::to_string(i));
    }
    return g;
  }

  const GraphKey& key() const { return key_; }
  std::uint64_t n_nodes() const { return degrees_.size(); }
  std::uint64_t n_edges() const { return neighbors_.size() / 2; }
  std::span<const std::uint64_t> offsets() const { return offsets_; }
  std::span<const NodeId> neighbors() const { return neighbors_; }
  std::span<const std::uint32_t> degrees() const { return degrees_; }
  std::uint32_t degree(NodeId i) const { return degrees_[i]; }

  std::span<const NodeId> neighbors_of(NodeId i) const {
    return std::span<const NodeId>(neighbors_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }

  bool operator==(const ProbeGraph&) const = default;

 private:
  GraphKey key_;
  std::vector<std::uint64_t> offsets_;
  std::vector<NodeId> neighbors_;
  std::vector<std::uint32_t> degrees_;
};

inline std::uint64_t expected_ba_edges(const GraphKey& key) {
  const std::uint64_t m0 = key.m + 1ULL;
  return m0 * (m0 - 1) / 2 + static_cast<std::uint64_t>(key.m) * (key.n_nodes - m0);
}

inline ProbeGraph build_ba_graph(const GraphKey& key) {
  key.validate();
  const std::uint64_t n = key.n_nodes;
  const std::uint32_t m = key.m;
  const std::uint64_t m0 = m + 1ULL;
  const std::uint64_t n_edges = expected_ba_edges(key);

  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(n_edges);
  std::vector<NodeId> endpoints;
  endpoints.reserve(2 * n_edges);
  for (NodeId a = 0; a < m0; ++a) {
    for (NodeId b = a + 1; b < m0; ++b) {
      edges.emplace_back(a, b);
      endpoints.push_back(a);
      endpoints.push_back(b);
    }
  }

  Rng rng(key.seed);
  std::vector<NodeId> targets;
  targets.reserve(m);
  for (std::uint64_t v = m0; v < n; ++v) {
    targets.clear();
    while (targets.size() < m) {
      const NodeId t = endpoints[rng.uniform_below(endpoints.size())];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (NodeId t : targets) {
      edges.emplace_back(static_cast<NodeId>(v), t);
      endpoints.push_back(static_cast<NodeId>(v));
      endpoints.push_back(t);
    }
  }

  std::vector<std::uint64_t> offsets(n + 1, 0);
  for (auto [a, b] : edges) {
    ++offsets[a + 1];
    ++offsets[b + 1];
  }
  for (std::uint64_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<NodeId> neighbors(offsets.back());
  std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
  for (auto [a, b] : edges) {
    neighbors[cursor[a]++] = b;
    neighbors[cursor[b]++] = a;
  }
  return ProbeGraph(key, std::move(offsets), std::move(neighbors));
}

// ---------------------------------------------------------------------------
// Cache file: magic "TDUG", u32 version = 1, u64 N, u32 m, u64 seed, u64 E,
// (N+1) x u64 offsets, 2E x u32 neighbors; all little-endian.

inline constexpr std::uint32_t kGraphCacheVersion = 1;

inline std::string graph_cache_file_name(const GraphKey& key) {
  return "ba_N" + std::to_string(key.n_nodes) + "_m" + std::to_string(key.m) + "_s" +
         std::to_string(key.seed) + ".tdug";
}

namespace detail {

template <std::unsigned_integral U>
void put_le(std::vector<char>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
}

class LeReader {
 public:
  explicit LeReader(std::span<const char> bytes) : bytes_(bytes) {}

  template <std::unsigned_integral U>
  U get() {
    if (pos_ + sizeof(U) > bytes_.size()) throw FormatError("graph cache truncated");
    U value = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += sizeof(U);
    return value;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> encode_graph(const ProbeGraph& g) {
  std::vector<char> out;
  out.reserve(40 + 8 * g.offsets().size() + 4 * g.neighbors().size());
  for (char c : {'T', 'D', 'U', 'G'}) out.push_back(c);
  detail::put_le<std::uint32_t>(out, kGraphCacheVersion);
  detail::put_le<std::uint64_t>(out, g.key().n_nodes);
  detail::put_le<std::uint32_t>(out, g.key().m);
  detail::put_le<std::uint64_t>(out, g.key().seed);
  detail::put_le<std::uint64_t>(out, g.n_edges());
  for (auto o : g.offsets()) detail::put_le<std::uint64_t>(out, o);
  for (auto v : g.neighbors()) detail::put_le<std::uint32_t>(out, v);
  return out;
}

// Parses a cache file image and checks it against `expected`.
inline ProbeGraph decode_graph(std::span<const char> bytes, const GraphKey& expected) {
  if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != "TDUG")
    throw FormatError("graph cache: bad magic");
  detail::LeReader in(bytes.subspan(4));
  if (in.get<std::uint32_t>() != kGraphCacheVersion) throw FormatError("graph cache: unsupported version");
  GraphKey key;
  key.n_nodes = in.get<std::uint64_t>();
  key.m = in.get<std::uint32_t>();
  key.seed = in.get<std::uint64_t>();
  if (!(key == expected)) throw ConfigError("graph cache: header does not match requested key");
  const auto n_edges = in.get<std::uint64_t>();
  if (n_edges != expected_ba_edges(key)) throw FormatError("graph cache: edge count inconsistent with key");
  if (in.remaining() != 8 * (key.n_nodes + 1) + 4 * 2 * n_edges)
    throw FormatError("graph cache: payload length mismatch");
  std::vector<std::uint64_t> offsets(key.n_nodes + 1);
  for (auto& o : offsets) o = in.get<std::uint64_t>();
  std::vector<NodeId> neighbors(2 * n_edges);
  for (auto& v : neighbors) v = in.get<std::uint32_t>();
  return ProbeGraph(key, std::move(offsets), std::move(neighbors));
}

// Loads the cached graph for `key` or builds and persists it. Mismatched or corrupt
// cache files are rebuilt with a warning on stderr. Writes go through a temporary
// file and an atomic rename.
inline ProbeGraph get_or_build(const GraphKey& key, const fs::path& cache_dir, bool* rebuilt = nullptr) {
  key.validate();
  const fs::path path = cache_dir / graph_cache_file_name(key);
  if (rebuilt) *rebuilt = false;
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      return decode_graph(bytes, key);
    } catch (const Error& e) {
      std::cerr << "warning: rebuilding graph cache " << path.string() << ": " << e.what() << "\n";
    }
  }
  ProbeGraph g = build_ba_graph(key);
  if (rebuilt) *rebuilt = true;
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  if (ec) throw IoError("cannot create cache dir " + cache_dir.string() + ": " + ec.message());
  const auto bytes = encode_graph(g);
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(splitmix64(reinterpret_cast<std::uintptr_t>(&g)) & 0xFFFFFF);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write graph cache " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("graph cache write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename graph cache into place: " + ec.message());
  return g;
}

}  // namespace fsgt
