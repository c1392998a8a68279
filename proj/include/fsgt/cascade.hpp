#pragma once

// Thresholded cascade relaxation of a frozen signed field on a probe graph.
//
// The threshold tau is the q-quantile of the initial field magnitudes and stays fixed.
// Each step, every node with |u_i| > tau is active; all active nodes relax together
// from the previous state:
//
//   u_i' = (u_i + (-(alpha * u_i)) if i active else u_i) + sum_{active r ~ i} (alpha * u_r) / k_r
//
// with the incoming sum accumulated in ascending r, in double precision. The loop ends
// when the active set empties or after max_steps executed steps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsgt/error.hpp"
#include "fsgt/probe_graph.hpp"
#include "fsgt/rng.hpp"
#include "fsgt/snapshot_store.hpp"

namespace fsgt {

struct CascadeConfig {
  double alpha = 0.3;
  double q_threshold = 0.90;
  std::uint32_t max_steps = 500;
  bool record_trace = false;
  std::size_t subsample_cap = kDefaultSubsampleCap;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("cascade: alpha must lie in (0, 1)");
    if (!(q_threshold > 0.0 && q_threshold < 1.0))
      throw ConfigError("cascade: q_threshold must lie in (0, 1)");
    if (max_steps < 1) throw ConfigError("cascade: max_steps must be >= 1");
    if (subsample_cap < 1) throw ConfigError("cascade: subsample_cap must be >= 1");
  }
};

struct CascadeResult {
  double tau = 0.0;
  std::uint64_t s_max = 0;
  std::uint32_t n_steps = 0;
  bool ceiling_limited = false;
  bool zero_cascade = false;
  // |A_l| per executed step, and the signed-sum change of each step; only with record_trace.
  std::optional<std::vector<std::uint64_t>> activity_trace;
  std::optional<std::vector<double>> sum_drift_trace;
  std::optional<double> v_abs;
  std::optional<double> v_rel;
  // Largest |sum(u') - sum(u)| over all steps, and sum |u^(0)| for scale.
  double max_sum_drift = 0.0;
  double initial_abs_sum = 0.0;
};

// Called once per executed step with the step index and its (sorted) active set.
using ActiveSetObserver = std::function<void(std::uint32_t step, std::span<const NodeId> active)>;

inline std::vector<NodeId> compute_active_set(std::span<const double> field, double tau) {
  if (!(tau >= 0.0)) throw DomainError("compute_active_set: tau must be >= 0");
  std::vector<NodeId> active;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (std::abs(field[i]) > tau) active.push_back(static_cast<NodeId>(i));
  }
  return active;
}

// One synchronous relaxation step over the full field. `active` must be sorted ascending.
inline std::vector<double> relax_step(std::span<const double> field, std::span<const NodeId> active,
                                      const ProbeGraph& graph, double alpha) {
  if (field.size() != graph.n_nodes())
    throw DomainError("relax_step: field length " + std::to_string(field.size()) +
                      " != graph size " + std::to_string(graph.n_nodes()));
  std::vector<double> next(field.begin(), field.end());
  std::vector<double> incoming(field.size(), 0.0);
  std::vector<char> received(field.size(), 0);
  for (NodeId r : active) {
    const double share = (alpha * field[r]) / static_cast<double>(graph.degree(r));
    for (NodeId i : graph.neighbors_of(r)) {
      incoming[i] += share;
      received[i] = 1;
    }
  }
  for (NodeId r : active) next[r] = field[r] + (-(alpha * field[r]));
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (received[i]) next[i] = next[i] + incoming[i];
  }
  return next;
}

// Seed for the subsampled threshold quantile; real and null snapshots of one checkpoint
// get distinct, reproducible subsamples.
inline std::uint64_t threshold_seed(std::int64_t step, FieldKind kind) {
  return mix_seed(static_cast<std::uint64_t>(step), 0x7A00 + static_cast<std::uint64_t>(kind));
}

namespace detail {

inline void fill_velocities(CascadeResult& result, std::uint64_t n_nodes) {
  if (result.n_steps > 0) {
    result.v_abs = static_cast<double>(result.s_max) / static_cast<double>(result.n_steps);
    result.v_rel = static_cast<double>(result.s_max) /
                   (static_cast<double>(n_nodes) * static_cast<double>(result.n_steps));
  }
}

}  // namespace detail

// Relaxes `field` at a given threshold. Only nodes that are active or adjacent to an
// active node can change in a step, so work per step is proportional to the active
// neighbourhood; the result is bit-identical to iterating relax_step.
template <std::floating_point T>
CascadeResult relax_with_threshold(std::span<const T> field, const ProbeGraph& graph, double tau,
                                   const CascadeConfig& config,
                                   const ActiveSetObserver& observer = {}) {
  config.validate();
  const std::size_t n = field.size();
  if (n != graph.n_nodes())
    throw DomainError("cascade: field length " + std::to_string(n) + " != graph size " +
                      std::to_string(graph.n_nodes()));

  CascadeResult result;
  result.tau = tau;
  if (config.record_trace) {
    result.activity_trace.emplace();
    result.sum_drift_trace.emplace();
  }

  std::vector<double> u(field.begin(), field.end());
  for (double v : u) result.initial_abs_sum += std::abs(v);
  std::vector<NodeId> active = compute_active_set(u, tau);

  std::vector<double> incoming(n, 0.0);
  std::vector<char> touched_flag(n, 0);
  std::vector<NodeId> touched;
  std::vector<double> before;
  const double alpha = config.alpha;

  while (!active.empty()) {
    if (result.n_steps == config.max_steps) {
      result.ceiling_limited = true;
      break;
    }
    if (observer) observer(result.n_steps, active);
    result.s_max += active.size();
    if (result.activity_trace) result.activity_trace->push_back(active.size());

    touched.clear();
    for (NodeId r : active) {
      if (!touched_flag[r]) {
        touched_flag[r] = 1;
        touched.push_back(r);
      }
    }
    for (NodeId r : active) {
      const double share = (alpha * u[r]) / static_cast<double>(graph.degree(r));
      for (NodeId i : graph.neighbors_of(r)) {
        if (!touched_flag[i]) {
          touched_flag[i] = 1;
          touched.push_back(i);
        }
        incoming[i] += share;
      }
    }

    before.resize(touched.size());
    for (std::size_t k = 0; k < touched.size(); ++k) before[k] = u[touched[k]];
    for (NodeId r : active) u[r] = u[r] + (-(alpha * u[r]));
    // A node adjacent to an active node always received a share; touched active nodes
    // without active neighbours carry incoming == 0 and are left as decayed.
    for (NodeId r : active) {
      for (NodeId i : graph.neighbors_of(r)) {
        if (touched_flag[i] == 1) {
          u[i] = u[i] + incoming[i];
          touched_flag[i] = 2;
        }
      }
    }

    double drift = 0.0;
    for (std::size_t k = 0; k < touched.size(); ++k) {
      const NodeId i = touched[k];
      if (!std::isfinite(u[i]))
        throw DataError("cascade: non-finite value at node " + std::to_string(i) + " after step " +
                        std::to_string(result.n_steps));
      drift += u[i] - before[k];
      incoming[i] = 0.0;
      touched_flag[i] = 0;
    }
    result.max_sum_drift = std::max(result.max_sum_drift, std::abs(drift));
    if (result.sum_drift_trace) result.sum_drift_trace->push_back(drift);
    ++result.n_steps;

    // Untouched nodes keep their value, so only touched nodes can change activity.
    std::sort(touched.begin(), touched.end());
    active.clear();
    for (NodeId i : touched) {
      if (std::abs(u[i]) > tau) active.push_back(i);
    }
  }

  result.zero_cascade = (result.s_max == 0);
  detail::fill_velocities(result, n);
  return result;
}

template <std::floating_point T>
CascadeResult relax_with_threshold(const std::vector<T>& field, const ProbeGraph& graph, double tau,
                                   const CascadeConfig& config,
                                   const ActiveSetObserver& observer = {}) {
  return relax_with_threshold(std::span<const T>(field), graph, tau, config, observer);
}

// Full probe of one snapshot: threshold from its own magnitude quantile, then relax.
// The snapshot itself is never modified.
inline CascadeResult run_cascade(const FieldSnapshot& snapshot, const ProbeGraph& graph,
                                 const CascadeConfig& config, const ActiveSetObserver& observer = {}) {
  config.validate();
  if (snapshot.values.size() != graph.n_nodes())
    throw DataError("cascade: snapshot has " + std::to_string(snapshot.values.size()) +
                    " elements but graph has " + std::to_string(graph.n_nodes()) + " nodes");
  const double tau =
      field_quantile(std::span<const float>(snapshot.values), config.q_threshold, config.subsample_cap,
                     threshold_seed(snapshot.manifest.step, snapshot.manifest.field_kind));
  return relax_with_threshold(std::span<const float>(snapshot.values), graph, tau, config, observer);
}

}  // namespace fsgt
