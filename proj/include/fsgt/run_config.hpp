#pragma once

// Run configuration: a JSON document with one section per stage. Relative paths are
// resolved against the directory that holds the config file.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fsgt/bridge.hpp"
#include "fsgt/cascade.hpp"
#include "fsgt/error.hpp"
#include "fsgt/null_suite.hpp"
#include "fsgt/scaling.hpp"
#include "fsgt/sha256.hpp"
#include "json.hpp"

namespace fsgt {

namespace fs = std::filesystem;

enum class SynthDistribution { gaussian, lognormal };

struct SynthConfig {
  std::vector<std::uint64_t> scales;
  std::vector<std::int64_t> steps;
  std::uint64_t seed = 7;
  SynthDistribution distribution = SynthDistribution::gaussian;
  double lognormal_sigma = 1.0;
  std::string model_prefix = "synth";
};

enum class MetricTransform { log, identity };

struct MetricTableConfig {
  fs::path path;
  MetricKind kind = MetricKind::perplexity;
  MetricTransform transform = MetricTransform::log;
};

struct BridgeConfig {
  std::optional<LrSchedule> schedule;
  std::vector<MetricTableConfig> metrics;
  std::vector<std::string> evaluation_line;
  double floor = 1e-6;
};

struct RunConfig {
  std::string family = "default";
  fs::path snapshot_root = "snapshots";
  fs::path cache_dir = "cache";
  fs::path out_dir = "out";
  CascadeConfig probe;
  std::uint32_t graph_m = 2;
  std::uint64_t graph_seed = 42;
  std::vector<NullVariant> variants{NullVariant::real};  // "real" always first
  std::uint64_t null_base_seed = kDefaultNullBaseSeed;
  std::optional<StepWindow> window;
  bool require_all_scales = false;
  std::vector<std::uint64_t> scales;
  SynthConfig synth;
  BridgeConfig bridge;
  unsigned jobs = 1;

  // Hash of every setting that changes probe records.
  std::string probe_hash() const {
    nlohmann::json j;
    j["family"] = family;
    j["probe"] = {{"alpha", probe.alpha},
                  {"q_threshold", probe.q_threshold},
                  {"max_steps", probe.max_steps},
                  {"subsample_cap", probe.subsample_cap}};
    j["graph"] = {{"m", graph_m}, {"seed", graph_seed}};
    j["nulls"] = {{"base_seed", null_base_seed}};
    return sha256_hex(j.dump());
  }

  // Hash of every setting that changes fit and summary outputs.
  std::string fit_hash() const {
    nlohmann::json j;
    j["probe_hash"] = probe_hash();
    j["window"] = window ? nlohmann::json{window->lo, window->hi} : nlohmann::json(nullptr);
    j["require_all_scales"] = require_all_scales;
    j["scales"] = scales;
    std::vector<std::string> vs;
    for (auto v : variants) vs.emplace_back(to_string(v));
    j["variants"] = vs;
    return sha256_hex(j.dump());
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : base / p;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"family", "snapshot_root", "cache_dir", "out_dir", "probe", "graph", "nulls",
                                 "window", "require_all_scales", "scales", "synth", "bridge", "jobs"},
                                "config");
    detail::read_opt(j, "family", c.family);
    std::string root = c.snapshot_root.string(), cache = c.cache_dir.string(), out = c.out_dir.string();
    detail::read_opt(j, "snapshot_root", root);
    detail::read_opt(j, "cache_dir", cache);
    detail::read_opt(j, "out_dir", out);
    c.snapshot_root = detail::resolve(base_dir, root);
    c.cache_dir = detail::resolve(base_dir, cache);
    c.out_dir = detail::resolve(base_dir, out);

    if (j.contains("probe")) {
      const auto& p = j.at("probe");
      detail::reject_unknown_keys(p, {"alpha", "q_threshold", "max_steps", "subsample_cap"}, "probe");
      detail::read_opt(p, "alpha", c.probe.alpha);
      detail::read_opt(p, "q_threshold", c.probe.q_threshold);
      detail::read_opt(p, "max_steps", c.probe.max_steps);
      detail::read_opt(p, "subsample_cap", c.probe.subsample_cap);
    }
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      detail::reject_unknown_keys(g, {"m", "seed"}, "graph");
      detail::read_opt(g, "m", c.graph_m);
      detail::read_opt(g, "seed", c.graph_seed);
    }
    if (j.contains("nulls")) {
      const auto& n = j.at("nulls");
      detail::reject_unknown_keys(n, {"variants", "base_seed"}, "nulls");
      detail::read_opt(n, "base_seed", c.null_base_seed);
      if (n.contains("variants")) {
        std::set<NullVariant> seen{NullVariant::real};
        for (const auto& v : n.at("variants")) {
          const auto variant = null_variant_from_string(v.get<std::string>());
          if (seen.insert(variant).second) c.variants.push_back(variant);
        }
      }
    }
    if (j.contains("window") && !j.at("window").is_null()) {
      const auto& w = j.at("window");
      if (!w.is_array() || w.size() != 2) throw ConfigError("window must be [lo, hi]");
      c.window = StepWindow{w[0].get<std::int64_t>(), w[1].get<std::int64_t>()};
      if (!(c.window->lo < c.window->hi)) throw ConfigError("window requires lo < hi");
    }
    detail::read_opt(j, "require_all_scales", c.require_all_scales);
    detail::read_opt(j, "scales", c.scales);
    for (std::size_t i = 1; i < c.scales.size(); ++i) {
      if (c.scales[i] <= c.scales[i - 1]) throw ConfigError("scales must be strictly ascending");
    }
    if (!c.scales.empty() && c.scales.size() < 3) throw ConfigError("scales needs at least three entries");

    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      detail::reject_unknown_keys(s, {"scales", "steps", "seed", "distribution", "lognormal_sigma", "model_prefix"},
                                  "synth");
      detail::read_opt(s, "scales", c.synth.scales);
      detail::read_opt(s, "steps", c.synth.steps);
      detail::read_opt(s, "seed", c.synth.seed);
      detail::read_opt(s, "lognormal_sigma", c.synth.lognormal_sigma);
      detail::read_opt(s, "model_prefix", c.synth.model_prefix);
      if (s.contains("distribution")) {
        const auto d = s.at("distribution").get<std::string>();
        if (d == "gaussian") {
          c.synth.distribution = SynthDistribution::gaussian;
        } else if (d == "lognormal") {
          c.synth.distribution = SynthDistribution::lognormal;
        } else {
          throw ConfigError("synth.distribution must be gaussian or lognormal");
        }
      }
      if (c.synth.scales.empty()) c.synth.scales = c.scales;
    }
    if (j.contains("bridge")) {
      const auto& b = j.at("bridge");
      detail::reject_unknown_keys(b, {"schedule", "metrics", "evaluation_line", "floor"}, "bridge");
      detail::read_opt(b, "evaluation_line", c.bridge.evaluation_line);
      detail::read_opt(b, "floor", c.bridge.floor);
      if (!(c.bridge.floor > 0.0)) throw ConfigError("bridge.floor must be > 0");
      if (b.contains("schedule") && !b.at("schedule").is_null()) {
        const auto& s = b.at("schedule");
        detail::reject_unknown_keys(s, {"kind", "eta_max", "eta_min", "t_warm", "t_total"}, "bridge.schedule");
        LrSchedule sched;
        sched.kind = schedule_kind_from_string(s.at("kind").get<std::string>());
        sched.eta_max = s.at("eta_max").get<double>();
        detail::read_opt(s, "eta_min", sched.eta_min);
        sched.t_warm = s.at("t_warm").get<std::int64_t>();
        sched.t_total = s.at("t_total").get<std::int64_t>();
        sched.validate();
        c.bridge.schedule = sched;
      }
      if (b.contains("metrics")) {
        for (const auto& m : b.at("metrics")) {
          detail::reject_unknown_keys(m, {"path", "kind", "transform"}, "bridge.metrics[]");
          MetricTableConfig mt;
          mt.path = detail::resolve(base_dir, m.at("path").get<std::string>());
          mt.kind = metric_kind_from_string(m.at("kind").get<std::string>());
          mt.transform = mt.kind == MetricKind::perplexity ? MetricTransform::log : MetricTransform::identity;
          if (m.contains("transform")) {
            const auto t = m.at("transform").get<std::string>();
            if (t == "log") {
              mt.transform = MetricTransform::log;
            } else if (t == "identity") {
              mt.transform = MetricTransform::identity;
            } else {
              throw ConfigError("metric transform must be log or identity");
            }
          }
          c.bridge.metrics.push_back(mt);
        }
      }
    }
    detail::read_opt(j, "jobs", c.jobs);
    if (c.jobs == 0) c.jobs = 1;
    if (c.graph_m < 1) throw ConfigError("graph.m must be >= 1");
    c.probe.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (const char* env = std::getenv("FSGT_CACHE"); env != nullptr && *env != '\0') c.cache_dir = env;
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

}  // namespace fsgt
