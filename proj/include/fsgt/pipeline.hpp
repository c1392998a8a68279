#pragma once

// Batch stages: synth -> probe -> fit -> bridge, plus audit.
//
// Output tree under RunConfig::out_dir:
//   temporal/<family>__<model_id>__<variant>.json   per-step transport records
//   probe_journal.json                              per-snapshot warnings and errors
//   fits.json                                       per-step fits and skipped steps
//   summary.json                                    figure-level summary blocks
//   bridge.json                                     transport/performance correlations

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "fsgt/bridge.hpp"
#include "fsgt/cascade.hpp"
#include "fsgt/error.hpp"
#include "fsgt/json_codec.hpp"
#include "fsgt/null_suite.hpp"
#include "fsgt/probe_graph.hpp"
#include "fsgt/run_config.hpp"
#include "fsgt/scaling.hpp"
#include "fsgt/snapshot_store.hpp"

namespace fsgt {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNoFit = 4 };

struct CommandOptions {
  bool force = false;
};

class OutputExistsError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

namespace detail {

inline void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("unparsable JSON " + path.string() + ": " + e.what());
  }
}

// Runs task(i) for i in [0, n) on `jobs` threads. Results must go to per-index slots.
template <typename Task>
void parallel_for(std::size_t n, unsigned jobs, Task&& task) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < std::min<std::size_t>(jobs, n); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

inline std::string synth_model_id(const RunConfig& c, std::uint64_t n) {
  return c.synth.model_prefix + "-N" + std::to_string(n);
}

inline FieldSnapshot synth_snapshot(const RunConfig& c, std::uint64_t n, std::int64_t step) {
  FieldSnapshot s;
  s.manifest.family = c.family;
  s.manifest.model_id = synth_model_id(c, n);
  s.manifest.field_kind = FieldKind::synthetic;
  s.manifest.step = step;
  s.manifest.n_elements = n;
  const std::uint64_t seed = mix_seed(c.synth.seed, mix_seed(n, static_cast<std::uint64_t>(step)));
  s.manifest.seed = seed;
  s.values = gaussian_field(n, 0.0, 1.0, seed);
  if (c.synth.distribution == SynthDistribution::lognormal) {
    for (auto& v : s.values) v = static_cast<float>(std::exp(c.synth.lognormal_sigma * static_cast<double>(v)));
    s.manifest.source = "synthetic lognormal sigma=" + nlohmann::json(c.synth.lognormal_sigma).dump();
  } else {
    s.manifest.source = "synthetic gaussian";
  }
  return s;
}

inline int cmd_synth(const RunConfig& c, const CommandOptions& opts = {}) {
  if (c.synth.scales.empty() || c.synth.steps.empty())
    throw ConfigError("synth needs non-empty synth.scales (or scales) and synth.steps");
  std::vector<std::pair<std::uint64_t, std::int64_t>> jobs;
  for (auto n : c.synth.scales) {
    for (auto t : c.synth.steps) {
      if (t < 0) throw ConfigError("synth steps must be >= 0");
      jobs.emplace_back(n, t);
    }
  }
  if (!opts.force) {
    for (auto [n, t] : jobs) {
      SnapshotManifest m;
      m.model_id = synth_model_id(c, n);
      m.field_kind = FieldKind::synthetic;
      m.step = t;
      const auto p = c.snapshot_root / m.model_id / (default_snapshot_name(m) + ".json");
      if (fs::exists(p)) throw OutputExistsError(p.string() + " exists (use --force to overwrite)");
    }
  }
  detail::parallel_for(jobs.size(), c.jobs, [&](std::size_t i) {
    auto [n, t] = jobs[i];
    const auto s = synth_snapshot(c, n, t);
    write_snapshot(s, c.snapshot_root / s.manifest.model_id);
  });
  std::cerr << "synth: wrote " << jobs.size() << " snapshots under " << c.snapshot_root.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// probe

struct JournalEntry {
  std::string level;  // "warning" | "error"
  std::string model_id;
  std::int64_t step = -1;
  std::string variant;
  std::string message;

  auto key() const { return std::tie(model_id, step, variant, level, message); }
};

inline nlohmann::json to_json(const JournalEntry& e) {
  return {{"level", e.level}, {"model_id", e.model_id}, {"step", e.step}, {"variant", e.variant},
          {"message", e.message}};
}

inline nlohmann::json journal_json(std::vector<JournalEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back(to_json(e));
  return arr;
}

inline fs::path temporal_dir(const RunConfig& c) { return c.out_dir / "temporal"; }

inline fs::path temporal_path(const RunConfig& c, const std::string& model_id, NullVariant v) {
  return temporal_dir(c) / (c.family + "__" + model_id + "__" + std::string(to_string(v)) + ".json");
}

struct TemporalDynamicsFile {
  std::string family;
  std::string model_id;
  NullVariant variant = NullVariant::real;
  std::string config_hash;
  std::vector<TransportRecord> records;  // strictly increasing step
};

inline nlohmann::json to_json(const TemporalDynamicsFile& f) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : f.records) recs.push_back(to_json(r));
  return {{"schema_version", kOutputSchemaVersion},
          {"family", f.family},
          {"model_id", f.model_id},
          {"variant", std::string(to_string(f.variant))},
          {"config_hash", f.config_hash},
          {"records", recs}};
}

inline TemporalDynamicsFile read_temporal_file(const fs::path& path) {
  const auto j = detail::read_json(path);
  TemporalDynamicsFile f;
  try {
    if (j.at("schema_version").get<std::string>() != kOutputSchemaVersion)
      throw FormatError(path.string() + ": unsupported schema_version");
    f.family = j.at("family").get<std::string>();
    f.model_id = j.at("model_id").get<std::string>();
    f.variant = null_variant_from_string(j.at("variant").get<std::string>());
    f.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& r : j.at("records")) f.records.push_back(record_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (std::size_t i = 1; i < f.records.size(); ++i) {
    if (f.records[i].step <= f.records[i - 1].step)
      throw FormatError(path.string() + ": steps not strictly increasing");
  }
  return f;
}

// Manifests of the real (non-null) snapshots under the snapshot root, by path order.
inline std::vector<std::pair<fs::path, SnapshotManifest>> discover_snapshots(const RunConfig& c,
                                                                            std::vector<JournalEntry>& journal) {
  if (!fs::is_directory(c.snapshot_root))
    throw ConfigError("snapshot root " + c.snapshot_root.string() + " is not a directory");
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::recursive_directory_iterator(c.snapshot_root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    if (!fs::exists(fs::path(entry.path()).replace_extension(".fsnap"))) continue;
    manifests.push_back(entry.path());
  }
  std::sort(manifests.begin(), manifests.end());
  std::vector<std::pair<fs::path, SnapshotManifest>> out;
  std::set<std::pair<std::string, std::int64_t>> seen;
  for (const auto& p : manifests) {
    const std::string rel = fs::relative(p, c.snapshot_root).generic_string();
    SnapshotManifest m;
    try {
      m = read_manifest(p);
    } catch (const Error& e) {
      journal.push_back({"error", rel, -1, "", e.what()});
      continue;
    }
    if (m.field_kind == FieldKind::null_n0 || m.field_kind == FieldKind::null_n1 ||
        m.field_kind == FieldKind::null_n2) {
      journal.push_back({"warning", m.model_id, m.step, "", "null snapshot file ignored: " + rel});
      continue;
    }
    if (m.family != c.family) {
      journal.push_back({"warning", m.model_id, m.step, "", "family '" + m.family + "' ignored: " + rel});
      continue;
    }
    if (!seen.insert({m.model_id, m.step}).second) {
      journal.push_back({"error", m.model_id, m.step, "", "duplicate snapshot for (model, step): " + rel});
      continue;
    }
    out.emplace_back(p, m);
  }
  return out;
}

inline int cmd_probe(const RunConfig& c, const CommandOptions& opts = {}) {
  std::vector<JournalEntry> journal;
  const auto snapshots = discover_snapshots(c, journal);
  const std::string hash = c.probe_hash();

  // Existing records, keyed by (model_id, variant).
  std::map<std::pair<std::string, NullVariant>, std::map<std::int64_t, TransportRecord>> records;
  std::set<std::string> models;
  for (const auto& [path, m] : snapshots) models.insert(m.model_id);
  if (!opts.force) {
    for (const auto& model : models) {
      for (auto v : c.variants) {
        const auto p = temporal_path(c, model, v);
        if (!fs::exists(p)) continue;
        const auto f = read_temporal_file(p);
        if (f.config_hash != hash)
          throw ConfigError(p.string() + " was produced with a different probe configuration (use --force)");
        for (const auto& r : f.records) records[{model, v}][r.step] = r;
      }
    }
  }

  struct Task {
    fs::path path;
    SnapshotManifest manifest;
    std::vector<NullVariant> variants;
  };
  std::vector<Task> tasks;
  for (const auto& [path, m] : snapshots) {
    if (!c.scales.empty() && std::find(c.scales.begin(), c.scales.end(), m.n_elements) == c.scales.end())
      journal.push_back({"warning", m.model_id, m.step, "",
                         "N=" + std::to_string(m.n_elements) + " is not a configured scale; excluded from fits"});
    Task t{path, m, {}};
    for (auto v : c.variants) {
      const auto& done = records[{m.model_id, v}];
      if (!done.contains(m.step)) t.variants.push_back(v);
    }
    if (!t.variants.empty()) tasks.push_back(std::move(t));
  }

  // Graphs are built up front, one per field size; tasks only read them.
  std::map<std::uint64_t, ProbeGraph> graphs;
  for (const auto& t : tasks) {
    if (graphs.contains(t.manifest.n_elements)) continue;
    const GraphKey key{t.manifest.n_elements, c.graph_m, c.graph_seed};
    try {
      graphs.emplace(t.manifest.n_elements, get_or_build(key, c.cache_dir));
    } catch (const DomainError& e) {
      journal.push_back({"error", t.manifest.model_id, t.manifest.step, "", e.what()});
    }
  }

  struct Outcome {
    std::vector<TransportRecord> records;
    std::vector<JournalEntry> journal;
  };
  std::vector<Outcome> outcomes(tasks.size());
  detail::parallel_for(tasks.size(), c.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    Outcome& out = outcomes[i];
    auto git = graphs.find(t.manifest.n_elements);
    if (git == graphs.end()) return;  // graph failure already journaled
    FieldSnapshot real;
    try {
      real = read_snapshot(t.path);
      if (!(real.manifest == t.manifest)) throw DataError("manifest changed while probing");
    } catch (const Error& e) {
      out.journal.push_back({"error", t.manifest.model_id, t.manifest.step, "", e.what()});
      return;
    }
    for (auto v : t.variants) {
      try {
        const FieldSnapshot field = v == NullVariant::real ? FieldSnapshot{} : generate_null(real, v, c.null_base_seed);
        const FieldSnapshot& probe_field = v == NullVariant::real ? real : field;
        const auto result = run_cascade(probe_field, git->second, c.probe);
        out.records.push_back(make_record(real.manifest, v, result));
      } catch (const Error& e) {
        out.journal.push_back({"error", t.manifest.model_id, t.manifest.step, std::string(to_string(v)), e.what()});
      }
    }
  });

  std::size_t computed = 0;
  for (auto& o : outcomes) {
    for (auto& r : o.records) {
      records[{r.model_id, r.variant}][r.step] = r;
      ++computed;
    }
    journal.insert(journal.end(), o.journal.begin(), o.journal.end());
  }

  for (const auto& [key, by_step] : records) {
    if (by_step.empty()) continue;
    TemporalDynamicsFile f{c.family, key.first, key.second, hash, {}};
    for (const auto& [step, r] : by_step) f.records.push_back(r);
    detail::write_file(temporal_path(c, key.first, key.second), render(to_json(f)));
  }
  nlohmann::json j = {{"schema_version", kOutputSchemaVersion},
                      {"family", c.family},
                      {"config_hash", hash},
                      {"entries", journal_json(journal)}};
  detail::write_file(c.out_dir / "probe_journal.json", render(j));

  std::size_t errors = 0;
  for (const auto& e : journal) errors += e.level == "error";
  std::cerr << "probe: " << computed << " new records, " << tasks.size() << " snapshots probed, " << errors
            << " errors\n";
  return errors == 0 ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// fit

struct RecordTable {
  std::map<NullVariant, std::vector<TransportRecord>> by_variant;  // sorted by (step, N, model)
};

inline RecordTable load_records(const RunConfig& c) {
  RecordTable t;
  const auto dir = temporal_dir(c);
  if (!fs::is_directory(dir)) throw DataError("no temporal-dynamics files under " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const auto hash = c.probe_hash();
  for (const auto& p : files) {
    const auto f = read_temporal_file(p);
    if (f.family != c.family) continue;
    if (f.config_hash != hash)
      throw ConfigError(p.string() + " was produced with a different probe configuration");
    if (std::find(c.variants.begin(), c.variants.end(), f.variant) == c.variants.end()) continue;
    auto& dst = t.by_variant[f.variant];
    dst.insert(dst.end(), f.records.begin(), f.records.end());
  }
  for (auto& [v, recs] : t.by_variant) {
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
      return std::tie(a.step, a.n_elements, a.model_id) < std::tie(b.step, b.n_elements, b.model_id);
    });
  }
  if (t.by_variant.empty()) throw DataError("no temporal-dynamics records for family " + c.family);
  return t;
}

struct VariantFits {
  std::vector<StepScalingFit> fits;
  std::vector<std::pair<std::int64_t, std::string>> skipped;
};

inline std::map<NullVariant, VariantFits> fit_all(const RunConfig& c, const RecordTable& t) {
  std::map<NullVariant, VariantFits> out;
  for (const auto& [v, recs] : t.by_variant) {
    auto& vf = out[v];
    std::size_t i = 0;
    while (i < recs.size()) {
      std::size_t j = i;
      while (j < recs.size() && recs[j].step == recs[i].step) ++j;
      const auto outcome = fit_step(std::span<const TransportRecord>(recs).subspan(i, j - i), c.require_all_scales,
                                    c.scales);
      if (outcome.fit) {
        vf.fits.push_back(*outcome.fit);
      } else {
        vf.skipped.emplace_back(outcome.step, outcome.skip_reason);
      }
      i = j;
    }
  }
  return out;
}

inline StepWindow effective_window(const RunConfig& c, const RecordTable& t) {
  if (c.window) return *c.window;
  std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
  for (const auto& [v, recs] : t.by_variant) {
    for (const auto& r : recs) {
      lo = std::min(lo, r.step);
      hi = std::max(hi, r.step);
    }
  }
  return {lo, hi};
}

inline nlohmann::json fits_document(const RunConfig& c, const std::map<NullVariant, VariantFits>& all) {
  nlohmann::json variants = nlohmann::json::object();
  for (const auto& [v, vf] : all) {
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& f : vf.fits) fits.push_back(to_json(f));
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& [step, reason] : vf.skipped) skipped.push_back({{"step", step}, {"reason", reason}});
    variants[std::string(to_string(v))] = {{"fits", fits}, {"skipped", skipped}};
  }
  return {{"schema_version", kOutputSchemaVersion},
          {"family", c.family},
          {"config_hash", c.fit_hash()},
          {"probe_config_hash", c.probe_hash()},
          {"variants", variants}};
}

inline nlohmann::json summary_document(const RunConfig& c, const RecordTable& t,
                                       const std::map<NullVariant, VariantFits>& all) {
  const StepWindow window = effective_window(c, t);
  nlohmann::json vrel_bands = nlohmann::json::object(), closure = nlohmann::json::object(),
                 series = nlohmann::json::object(), compress = nlohmann::json::object();
  std::map<NullVariant, WindowSummary> summaries;
  static const std::vector<StepScalingFit> kNoFits;

  for (const auto& [v, recs] : t.by_variant) {
    const std::string vname(to_string(v));
    const auto it = all.find(v);
    const auto& fits = it != all.end() ? it->second.fits : kNoFits;
    const auto ws = window_summary(fits, recs, window, c.scales);
    summaries[v] = ws;
    closure[vname] = to_json(ws);

    // Per-model v_rel trajectories and plateau means.
    std::map<std::pair<std::uint64_t, std::string>, nlohmann::json> per_model;
    for (const auto& r : recs) {
      auto& m = per_model[{r.n_elements, r.model_id}];
      if (m.is_null()) m = nlohmann::json::array();
      m.push_back({{"step", r.step}, {"v_rel", opt_json(r.v_rel)}, {"degenerate", r.degenerate()}, {"record", r.id()}});
    }
    nlohmann::json models = nlohmann::json::array();
    for (auto& [key, pts] : per_model) {
      nlohmann::json plateau = nullptr;
      for (const auto& p : ws.vrel_plateaus) {
        if (p.model_id == key.second) plateau = {{"mean", p.mean}, {"n", p.n}};
      }
      models.push_back({{"model_id", key.second}, {"n_elements", key.first}, {"series", pts}, {"plateau", plateau}});
    }
    vrel_bands[vname] = {{"models", models}, {"vrel_mean", opt_json(ws.vrel_mean)}, {"vrel_cv", opt_json(ws.vrel_cv)}};

    // Exponent series with display-only rolling medians, and the R^2 map.
    nlohmann::json points = nlohmann::json::array(), cpoints = nlohmann::json::array();
    std::vector<std::pair<std::int64_t, double>> d1, z, dl;
    for (const auto& f : fits) {
      points.push_back({{"step", f.step}, {"D_minus_1", f.D - 1.0}, {"z", f.z}, {"delta", f.delta}, {"fit", f.id()}});
      cpoints.push_back({{"step", f.step},
                         {"r2_d", f.r2_d},
                         {"r2_z", f.r2_z},
                         {"r2_delta", f.r2_delta},
                         {"in_window", window.contains(f.step)},
                         {"fit", f.id()}});
      d1.emplace_back(f.step, f.D - 1.0);
      z.emplace_back(f.step, f.z);
      dl.emplace_back(f.step, f.delta);
    }
    auto medians = [](const std::vector<std::pair<std::int64_t, double>>& s) {
      if (s.empty()) return nlohmann::json::array();
      nlohmann::json out = nlohmann::json::array();
      for (auto [step, value] : rolling_median(s, 11)) out.push_back({step, value});
      return out;
    };
    series[vname] = {{"points", points},
                     {"rolling_median",
                      {{"window_len", 11}, {"D_minus_1", medians(d1)}, {"z", medians(z)}, {"delta", medians(dl)}}}};
    compress[vname] = {{"points", cpoints},
                       {"window_mean",
                        {{"r2_d", opt_json(ws.r2_d.mean)},
                         {"r2_z", opt_json(ws.r2_z.mean)},
                         {"r2_delta", opt_json(ws.r2_delta.mean)}}}};
  }

  // Null skeleton.
  nlohmann::json skeleton = nlohmann::json::object();
  nlohmann::json floor = nlohmann::json::object();
  for (auto v : {NullVariant::n0, NullVariant::n1}) {
    if (!summaries.contains(v)) continue;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : summaries[v].vrel_plateaus)
      arr.push_back({{"model_id", p.model_id}, {"n_elements", p.n_elements}, {"mean", p.mean}, {"n", p.n}});
    floor[std::string(to_string(v))] = arr;
  }
  skeleton["vrel_floor"] = floor;
  nlohmann::json z_means = nlohmann::json::object(), d_means = nlohmann::json::object();
  for (const auto& [v, ws] : summaries) {
    z_means[std::string(to_string(v))] = opt_json(ws.z.mean);
    d_means[std::string(to_string(v))] = opt_json(ws.D.mean);
  }
  skeleton["z_window_mean"] = z_means;
  skeleton["D_window_mean"] = d_means;
  auto decomposition = [&](auto member) -> nlohmann::json {
    if (!summaries.contains(NullVariant::real) || !summaries.contains(NullVariant::n0) ||
        !summaries.contains(NullVariant::n2))
      return nullptr;
    const auto& a = summaries[NullVariant::real].*member;
    const auto& b = summaries[NullVariant::n0].*member;
    const auto& d = summaries[NullVariant::n2].*member;
    if (!a.mean || !b.mean || !d.mean) return nullptr;
    return to_json(decompose(*a.mean, *b.mean, *d.mean));
  };
  skeleton["decomposition_z"] = decomposition(&WindowSummary::z);
  skeleton["decomposition_D"] = decomposition(&WindowSummary::D);
  skeleton["tertiles_delta_z_null"] = nullptr;
  if (all.contains(NullVariant::real) && all.contains(NullVariant::n0)) {
    try {
      skeleton["tertiles_delta_z_null"] =
          to_json(tertile_deltas(all.at(NullVariant::real).fits, all.at(NullVariant::n0).fits, window));
    } catch (const DataError&) {
    }
  }

  return {{"schema_version", kOutputSchemaVersion},
          {"family", c.family},
          {"config_hash", c.fit_hash()},
          {"window", {window.lo, window.hi}},
          {"window_configured", c.window.has_value()},
          {"vrel_bands", vrel_bands},
          {"closure_table", closure},
          {"exponent_series", series},
          {"compressibility_map", compress},
          {"null_skeleton", skeleton}};
}

struct FitArtifacts {
  std::string fits;
  std::string summary;
  std::size_t n_fits = 0;
};

inline FitArtifacts compute_fit_artifacts(const RunConfig& c) {
  const auto table = load_records(c);
  const auto all = fit_all(c, table);
  FitArtifacts a;
  for (const auto& [v, vf] : all) a.n_fits += vf.fits.size();
  a.fits = render(fits_document(c, all));
  a.summary = render(summary_document(c, table, all));
  return a;
}

inline int cmd_fit(const RunConfig& c, const CommandOptions& = {}) {
  const auto a = compute_fit_artifacts(c);
  detail::write_file(c.out_dir / "fits.json", a.fits);
  if (a.n_fits == 0) {
    std::error_code ec;
    fs::remove(c.out_dir / "summary.json", ec);
    std::cerr << "fit: no fittable step\n";
    return kExitNoFit;
  }
  detail::write_file(c.out_dir / "summary.json", a.summary);
  std::cerr << "fit: " << a.n_fits << " step fits\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bridge

inline ExternalMetricSeries load_metric_table(const MetricTableConfig& mc, const std::string& family, double floor) {
  ExternalMetricSeries s;
  s.family = family;
  s.metric_kind = mc.kind;
  s.floor = floor;
  if (mc.path.extension() == ".json") {
    const auto j = detail::read_json(mc.path);
    try {
      for (const auto& row : j) {
        MetricEntry e;
        e.model_id = row.at("model_id").get<std::string>();
        e.n = row.contains("n") ? row.at("n").get<double>() : row.at("n_elements_or_params").get<double>();
        e.step = row.at("step").get<std::int64_t>();
        e.value = row.at("value").get<double>();
        s.entries.push_back(e);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(mc.path.string() + ": " + e.what());
    }
  } else {
    std::istringstream in(detail::read_file(mc.path));
    std::string line;
    bool header = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      std::vector<std::string> cols;
      std::stringstream ls(line);
      for (std::string col; std::getline(ls, col, ',');) cols.push_back(col);
      if (cols.size() != 4) throw FormatError(mc.path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
      try {
        s.entries.push_back({cols[0], std::stod(cols[1]), std::stoll(cols[2]), std::stod(cols[3])});
      } catch (const std::exception&) {
        throw FormatError(mc.path.string() + ":" + std::to_string(lineno) + ": unparsable number");
      }
    }
  }
  for (const auto& e : s.entries) {
    if (!std::isfinite(e.value)) throw DataError(mc.path.string() + ": non-finite metric value");
  }
  return s;
}

using StepSeries = std::map<std::int64_t, double>;

struct BridgeRow {
  std::string internal;
  std::string external;
  std::string scope;  // "family" or a model id
  std::vector<std::int64_t> steps;
  Correlation raw;
  std::optional<Correlation> lr_partial;
};

inline nlohmann::json to_json(const BridgeRow& r) {
  return {{"internal", r.internal},
          {"external", r.external},
          {"scope", r.scope},
          {"n", r.raw.n},
          {"r", r.raw.r},
          {"p", r.raw.p},
          {"degenerate", r.raw.degenerate},
          {"lr_partial_r", r.lr_partial ? nlohmann::json(r.lr_partial->r) : nlohmann::json(nullptr)},
          {"lr_partial_degenerate",
           r.lr_partial ? nlohmann::json(r.lr_partial->degenerate) : nlohmann::json(nullptr)},
          {"steps", r.steps}};
}

inline std::optional<BridgeRow> correlate(const std::string& internal, const StepSeries& x, const std::string& external,
                                          const StepSeries& y, const std::string& scope,
                                          const std::optional<LrSchedule>& schedule,
                                          std::vector<JournalEntry>& journal) {
  BridgeRow row{internal, external, scope, {}, {}, std::nullopt};
  std::vector<double> xs, ys;
  for (const auto& [step, xv] : x) {
    if (auto it = y.find(step); it != y.end()) {
      row.steps.push_back(step);
      xs.push_back(xv);
      ys.push_back(it->second);
    }
  }
  const std::string what = internal + " x " + external + " [" + scope + "]";
  if (row.steps.size() != x.size() || row.steps.size() != y.size())
    journal.push_back({"warning", scope, -1, "", what + ": " + std::to_string(row.steps.size()) +
                                                     " common steps (intersection of " + std::to_string(x.size()) +
                                                     " and " + std::to_string(y.size()) + ")"});
  if (xs.size() < 3) {
    journal.push_back({"warning", scope, -1, "", what + ": fewer than 3 common steps, skipped"});
    return std::nullopt;
  }
  row.raw = pearson(xs, ys);
  if (schedule) {
    if (xs.size() < 4) {
      journal.push_back({"warning", scope, -1, "", what + ": fewer than 4 steps, no lr-partial"});
    } else if (row.steps.front() < 0 || row.steps.back() > schedule->t_total) {
      journal.push_back({"warning", scope, -1, "", what + ": steps outside the schedule range, no lr-partial"});
    } else {
      std::vector<double> eta;
      for (auto s : row.steps) eta.push_back(reconstruct_lr(*schedule, s));
      row.lr_partial = lr_partial_pearson(xs, ys, eta);
    }
  }
  return row;
}

inline std::string compute_bridge_artifact(const RunConfig& c) {
  if (c.bridge.metrics.empty()) throw ConfigError("bridge needs at least one entry in bridge.metrics");
  const auto fits_path = c.out_dir / "fits.json";
  if (!fs::exists(fits_path)) throw DataError("bridge needs " + fits_path.string() + " (run fit first)");
  const auto fits_doc = detail::read_json(fits_path);
  if (fits_doc.value("config_hash", "") != c.fit_hash())
    throw ConfigError(fits_path.string() + " was produced with a different configuration");

  StepSeries D;
  try {
    for (const auto& f : fits_doc.at("variants").at("real").at("fits")) {
      const auto fit = fit_from_json(f);
      D[fit.step] = fit.D;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fits_path.string() + ": " + e.what());
  }

  const auto table = load_records(c);
  std::map<std::string, StepSeries> vrel_by_model, dur_by_model;
  std::map<std::int64_t, std::vector<double>> vrel_acc, dur_acc;
  if (auto it = table.by_variant.find(NullVariant::real); it != table.by_variant.end()) {
    for (const auto& r : it->second) {
      if (r.degenerate() || !r.v_rel) continue;
      if (!c.scales.empty() && std::find(c.scales.begin(), c.scales.end(), r.n_elements) == c.scales.end()) continue;
      const double dur = static_cast<double>(r.n_steps) / static_cast<double>(r.n_elements);
      vrel_by_model[r.model_id][r.step] = *r.v_rel;
      dur_by_model[r.model_id][r.step] = dur;
      vrel_acc[r.step].push_back(*r.v_rel);
      dur_acc[r.step].push_back(dur);
    }
  }
  auto mean_series = [](const std::map<std::int64_t, std::vector<double>>& acc) {
    StepSeries s;
    for (const auto& [step, vals] : acc) {
      double sum = 0.0;
      for (double v : vals) sum += v;
      s[step] = sum / static_cast<double>(vals.size());
    }
    return s;
  };
  const StepSeries vrel_mean = mean_series(vrel_acc), dur_mean = mean_series(dur_acc);

  std::vector<JournalEntry> journal;
  nlohmann::json metric_blocks = nlohmann::json::array();
  for (const auto& mc : c.bridge.metrics) {
    const auto series = load_metric_table(mc, c.family, c.bridge.floor);
    const std::string metric_name(to_string(mc.kind));
    const std::string exponent_name = mc.kind == MetricKind::perplexity ? "beta_ppl" : "alpha_acc";

    std::set<std::int64_t> steps;
    for (const auto& e : series.entries) steps.insert(e.step);
    StepSeries exponent;
    nlohmann::json exp_points = nlohmann::json::array();
    for (auto step : steps) {
      const auto fit = fit_external_exponent(series, step, c.bridge.evaluation_line);
      if (!fit) {
        journal.push_back({"warning", "family", step, "", exponent_name + ": fewer than 3 scales, step skipped"});
        continue;
      }
      exponent[step] = fit->slope;
      exp_points.push_back({{"step", step}, {"slope", fit->slope}, {"r2", fit->r2}});
    }

    auto transform = [&](double v) {
      return mc.transform == MetricTransform::log ? std::log10(std::max(v, c.bridge.floor)) : v;
    };
    std::map<std::string, StepSeries> metric_by_model;
    std::map<std::int64_t, std::vector<double>> metric_acc;
    for (const auto& e : series.entries) {
      metric_by_model[e.model_id][e.step] = transform(e.value);
      metric_acc[e.step].push_back(transform(e.value));
    }
    const StepSeries metric_mean = mean_series(metric_acc);

    nlohmann::json rows = nlohmann::json::array();
    auto add = [&](std::optional<BridgeRow> row) {
      if (row) rows.push_back(to_json(*row));
    };
    const std::vector<std::pair<std::string, const StepSeries*>> internals{
        {"v_rel", &vrel_mean}, {"n_steps_per_n", &dur_mean}, {"D", &D}};
    const std::vector<std::pair<std::string, const StepSeries*>> externals{{metric_name, &metric_mean},
                                                                           {exponent_name, &exponent}};
    for (const auto& [iname, iseries] : internals) {
      for (const auto& [ename, eseries] : externals)
        add(correlate(iname, *iseries, ename, *eseries, "family", c.bridge.schedule, journal));
    }
    for (const auto& [model, mseries] : metric_by_model) {
      if (!vrel_by_model.contains(model)) {
        journal.push_back({"warning", model, -1, "", "metric rows for a model without transport records"});
        continue;
      }
      add(correlate("v_rel", vrel_by_model.at(model), metric_name, mseries, model, c.bridge.schedule, journal));
      add(correlate("n_steps_per_n", dur_by_model.at(model), metric_name, mseries, model, c.bridge.schedule,
                    journal));
    }
    metric_blocks.push_back({{"metric", metric_name},
                             {"table", mc.path.filename().string()},
                             {"transform", mc.transform == MetricTransform::log ? "log10" : "identity"},
                             {"external_exponent", {{"name", exponent_name}, {"points", exp_points}}},
                             {"rows", rows}});
  }

  nlohmann::json schedule = nullptr;
  if (c.bridge.schedule) {
    const auto& s = *c.bridge.schedule;
    schedule = {{"kind", s.kind == ScheduleKind::linear_warmup_linear ? "linear_warmup_linear" : "linear_warmup_cosine"},
                {"eta_max", s.eta_max},
                {"eta_min", s.eta_min},
                {"t_warm", s.t_warm},
                {"t_total", s.t_total}};
  }
  return render({{"schema_version", kOutputSchemaVersion},
                 {"family", c.family},
                 {"config_hash", c.fit_hash()},
                 {"schedule", schedule},
                 {"evaluation_line", c.bridge.evaluation_line},
                 {"bridge_panels", metric_blocks},
                 {"journal", journal_json(journal)}});
}

inline int cmd_bridge(const RunConfig& c, const CommandOptions& = {}) {
  detail::write_file(c.out_dir / "bridge.json", compute_bridge_artifact(c));
  std::cerr << "bridge: wrote " << (c.out_dir / "bridge.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// audit: every derived artifact must equal a fresh recomputation from the
// temporal-dynamics files.

struct AuditLine {
  std::string file;
  bool ok = false;
  std::string detail;
};

inline std::vector<AuditLine> audit(const RunConfig& c) {
  std::vector<AuditLine> lines;
  const auto a = compute_fit_artifacts(c);
  auto check = [&](const std::string& name, const std::string& expected, bool required) {
    const auto p = c.out_dir / name;
    if (!fs::exists(p)) {
      if (required) lines.push_back({name, false, "missing"});
      return;
    }
    const bool same = detail::read_file(p) == expected;
    lines.push_back({name, same, same ? "matches recomputation" : "differs from recomputation"});
  };
  check("fits.json", a.fits, true);
  check("summary.json", a.summary, a.n_fits > 0);
  if (fs::exists(c.out_dir / "bridge.json") && !c.bridge.metrics.empty())
    check("bridge.json", compute_bridge_artifact(c), false);
  return lines;
}

inline int cmd_audit(const RunConfig& c, const CommandOptions& = {}) {
  bool ok = true;
  for (const auto& l : audit(c)) {
    std::cout << (l.ok ? "ok       " : "MISMATCH ") << l.file << ": " << l.detail << "\n";
    ok = ok && l.ok;
  }
  return ok ? kExitOk : kExitData;
}

// Dispatches a subcommand and maps errors onto exit codes.
inline int run_command(const std::string& name, const RunConfig& c, const CommandOptions& opts = {}) {
  try {
    if (name == "synth") return cmd_synth(c, opts);
    if (name == "probe") return cmd_probe(c, opts);
    if (name == "fit") return cmd_fit(c, opts);
    if (name == "bridge") return cmd_bridge(c, opts);
    if (name == "audit") return cmd_audit(c, opts);
    std::cerr << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace fsgt
