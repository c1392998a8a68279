#pragma once

// Pipeline fixtures shared by the unit suite and the acceptance runner.

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsgt/pipeline.hpp"
#include "support/temp_dir.hpp"

namespace fsgt::test {

inline RunConfig fixture_config(const std::filesystem::path& root, std::string family = "fixture") {
  nlohmann::json j = {{"family", family}, {"snapshot_root", "snap"}, {"cache_dir", "cache"}, {"out_dir", "out"}};
  return parse_run_config(j, root);
}

// Snapshot files of every .json/.fsnap and output file under `dir`, keyed by relative path.
inline std::map<std::string, std::string> tree_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).generic_string()] = slurp(e.path());
  }
  return out;
}

// Temporal-dynamics files whose records follow exact power laws s = a N^D, n = b N^z.
inline void write_power_law_records(const RunConfig& c, const std::vector<std::uint64_t>& scales,
                                    const std::vector<std::int64_t>& steps, double D, double z) {
  for (auto n : scales) {
    TemporalDynamicsFile f{c.family, "pl-N" + std::to_string(n), NullVariant::real, c.probe_hash(), {}};
    for (auto step : steps) {
      TransportRecord r;
      r.family = c.family;
      r.model_id = f.model_id;
      r.step = step;
      r.n_elements = n;
      r.tau = 1.0;
      r.s_max = static_cast<std::uint64_t>(std::llround(std::pow(static_cast<double>(n), D)));
      r.n_steps = static_cast<std::uint32_t>(std::llround(std::pow(static_cast<double>(n), z)));
      r.v_abs = static_cast<double>(r.s_max) / r.n_steps;
      r.v_rel = *r.v_abs / static_cast<double>(n);
      f.records.push_back(r);
    }
    detail::write_file(temporal_path(c, f.model_id, f.variant), render(to_json(f)));
  }
}

}  // namespace fsgt::test
