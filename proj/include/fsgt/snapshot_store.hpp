#pragma once

// Binary field snapshots: a raw little-endian binary32 data file (`<name>.fsnap`)
// next to a JSON manifest (`<name>.json`), plus magnitude-quantile estimation
// for large fields.

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fsgt/error.hpp"
#include "fsgt/rng.hpp"
#include "fsgt/sha256.hpp"
#include "json.hpp"

namespace fsgt {

namespace fs = std::filesystem;

inline constexpr std::string_view kSnapshotSchemaVersion = "1";
inline constexpr std::size_t kDefaultSubsampleCap = 10'000'000;

enum class FieldKind { raw_gradient, checkpoint_delta, synthetic, null_n0, null_n1, null_n2 };

inline std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::raw_gradient: return "raw_gradient";
    case FieldKind::checkpoint_delta: return "checkpoint_delta";
    case FieldKind::synthetic: return "synthetic";
    case FieldKind::null_n0: return "null_n0";
    case FieldKind::null_n1: return "null_n1";
    case FieldKind::null_n2: return "null_n2";
  }
  return "unknown";
}

inline FieldKind field_kind_from_string(std::string_view text) {
  for (auto kind : {FieldKind::raw_gradient, FieldKind::checkpoint_delta, FieldKind::synthetic,
                    FieldKind::null_n0, FieldKind::null_n1, FieldKind::null_n2}) {
    if (to_string(kind) == text) return kind;
  }
  throw FormatError("unknown field_kind '" + std::string(text) + "'");
}

struct SnapshotManifest {
  std::string schema_version{kSnapshotSchemaVersion};
  std::string family;
  std::string model_id;
  FieldKind field_kind = FieldKind::synthetic;
  std::int64_t step = 0;
  std::uint64_t n_elements = 0;
  std::string dtype = "f32";
  std::string byte_order = "le";
  std::optional<std::uint64_t> seed;
  std::string source;
  std::string checksum;

  bool operator==(const SnapshotManifest&) const = default;
};

struct FieldSnapshot {
  SnapshotManifest manifest;
  std::vector<float> values;

  bool operator==(const FieldSnapshot&) const = default;
};

struct FieldStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double q90_abs = 0.0;
  std::uint64_t n_nonfinite = 0;
};

struct SnapshotPaths {
  fs::path manifest;
  fs::path data;
};

// ---------------------------------------------------------------------------
// Manifest JSON

inline nlohmann::json manifest_to_json(const SnapshotManifest& m) {
  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["family"] = m.family;
  j["model_id"] = m.model_id;
  j["field_kind"] = std::string(to_string(m.field_kind));
  j["step"] = m.step;
  j["n_elements"] = m.n_elements;
  j["dtype"] = m.dtype;
  j["byte_order"] = m.byte_order;
  j["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
  j["source"] = m.source;
  j["checksum"] = m.checksum;
  return j;
}

inline SnapshotManifest manifest_from_json(const nlohmann::json& j) {
  SnapshotManifest m;
  try {
    m.schema_version = j.at("schema_version").get<std::string>();
    if (m.schema_version != kSnapshotSchemaVersion)
      throw FormatError("unsupported snapshot schema_version '" + m.schema_version + "'");
    m.family = j.at("family").get<std::string>();
    m.model_id = j.at("model_id").get<std::string>();
    m.field_kind = field_kind_from_string(j.at("field_kind").get<std::string>());
    m.step = j.at("step").get<std::int64_t>();
    m.n_elements = j.at("n_elements").get<std::uint64_t>();
    m.dtype = j.at("dtype").get<std::string>();
    m.byte_order = j.at("byte_order").get<std::string>();
    if (const auto& seed = j.at("seed"); !seed.is_null()) m.seed = seed.get<std::uint64_t>();
    m.source = j.at("source").get<std::string>();
    m.checksum = j.at("checksum").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed snapshot manifest: ") + e.what());
  }
  if (m.dtype != "f32") throw FormatError("unsupported dtype '" + m.dtype + "'");
  if (m.byte_order != "le") throw FormatError("unsupported byte_order '" + m.byte_order + "'");
  if (m.n_elements == 0) throw FormatError("manifest n_elements must be > 0");
  if (m.step < 0) throw FormatError("manifest step must be >= 0");
  return m;
}

// ---------------------------------------------------------------------------
// Data encoding

inline std::vector<std::byte> encode_f32_le(std::span<const float> values) {
  std::vector<std::byte> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::byte>((bits >> (8 * b)) & 0xFF);
  }
  return bytes;
}

inline std::vector<float> decode_f32_le(std::span<const std::byte> bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::to_integer<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

inline std::string default_snapshot_name(const SnapshotManifest& m) {
  std::string step = std::to_string(m.step);
  if (step.size() < 9) step.insert(0, 9 - step.size(), '0');
  return m.model_id + "__" + std::string(to_string(m.field_kind)) + "__step" + step;
}

namespace detail {

inline std::vector<std::byte> read_all_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_all_bytes(const fs::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_text(const fs::path& path, std::string_view text) {
  write_all_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

}  // namespace detail

// Writes `<dir>/<name>.fsnap` and `<dir>/<name>.json`. The manifest's n_elements and
// checksum are (re)computed from the values.
inline SnapshotPaths write_snapshot(const FieldSnapshot& snapshot, const fs::path& dir,
                                    std::string_view name) {
  if (snapshot.values.empty()) throw DataError("snapshot has no values");
  if (snapshot.manifest.n_elements != 0 && snapshot.manifest.n_elements != snapshot.values.size())
    throw DataError("manifest n_elements " + std::to_string(snapshot.manifest.n_elements) +
                    " does not match " + std::to_string(snapshot.values.size()) + " values");
  if (snapshot.manifest.step < 0) throw DataError("snapshot step must be >= 0");
  for (std::size_t i = 0; i < snapshot.values.size(); ++i) {
    if (!std::isfinite(snapshot.values[i]))
      throw DataError("non-finite value at index " + std::to_string(i));
  }

  const auto bytes = encode_f32_le(snapshot.values);
  SnapshotManifest manifest = snapshot.manifest;
  manifest.schema_version = std::string(kSnapshotSchemaVersion);
  manifest.n_elements = snapshot.values.size();
  manifest.dtype = "f32";
  manifest.byte_order = "le";
  manifest.checksum = sha256_hex(bytes);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  SnapshotPaths paths{dir / (std::string(name) + ".json"), dir / (std::string(name) + ".fsnap")};
  detail::write_all_bytes(paths.data, bytes);
  detail::write_text(paths.manifest, manifest_to_json(manifest).dump(2) + "\n");
  return paths;
}

inline SnapshotPaths write_snapshot(const FieldSnapshot& snapshot, const fs::path& dir) {
  return write_snapshot(snapshot, dir, default_snapshot_name(snapshot.manifest));
}

inline SnapshotManifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("unparsable manifest " + manifest_path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

// Accepts the manifest path, the data path, or the common stem.
inline FieldSnapshot read_snapshot(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".json" || stem.extension() == ".fsnap") stem.replace_extension();
  const fs::path manifest_path = fs::path(stem).concat(".json");
  const fs::path data_path = fs::path(stem).concat(".fsnap");

  FieldSnapshot snapshot;
  snapshot.manifest = read_manifest(manifest_path);
  const auto bytes = detail::read_all_bytes(data_path);
  if (bytes.size() != snapshot.manifest.n_elements * 4)
    throw FormatError(data_path.string() + ": expected " +
                      std::to_string(snapshot.manifest.n_elements * 4) + " bytes, found " +
                      std::to_string(bytes.size()));
  if (sha256_hex(bytes) != snapshot.manifest.checksum)
    throw CorruptDataError(data_path.string() + ": checksum mismatch");
  snapshot.values = decode_f32_le(bytes);
  for (std::size_t i = 0; i < snapshot.values.size(); ++i) {
    if (!std::isfinite(snapshot.values[i]))
      throw DataError(data_path.string() + ": non-finite value at index " + std::to_string(i));
  }
  return snapshot;
}

// ---------------------------------------------------------------------------
// Quantiles

namespace detail {

// Type-7 quantile of `mags` (reordered in place): linear interpolation between the
// order statistics at floor(h) and floor(h)+1, h = (n-1)q.
template <std::floating_point T>
double type7_select(std::vector<T>& mags, double q) {
  const std::size_t n = mags.size();
  const double h = static_cast<double>(n - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(lo), mags.end());
  const double a = static_cast<double>(mags[lo]);
  if (frac == 0.0 || lo + 1 >= n) return a;
  const double b = static_cast<double>(
      *std::min_element(mags.begin() + static_cast<std::ptrdiff_t>(lo) + 1, mags.end()));
  return a + frac * (b - a);
}

}  // namespace detail

// q-quantile of |values|. Above `subsample_cap` entries, the quantile is taken over a
// uniform subsample (without replacement) of `subsample_cap` magnitudes, drawn by a
// partial Fisher-Yates shuffle seeded with `seed`.
template <std::floating_point T>
double field_quantile(std::span<const T> values, double q,
                      std::size_t subsample_cap = kDefaultSubsampleCap, std::uint64_t seed = 0) {
  if (values.empty()) throw DomainError("field_quantile: empty input");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("field_quantile: q must lie in (0, 1)");
  if (subsample_cap == 0) throw DomainError("field_quantile: subsample_cap must be > 0");

  std::vector<T> mags(values.size());
  std::transform(values.begin(), values.end(), mags.begin(), [](T v) { return std::abs(v); });
  if (mags.size() > subsample_cap) {
    Rng rng(seed);
    const std::size_t n = mags.size();
    for (std::size_t i = 0; i < subsample_cap; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
      std::swap(mags[i], mags[j]);
    }
    mags.resize(subsample_cap);
  }
  return detail::type7_select(mags, q);
}

template <std::floating_point T>
double field_quantile(const std::vector<T>& values, double q,
                      std::size_t subsample_cap = kDefaultSubsampleCap, std::uint64_t seed = 0) {
  return field_quantile(std::span<const T>(values), q, subsample_cap, seed);
}

inline FieldStats field_stats(std::span<const float> values,
                              std::size_t subsample_cap = kDefaultSubsampleCap,
                              std::uint64_t seed = 0) {
  FieldStats stats;
  std::vector<float> finite;
  finite.reserve(values.size());
  for (float v : values) {
    if (std::isfinite(v)) {
      finite.push_back(v);
    } else {
      ++stats.n_nonfinite;
    }
  }
  if (finite.empty()) return stats;
  double sum = 0.0;
  for (float v : finite) sum += v;
  stats.mean = sum / static_cast<double>(finite.size());
  double ss = 0.0;
  for (float v : finite) {
    const double d = v - stats.mean;
    ss += d * d;
  }
  stats.std = std::sqrt(ss / static_cast<double>(finite.size()));
  stats.q90_abs = field_quantile(std::span<const float>(finite), 0.9, subsample_cap, seed);
  return stats;
}

}  // namespace fsgt
