#pragma once

// Matched control fields for one real snapshot, and the distribution/assignment split.
//
//   n0: i.i.d. standard normal, length N
//   n1: i.i.d. normal with the real field's mean and population standard deviation
//   n2: uniform random permutation of the real values
//
// Effective seed is base_seed + step (the released training step), and each variant
// draws from its own sub-stream mix_seed(base_seed + step, variant tag).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsgt/error.hpp"
#include "fsgt/rng.hpp"
#include "fsgt/snapshot_store.hpp"

namespace fsgt {

inline constexpr std::uint64_t kDefaultNullBaseSeed = 42;

enum class NullVariant { real, n0, n1, n2 };

inline std::string_view to_string(NullVariant v) {
  switch (v) {
    case NullVariant::real: return "real";
    case NullVariant::n0: return "n0";
    case NullVariant::n1: return "n1";
    case NullVariant::n2: return "n2";
  }
  return "unknown";
}

inline NullVariant null_variant_from_string(std::string_view text) {
  for (auto v : {NullVariant::real, NullVariant::n0, NullVariant::n1, NullVariant::n2}) {
    if (to_string(v) == text) return v;
  }
  throw ConfigError("unknown variant '" + std::string(text) + "'");
}

struct NullDecomposition {
  double total = 0.0;
  double dist = 0.0;
  double assign = 0.0;
};

// Normal parameters used for n1: sample mean and population (ddof = 0) standard deviation.
struct MomentMatch {
  double mean = 0.0;
  double std = 0.0;
};

inline MomentMatch moment_match(std::span<const float> values) {
  if (values.empty()) throw DataError("moment_match: empty field");
  double sum = 0.0;
  for (float v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (float v : values) {
    const double d = v - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

inline std::uint64_t null_stream_seed(std::uint64_t base_seed, std::int64_t step, NullVariant variant) {
  return mix_seed(base_seed + static_cast<std::uint64_t>(step), 0x4E00 + static_cast<std::uint64_t>(variant));
}

inline std::vector<float> gaussian_field(std::size_t n, double mean, double std, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> out(n);
  for (auto& v : out) v = static_cast<float>(mean + std * rng.normal());
  return out;
}

inline FieldSnapshot generate_null(const FieldSnapshot& real, NullVariant variant,
                                   std::uint64_t base_seed = kDefaultNullBaseSeed) {
  if (variant == NullVariant::real) throw DomainError("generate_null: 'real' is not a null variant");
  if (real.values.empty()) throw DataError("generate_null: zero-length field");

  const std::uint64_t seed = null_stream_seed(base_seed, real.manifest.step, variant);
  FieldSnapshot out;
  out.manifest = real.manifest;
  out.manifest.seed = base_seed + static_cast<std::uint64_t>(real.manifest.step);
  out.manifest.checksum.clear();
  out.manifest.n_elements = real.values.size();
  const std::string origin = real.manifest.model_id + "@" + std::to_string(real.manifest.step);

  switch (variant) {
    case NullVariant::n0:
      out.manifest.field_kind = FieldKind::null_n0;
      out.manifest.source = "null n0 for " + origin;
      out.values = gaussian_field(real.values.size(), 0.0, 1.0, seed);
      break;
    case NullVariant::n1: {
      out.manifest.field_kind = FieldKind::null_n1;
      out.manifest.source = "null n1 for " + origin;
      const auto mm = moment_match(real.values);
      out.values = gaussian_field(real.values.size(), mm.mean, mm.std, seed);
      break;
    }
    case NullVariant::n2: {
      out.manifest.field_kind = FieldKind::null_n2;
      out.manifest.source = "null n2 for " + origin;
      out.values = real.values;
      Rng rng(seed);
      for (std::size_t i = out.values.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_below(i + 1));
        std::swap(out.values[i], out.values[j]);
      }
      break;
    }
    case NullVariant::real:
      break;
  }
  return out;
}

inline NullDecomposition decompose(double x_real, double x_n0, double x_n2) {
  if (!std::isfinite(x_real) || !std::isfinite(x_n0) || !std::isfinite(x_n2))
    throw DomainError("decompose: inputs must be finite");
  NullDecomposition d;
  d.dist = x_n2 - x_n0;
  d.assign = x_real - x_n2;
  // total is defined as dist + assign so the identity is exact in floating point;
  // it equals x_real - x_n0 up to one rounding.
  d.total = d.dist + d.assign;
  return d;
}

}  // namespace fsgt
