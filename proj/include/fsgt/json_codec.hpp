#pragma once

// JSON encodings of transport records, per-step fits and summaries. Objects use
// nlohmann::json's sorted key order and shortest round-trip doubles, so equal values
// serialise to equal bytes.

#include <optional>
#include <string>
#include <vector>

#include "fsgt/error.hpp"
#include "fsgt/scaling.hpp"
#include "json.hpp"

namespace fsgt {

inline constexpr std::string_view kOutputSchemaVersion = "1";

template <typename T>
nlohmann::json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const TransportRecord& r) {
  return {{"id", r.id()},
          {"family", r.family},
          {"model_id", r.model_id},
          {"variant", std::string(to_string(r.variant))},
          {"step", r.step},
          {"n_elements", r.n_elements},
          {"tau", r.tau},
          {"s_max", r.s_max},
          {"n_steps", r.n_steps},
          {"ceiling_limited", r.ceiling_limited},
          {"zero_cascade", r.zero_cascade},
          {"degenerate", r.degenerate()},
          {"v_abs", opt_json(r.v_abs)},
          {"v_rel", opt_json(r.v_rel)}};
}

inline TransportRecord record_from_json(const nlohmann::json& j) {
  try {
    TransportRecord r;
    r.family = j.at("family").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.variant = null_variant_from_string(j.at("variant").get<std::string>());
    r.step = j.at("step").get<std::int64_t>();
    r.n_elements = j.at("n_elements").get<std::uint64_t>();
    r.tau = j.at("tau").get<double>();
    r.s_max = j.at("s_max").get<std::uint64_t>();
    r.n_steps = j.at("n_steps").get<std::uint32_t>();
    r.ceiling_limited = j.at("ceiling_limited").get<bool>();
    r.zero_cascade = j.at("zero_cascade").get<bool>();
    if (!j.at("v_abs").is_null()) r.v_abs = j.at("v_abs").get<double>();
    if (!j.at("v_rel").is_null()) r.v_rel = j.at("v_rel").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed transport record: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed transport record: ") + e.what());
  }
}

inline nlohmann::json to_json(const StepScalingFit& f) {
  return {{"id", f.id()},
          {"family", f.family},
          {"variant", std::string(to_string(f.variant))},
          {"step", f.step},
          {"scales_used", f.scales_used},
          {"model_ids", f.model_ids},
          {"n_scales", f.n_scales},
          {"D", f.D},
          {"c", f.c},
          {"z", f.z},
          {"c_z", f.c_z},
          {"beta", f.beta},
          {"c_beta", f.c_beta},
          {"delta", f.delta},
          {"c_delta", f.c_delta},
          {"r2_d", f.r2_d},
          {"r2_z", f.r2_z},
          {"r2_beta", f.r2_beta},
          {"r2_delta", f.r2_delta}};
}

inline StepScalingFit fit_from_json(const nlohmann::json& j) {
  try {
    StepScalingFit f;
    f.family = j.at("family").get<std::string>();
    f.variant = null_variant_from_string(j.at("variant").get<std::string>());
    f.step = j.at("step").get<std::int64_t>();
    f.scales_used = j.at("scales_used").get<std::vector<std::uint64_t>>();
    f.model_ids = j.at("model_ids").get<std::vector<std::string>>();
    f.n_scales = j.at("n_scales").get<std::size_t>();
    f.D = j.at("D").get<double>();
    f.c = j.at("c").get<double>();
    f.z = j.at("z").get<double>();
    f.c_z = j.at("c_z").get<double>();
    f.beta = j.at("beta").get<double>();
    f.c_beta = j.at("c_beta").get<double>();
    f.delta = j.at("delta").get<double>();
    f.c_delta = j.at("c_delta").get<double>();
    f.r2_d = j.at("r2_d").get<double>();
    f.r2_z = j.at("r2_z").get<double>();
    f.r2_beta = j.at("r2_beta").get<double>();
    f.r2_delta = j.at("r2_delta").get<double>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed fit: ") + e.what());
  }
}

inline nlohmann::json to_json(const SampleStat& s) {
  return {{"n", s.n}, {"mean", opt_json(s.mean)}, {"std", opt_json(s.std)}};
}

inline nlohmann::json to_json(const WindowSummary& w) {
  nlohmann::json plateaus = nlohmann::json::array();
  for (const auto& p : w.vrel_plateaus)
    plateaus.push_back({{"model_id", p.model_id}, {"n_elements", p.n_elements}, {"n", p.n}, {"mean", p.mean}});
  nlohmann::json j = {{"window", {w.window.lo, w.window.hi}},
                      {"empty", w.empty},
                      {"n_fits", w.n_fits},
                      {"D", to_json(w.D)},
                      {"z", to_json(w.z)},
                      {"beta", to_json(w.beta)},
                      {"delta", to_json(w.delta)},
                      {"r2_d", to_json(w.r2_d)},
                      {"r2_z", to_json(w.r2_z)},
                      {"r2_delta", to_json(w.r2_delta)},
                      {"max_closure_residual", w.max_closure_residual},
                      {"vrel_plateaus", plateaus},
                      {"vrel_mean", opt_json(w.vrel_mean)},
                      {"vrel_cv", opt_json(w.vrel_cv)},
                      {"fit_ids", w.fit_ids}};
  if (w.D.mean && w.z.mean) {
    j["beta_from_closure"] = *w.D.mean - *w.z.mean;
    j["delta_from_closure"] = *w.D.mean - *w.z.mean - 1.0;
  } else {
    j["beta_from_closure"] = nullptr;
    j["delta_from_closure"] = nullptr;
  }
  return j;
}

inline nlohmann::json to_json(const TertileSummary& t) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& tt : t.tertiles) {
    parts.push_back({{"label", tt.label},
                     {"n", tt.n},
                     {"step_lo", opt_json(tt.step_lo)},
                     {"step_hi", opt_json(tt.step_hi)},
                     {"mean", opt_json(tt.delta.mean)},
                     {"std", opt_json(tt.delta.std)}});
  }
  return {{"tertiles", parts}, {"overall", to_json(t.overall)}, {"steps", t.steps}};
}

inline nlohmann::json to_json(const NullDecomposition& d) {
  return {{"total", d.total}, {"dist", d.dist}, {"assign", d.assign}};
}

// Canonical file text: two-space indent plus trailing newline.
inline std::string render(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace fsgt
