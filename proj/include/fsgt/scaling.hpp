#pragma once

// Cross-scale log-log fits of cascade observables at fixed training step, and the
// window / tertile summaries built on them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsgt/cascade.hpp"
#include "fsgt/error.hpp"
#include "fsgt/null_suite.hpp"

namespace fsgt {

struct TransportRecord {
  std::string family;
  std::string model_id;
  NullVariant variant = NullVariant::real;
  std::int64_t step = 0;
  std::uint64_t n_elements = 0;
  double tau = 0.0;
  std::uint64_t s_max = 0;
  std::uint32_t n_steps = 0;
  bool ceiling_limited = false;
  bool zero_cascade = false;
  std::optional<double> v_abs;
  std::optional<double> v_rel;

  bool degenerate() const { return zero_cascade || ceiling_limited; }

  std::string id() const {
    return "rec:" + model_id + ":" + std::string(to_string(variant)) + ":" + std::to_string(step);
  }

  bool operator==(const TransportRecord&) const = default;
};

inline TransportRecord make_record(const SnapshotManifest& manifest, NullVariant variant,
                                   const CascadeResult& result) {
  TransportRecord r;
  r.family = manifest.family;
  r.model_id = manifest.model_id;
  r.variant = variant;
  r.step = manifest.step;
  r.n_elements = manifest.n_elements;
  r.tau = result.tau;
  r.s_max = result.s_max;
  r.n_steps = result.n_steps;
  r.ceiling_limited = result.ceiling_limited;
  r.zero_cascade = result.zero_cascade;
  r.v_abs = result.v_abs;
  r.v_rel = result.v_rel;
  return r;
}

// ---------------------------------------------------------------------------
// OLS in log-log space

enum class LogBase { ten, natural };

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares of log(ys) on log(xs). R^2 = 1 - SSres/SStot; for a flat
// target (SStot == 0) it is 1 when the residuals vanish, else 0.
inline LogLogFit loglog_fit(std::span<const double> xs, std::span<const double> ys,
                            LogBase base = LogBase::ten) {
  if (xs.size() != ys.size()) throw DomainError("loglog_fit: xs and ys differ in length");
  if (xs.size() < 3) throw DomainError("loglog_fit: at least three points are required");
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw DomainError("loglog_fit: inputs must be finite and positive");
    lx[i] = base == LogBase::ten ? std::log10(xs[i]) : std::log(xs[i]);
    ly[i] = base == LogBase::ten ? std::log10(ys[i]) : std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = lx[i] - mx;
    const double dy = ly[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DomainError("loglog_fit: zero variance in x");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += e * e;
  }
  if (syy == 0.0) {
    fit.r2 = ss_res == 0.0 ? 1.0 : 0.0;
  } else {
    fit.r2 = 1.0 - ss_res / syy;
  }
  return fit;
}

inline LogLogFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                            LogBase base = LogBase::ten) {
  return loglog_fit(std::span<const double>(xs), std::span<const double>(ys), base);
}

// ---------------------------------------------------------------------------
// Per-step fits

struct StepScalingFit {
  std::string family;
  NullVariant variant = NullVariant::real;
  std::int64_t step = 0;
  std::vector<std::uint64_t> scales_used;
  std::vector<std::string> model_ids;
  double D = 0.0, c = 0.0;
  double z = 0.0, c_z = 0.0;
  double beta = 0.0, c_beta = 0.0;
  double delta = 0.0, c_delta = 0.0;
  double r2_d = 0.0, r2_z = 0.0, r2_beta = 0.0, r2_delta = 0.0;
  std::size_t n_scales = 0;

  std::string id() const { return "fit:" + std::string(to_string(variant)) + ":" + std::to_string(step); }
};

struct StepFitOutcome {
  std::int64_t step = 0;
  std::optional<StepScalingFit> fit;
  std::string skip_reason;  // "too-few-scales", "all-degenerate", "degenerate-scale", "missing-scale"
};

// Fits D, z, beta, delta on one (family, step, variant) group. Records whose N is not in
// `scales` (when given) are ignored. Degenerate records are dropped; with
// `require_all_scales`, a single degenerate or missing scale skips the step.
inline StepFitOutcome fit_step(std::span<const TransportRecord> records, bool require_all_scales,
                               std::span<const std::uint64_t> scales = {}) {
  if (records.empty()) throw DataError("fit_step: no records");
  StepFitOutcome out;
  out.step = records.front().step;
  const auto& first = records.front();
  for (const auto& r : records) {
    if (r.step != first.step || r.variant != first.variant || r.family != first.family)
      throw DataError("fit_step: records do not share (family, step, variant)");
  }

  std::vector<const TransportRecord*> eligible;
  std::set<std::uint64_t> seen;
  for (const auto& r : records) {
    if (!scales.empty() && std::find(scales.begin(), scales.end(), r.n_elements) == scales.end()) continue;
    if (!seen.insert(r.n_elements).second)
      throw DataError("fit_step: duplicate scale N=" + std::to_string(r.n_elements) + " at step " +
                      std::to_string(r.step));
    eligible.push_back(&r);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const auto* a, const auto* b) { return a->n_elements < b->n_elements; });

  std::vector<const TransportRecord*> clean;
  for (const auto* r : eligible) {
    if (!r->degenerate()) clean.push_back(r);
  }

  if (require_all_scales) {
    if (!scales.empty() && eligible.size() < scales.size()) {
      out.skip_reason = "missing-scale";
      return out;
    }
    if (clean.size() != eligible.size() && !clean.empty()) {
      out.skip_reason = "degenerate-scale";
      return out;
    }
  }
  if (clean.empty() && !eligible.empty()) {
    out.skip_reason = "all-degenerate";
    return out;
  }
  if (clean.size() < 3) {
    out.skip_reason = "too-few-scales";
    return out;
  }

  std::vector<double> n, s, t, va, vr;
  StepScalingFit fit;
  fit.family = first.family;
  fit.variant = first.variant;
  fit.step = first.step;
  for (const auto* r : clean) {
    n.push_back(static_cast<double>(r->n_elements));
    s.push_back(static_cast<double>(r->s_max));
    t.push_back(static_cast<double>(r->n_steps));
    va.push_back(*r->v_abs);
    vr.push_back(*r->v_rel);
    fit.scales_used.push_back(r->n_elements);
    fit.model_ids.push_back(r->model_id);
  }
  const auto size_fit = loglog_fit(n, s);
  const auto dur_fit = loglog_fit(n, t);
  const auto abs_fit = loglog_fit(n, va);
  const auto rel_fit = loglog_fit(n, vr);
  fit.D = size_fit.slope;
  fit.c = size_fit.intercept;
  fit.r2_d = size_fit.r2;
  fit.z = dur_fit.slope;
  fit.c_z = dur_fit.intercept;
  fit.r2_z = dur_fit.r2;
  fit.beta = abs_fit.slope;
  fit.c_beta = abs_fit.intercept;
  fit.r2_beta = abs_fit.r2;
  fit.delta = rel_fit.slope;
  fit.c_delta = rel_fit.intercept;
  fit.r2_delta = rel_fit.r2;
  fit.n_scales = clean.size();
  out.fit = std::move(fit);
  return out;
}

inline double closure_residual(const StepScalingFit& f) {
  return std::max(std::abs(f.beta - (f.D - f.z)), std::abs(f.delta - (f.beta - 1.0)));
}

// ---------------------------------------------------------------------------
// Summary statistics

struct StepWindow {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool contains(std::int64_t step) const { return step >= lo && step <= hi; }
};

struct SampleStat {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> std;  // sample (ddof = 1); needs n >= 2
};

inline SampleStat sample_stat(std::span<const double> xs) {
  SampleStat s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  s.mean = mean;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct PlateauMean {
  std::string model_id;
  std::uint64_t n_elements = 0;
  std::size_t n = 0;
  double mean = 0.0;
};

struct WindowSummary {
  StepWindow window;
  bool empty = true;
  std::size_t n_fits = 0;
  SampleStat D, z, beta, delta;
  SampleStat r2_d, r2_z, r2_delta;
  double max_closure_residual = 0.0;
  std::vector<PlateauMean> vrel_plateaus;  // ordered by N
  std::optional<double> vrel_mean;         // mean of the plateau means
  std::optional<double> vrel_cv;           // sample std / mean of the plateau means
  std::vector<std::string> fit_ids;
};

// Stable-window statistics over unsmoothed per-step fits (one variant) and the matching
// transport records. Degenerate records never enter the plateau means.
inline WindowSummary window_summary(std::span<const StepScalingFit> fits,
                                    std::span<const TransportRecord> records, StepWindow window,
                                    std::span<const std::uint64_t> scales = {}) {
  if (window.hi < window.lo) throw DomainError("window_summary: empty window");
  WindowSummary ws;
  ws.window = window;
  std::vector<double> d, z, b, dl, r2d, r2z, r2dl;
  for (const auto& f : fits) {
    if (!window.contains(f.step)) continue;
    d.push_back(f.D);
    z.push_back(f.z);
    b.push_back(f.beta);
    dl.push_back(f.delta);
    r2d.push_back(f.r2_d);
    r2z.push_back(f.r2_z);
    r2dl.push_back(f.r2_delta);
    ws.max_closure_residual = std::max(ws.max_closure_residual, closure_residual(f));
    ws.fit_ids.push_back(f.id());
  }
  ws.n_fits = d.size();
  ws.empty = d.empty();
  ws.D = sample_stat(d);
  ws.z = sample_stat(z);
  ws.beta = sample_stat(b);
  ws.delta = sample_stat(dl);
  ws.r2_d = sample_stat(r2d);
  ws.r2_z = sample_stat(r2z);
  ws.r2_delta = sample_stat(r2dl);

  std::map<std::pair<std::uint64_t, std::string>, std::vector<double>> per_model;
  for (const auto& r : records) {
    if (!window.contains(r.step) || r.degenerate() || !r.v_rel) continue;
    if (!scales.empty() && std::find(scales.begin(), scales.end(), r.n_elements) == scales.end()) continue;
    per_model[{r.n_elements, r.model_id}].push_back(*r.v_rel);
  }
  std::vector<double> means;
  for (const auto& [key, values] : per_model) {
    const auto st = sample_stat(values);
    ws.vrel_plateaus.push_back({key.second, key.first, values.size(), *st.mean});
    means.push_back(*st.mean);
  }
  const auto plateau_stat = sample_stat(means);
  ws.vrel_mean = plateau_stat.mean;
  if (plateau_stat.std && plateau_stat.mean && *plateau_stat.mean != 0.0)
    ws.vrel_cv = *plateau_stat.std / *plateau_stat.mean;
  return ws;
}

// Centered running median; windows shrink at the edges. Display only.
inline std::vector<std::pair<std::int64_t, double>> rolling_median(
    std::span<const std::pair<std::int64_t, double>> series, std::size_t window_len = 11) {
  if (series.empty()) throw DomainError("rolling_median: empty series");
  if (window_len % 2 == 0) throw DomainError("rolling_median: window length must be odd");
  const std::size_t half = window_len / 2;
  std::vector<std::pair<std::int64_t, double>> out;
  out.reserve(series.size());
  std::vector<double> buf;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(series.size() - 1, i + half);
    buf.clear();
    for (std::size_t k = lo; k <= hi; ++k) buf.push_back(series[k].second);
    std::sort(buf.begin(), buf.end());
    const std::size_t m = buf.size();
    const double med = m % 2 == 1 ? buf[m / 2] : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
    out.emplace_back(series[i].first, med);
  }
  return out;
}

struct Tertile {
  std::string label;
  std::size_t n = 0;
  std::optional<std::int64_t> step_lo, step_hi;
  SampleStat delta;
};

struct TertileSummary {
  std::array<Tertile, 3> tertiles;
  SampleStat overall;
  std::vector<std::int64_t> steps;
};

// Delta = channel(real) - channel(n0) on the in-window steps fitted in both, split by
// count into early / mid / late thirds (remainders go to the earlier thirds).
inline TertileSummary tertile_deltas(std::span<const StepScalingFit> real_fits,
                              std::span<const StepScalingFit> n0_fits, StepWindow window,
                              double StepScalingFit::*channel = &StepScalingFit::z) {
  std::map<std::int64_t, double> null_by_step;
  for (const auto& f : n0_fits) {
    if (window.contains(f.step)) null_by_step[f.step] = f.*channel;
  }
  std::vector<std::pair<std::int64_t, double>> deltas;
  for (const auto& f : real_fits) {
    if (!window.contains(f.step)) continue;
    if (auto it = null_by_step.find(f.step); it != null_by_step.end())
      deltas.emplace_back(f.step, f.*channel - it->second);
  }
  if (deltas.empty()) throw DataError("tertile_deltas: no common in-window steps");
  std::sort(deltas.begin(), deltas.end());

  TertileSummary ts;
  const std::size_t n = deltas.size();
  const std::size_t base = n / 3, rem = n % 3;
  const std::array<std::size_t, 3> sizes{base + (rem > 0), base + (rem > 1), base};
  const std::array<const char*, 3> labels{"early", "mid", "late"};
  std::size_t pos = 0;
  std::vector<double> all;
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<double> vals;
    Tertile& tt = ts.tertiles[t];
    tt.label = labels[t];
    for (std::size_t k = 0; k < sizes[t]; ++k, ++pos) {
      vals.push_back(deltas[pos].second);
      if (!tt.step_lo) tt.step_lo = deltas[pos].first;
      tt.step_hi = deltas[pos].first;
    }
    tt.n = vals.size();
    tt.delta = sample_stat(vals);
  }
  for (const auto& [step, v] : deltas) {
    all.push_back(v);
    ts.steps.push_back(step);
  }
  ts.overall = sample_stat(all);
  return ts;
}

}  // namespace fsgt
