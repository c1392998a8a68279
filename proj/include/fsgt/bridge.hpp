#pragma once

// External-performance exponents, Pearson correlations with descriptive two-sided
// p-values, and learning-rate-partial correlations.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsgt/error.hpp"
#include "fsgt/scaling.hpp"

namespace fsgt {

enum class MetricKind { perplexity, mean_accuracy };

inline std::string_view to_string(MetricKind k) {
  return k == MetricKind::perplexity ? "perplexity" : "mean_accuracy";
}

inline MetricKind metric_kind_from_string(std::string_view text) {
  if (text == "perplexity") return MetricKind::perplexity;
  if (text == "mean_accuracy") return MetricKind::mean_accuracy;
  throw ConfigError("unknown metric kind '" + std::string(text) + "'");
}

struct MetricEntry {
  std::string model_id;
  double n = 0.0;  // nominal parameter count or analysed element count
  std::int64_t step = 0;
  double value = 0.0;
};

struct ExternalMetricSeries {
  std::string family;
  MetricKind metric_kind = MetricKind::perplexity;
  std::vector<MetricEntry> entries;
  double floor = 1e-6;
};

enum class ScheduleKind { linear_warmup_linear, linear_warmup_cosine };

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::linear_warmup_cosine;
  double eta_max = 1.0;
  double eta_min = 0.0;
  std::int64_t t_warm = 1;
  std::int64_t t_total = 2;

  void validate() const {
    if (!(eta_min >= 0.0 && eta_min <= eta_max)) throw ConfigError("lr schedule: need 0 <= eta_min <= eta_max");
    if (!(t_warm > 0 && t_warm < t_total)) throw ConfigError("lr schedule: need 0 < t_warm < t_total");
  }
};

inline ScheduleKind schedule_kind_from_string(std::string_view text) {
  if (text == "linear_warmup_linear") return ScheduleKind::linear_warmup_linear;
  if (text == "linear_warmup_cosine") return ScheduleKind::linear_warmup_cosine;
  throw ConfigError("unknown schedule kind '" + std::string(text) + "'");
}

inline double reconstruct_lr(const LrSchedule& s, std::int64_t t) {
  s.validate();
  if (t < 0 || t > s.t_total) throw DomainError("reconstruct_lr: step " + std::to_string(t) + " out of range");
  if (t <= s.t_warm) return s.eta_max * static_cast<double>(t) / static_cast<double>(s.t_warm);
  const double frac = static_cast<double>(t - s.t_warm) / static_cast<double>(s.t_total - s.t_warm);
  if (s.kind == ScheduleKind::linear_warmup_linear) return s.eta_max - (s.eta_max - s.eta_min) * frac;
  return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

// Log-log slope of max(value, floor) against N over the entries at `step`, optionally
// restricted to an evaluation line of model ids. nullopt when fewer than 3 scales remain.
inline std::optional<LogLogFit> fit_external_exponent(const ExternalMetricSeries& series, std::int64_t step,
                                                      std::span<const std::string> evaluation_line = {}) {
  if (!(series.floor > 0.0)) throw DomainError("fit_external_exponent: floor must be > 0");
  std::vector<std::pair<double, double>> points;
  for (const auto& e : series.entries) {
    if (e.step != step) continue;
    if (!evaluation_line.empty() &&
        std::find(evaluation_line.begin(), evaluation_line.end(), e.model_id) == evaluation_line.end())
      continue;
    if (!std::isfinite(e.value)) throw DataError("fit_external_exponent: non-finite metric value");
    points.emplace_back(e.n, std::max(e.value, series.floor));
  }
  if (points.size() < 3) return std::nullopt;
  std::sort(points.begin(), points.end());
  std::vector<double> xs, ys;
  for (auto [x, y] : points) {
    xs.push_back(x);
    ys.push_back(y);
  }
  return loglog_fit(xs, ys);
}

struct Correlation {
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  bool degenerate = false;
};

namespace detail {

inline double centered_ss(std::span<const double> v, double& mean) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss;
}

}  // namespace detail

// Two-sided p from t = r sqrt((n-2)/(1-r^2)) with n-2 degrees of freedom. The p-value
// is descriptive; no correction for serial correlation along a trajectory.
inline double pearson_p_value(double r, std::size_t n) {
  if (n < 3) return 1.0;
  const double one_minus = 1.0 - r * r;
  if (one_minus <= 0.0) return std::numeric_limits<double>::min();
  const double t = std::abs(r) * std::sqrt(static_cast<double>(n - 2) / one_minus);
  boost::math::students_t dist(static_cast<double>(n - 2));
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson: length mismatch");
  if (x.size() < 3) throw DomainError("pearson: at least three points are required");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("pearson: non-finite input");
  }
  Correlation c;
  c.n = x.size();
  double mx = 0.0, my = 0.0;
  const double sxx = detail::centered_ss(x, mx);
  const double syy = detail::centered_ss(y, my);
  if (sxx == 0.0 || syy == 0.0) {
    c.degenerate = true;
    c.r = 0.0;
    c.p = 1.0;
    return c;
  }
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my);
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  c.p = pearson_p_value(c.r, c.n);
  return c;
}

inline Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(std::span<const double>(x), std::span<const double>(y));
}

// Residuals of v after OLS on eta with an intercept.
inline std::vector<double> residualize(std::span<const double> v, std::span<const double> eta) {
  double mv = 0.0, me = 0.0;
  detail::centered_ss(v, mv);
  const double see = detail::centered_ss(eta, me);
  double sve = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sve += (v[i] - mv) * (eta[i] - me);
  const double slope = see == 0.0 ? 0.0 : sve / see;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mv) - slope * (eta[i] - me);
  return out;
}

// Pearson correlation of x and y after linearly removing eta from both. Flagged
// degenerate (r = 0) when either residual variance falls below 1e-15 of the original.
inline Correlation lr_partial_pearson(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> eta) {
  if (x.size() != y.size() || x.size() != eta.size()) throw DomainError("lr_partial_pearson: length mismatch");
  if (x.size() < 4) throw DomainError("lr_partial_pearson: at least four points are required");
  const auto rx = residualize(x, eta);
  const auto ry = residualize(y, eta);
  double m = 0.0;
  const double sx = detail::centered_ss(x, m);
  const double sy = detail::centered_ss(y, m);
  const double srx = detail::centered_ss(rx, m);
  const double sry = detail::centered_ss(ry, m);
  Correlation c;
  c.n = x.size();
  if (sx == 0.0 || sy == 0.0 || srx < 1e-15 * sx || sry < 1e-15 * sy) {
    c.degenerate = true;
    return c;
  }
  c = pearson(rx, ry);
  return c;
}

inline Correlation lr_partial_pearson(const std::vector<double>& x, const std::vector<double>& y,
                                      const std::vector<double>& eta) {
  return lr_partial_pearson(std::span<const double>(x), std::span<const double>(y), std::span<const double>(eta));
}

}  // namespace fsgt
