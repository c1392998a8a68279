#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fsgt/scaling.hpp"

namespace fsgt {
namespace {

TransportRecord rec(std::uint64_t n, std::int64_t step, std::uint64_t s, std::uint32_t t,
                    NullVariant v = NullVariant::real) {
  TransportRecord r;
  r.family = "f";
  r.model_id = "m" + std::to_string(n);
  r.variant = v;
  r.step = step;
  r.n_elements = n;
  r.s_max = s;
  r.n_steps = t;
  r.zero_cascade = s == 0;
  if (!r.zero_cascade) {
    r.v_abs = static_cast<double>(s) / t;
    r.v_rel = static_cast<double>(s) / (static_cast<double>(n) * t);
  }
  return r;
}

TEST(LogLogFit, HandDerivedCase) {
  const auto f = loglog_fit(std::vector<double>{1, 10, 100}, std::vector<double>{1, 10, 10});
  EXPECT_NEAR(f.slope, 0.5, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(f.r2, 0.75, 1e-12);
}

TEST(LogLogFit, ExactPowerLawAndBases) {
  std::vector<double> x{1e5, 2e5, 4e5, 8e5}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.8));
  const auto f = loglog_fit(x, y);
  EXPECT_NEAR(f.slope, 0.8, 1e-12);
  EXPECT_NEAR(f.intercept, std::log10(3.0), 1e-10);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  const auto g = loglog_fit(x, y, LogBase::natural);
  EXPECT_NEAR(g.slope, 0.8, 1e-12);
  EXPECT_NEAR(g.intercept, std::log(3.0), 1e-10);
}

TEST(LogLogFit, FlatTarget) {
  const auto f = loglog_fit(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5});
  EXPECT_EQ(f.slope, 0.0);
  EXPECT_EQ(f.r2, 1.0);
}

TEST(LogLogFit, Rejections) {
  EXPECT_THROW(loglog_fit(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(loglog_fit(std::vector<double>{1, 2, 3}, std::vector<double>{1, 0, 2}), DomainError);
  EXPECT_THROW(loglog_fit(std::vector<double>{2, 2, 2}, std::vector<double>{1, 3, 2}), DomainError);
  EXPECT_THROW(loglog_fit(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), DomainError);
}

TEST(FitStep, ClosureHoldsOnRandomRecords) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TransportRecord> rs;
    for (std::uint64_t n : {1000, 2000, 4000, 8000, 16000})
      rs.push_back(rec(n, 3, 1 + gen() % 100000, 1 + static_cast<std::uint32_t>(gen() % 500)));
    const auto out = fit_step(rs, false);
    ASSERT_TRUE(out.fit);
    EXPECT_LE(closure_residual(*out.fit), 1e-9);
    EXPECT_EQ(out.fit->n_scales, 5u);
  }
}

TEST(FitStep, RecoversKnownExponents) {
  std::vector<TransportRecord> rs;
  for (std::uint64_t n : {100, 10000, 1000000}) {
    const auto t = static_cast<std::uint32_t>(std::llround(std::sqrt(static_cast<double>(n))));
    rs.push_back(rec(n, 0, n, t));
  }
  const auto f = *fit_step(rs, false).fit;
  EXPECT_NEAR(f.D, 1.0, 1e-12);
  EXPECT_NEAR(f.z, 0.5, 1e-12);
  EXPECT_NEAR(f.beta, f.D - f.z, 1e-12);
  EXPECT_NEAR(f.delta, f.beta - 1.0, 1e-12);
  EXPECT_EQ(f.id(), "fit:real:0");
}

TEST(FitStep, DegenerateHandling) {
  std::vector<TransportRecord> rs{rec(1000, 1, 50, 5), rec(2000, 1, 100, 6), rec(4000, 1, 200, 7),
                                  rec(8000, 1, 400, 8)};
  rs[1].ceiling_limited = true;
  const auto lenient = fit_step(rs, false);
  ASSERT_TRUE(lenient.fit);
  EXPECT_EQ(lenient.fit->scales_used, (std::vector<std::uint64_t>{1000, 4000, 8000}));
  const auto strict = fit_step(rs, true);
  EXPECT_FALSE(strict.fit);
  EXPECT_EQ(strict.skip_reason, "degenerate-scale");

  rs[2] = rec(4000, 1, 0, 0);
  EXPECT_EQ(fit_step(rs, false).skip_reason, "too-few-scales");
  for (auto& r : rs) r.zero_cascade = true;
  EXPECT_EQ(fit_step(rs, false).skip_reason, "all-degenerate");
}

TEST(FitStep, ScaleFilteringAndErrors) {
  std::vector<TransportRecord> rs{rec(1000, 1, 50, 5), rec(2000, 1, 100, 6), rec(4000, 1, 200, 7)};
  const std::vector<std::uint64_t> scales{1000, 2000, 4000, 8000};
  EXPECT_TRUE(fit_step(rs, false, scales).fit);
  EXPECT_EQ(fit_step(rs, true, scales).skip_reason, "missing-scale");
  rs.push_back(rec(2000, 1, 3, 3));
  EXPECT_THROW(fit_step(rs, false), DataError);
  rs.back() = rec(500, 2, 3, 3);
  EXPECT_THROW(fit_step(rs, false), DataError);
  EXPECT_THROW(fit_step(std::span<const TransportRecord>{}, false), DataError);
}

TEST(SampleStat, HandCases) {
  const auto s = sample_stat(std::vector<double>{1.0, 1.1, 0.9});
  EXPECT_NEAR(*s.mean, 1.0, 1e-15);
  EXPECT_NEAR(*s.std, 0.1, 1e-15);
  const auto one = sample_stat(std::vector<double>{2.0});
  EXPECT_EQ(*one.mean, 2.0);
  EXPECT_FALSE(one.std);
  EXPECT_FALSE(sample_stat(std::vector<double>{}).mean);
}

TEST(WindowSummary, PlateausExcludeDegenerateAndOutOfWindow) {
  std::vector<TransportRecord> rs;
  for (std::int64_t step : {0, 1, 2, 3}) {
    rs.push_back(rec(100, step, 100, 1));   // v_rel 1
    rs.push_back(rec(200, step, 800, 2));   // v_rel 2
    rs.push_back(rec(400, step, 4800, 4));  // v_rel 3
  }
  rs.push_back(rec(100, 2, 0, 0));
  rs.back().model_id = "zero";
  auto ceiling = rec(200, 2, 9999, 500);
  ceiling.ceiling_limited = true;
  ceiling.model_id = "ceil";
  rs.push_back(ceiling);
  const auto ws = window_summary({}, rs, {1, 3});
  ASSERT_EQ(ws.vrel_plateaus.size(), 3u);
  EXPECT_EQ(ws.vrel_plateaus[0].n, 3u);
  EXPECT_DOUBLE_EQ(*ws.vrel_mean, 2.0);
  EXPECT_NEAR(*ws.vrel_cv, 0.5, 1e-15);
  EXPECT_TRUE(ws.empty);
  EXPECT_THROW(window_summary({}, rs, {3, 1}), DomainError);
}

TEST(WindowSummary, FitStatistics) {
  std::vector<StepScalingFit> fits(4);
  const double ds[] = {1.0, 1.1, 0.9, 7.0};
  for (int i = 0; i < 4; ++i) {
    fits[i].step = i;
    fits[i].D = ds[i];
    fits[i].z = 0.5;
    fits[i].beta = ds[i] - 0.5;
    fits[i].delta = fits[i].beta - 1.0;
  }
  const auto ws = window_summary(fits, {}, {0, 2});
  EXPECT_EQ(ws.n_fits, 3u);
  EXPECT_NEAR(*ws.D.mean, 1.0, 1e-15);
  EXPECT_NEAR(*ws.D.std, 0.1, 1e-15);
  EXPECT_EQ(ws.fit_ids, (std::vector<std::string>{"fit:real:0", "fit:real:1", "fit:real:2"}));
  EXPECT_LE(ws.max_closure_residual, 1e-15);
}

TEST(RollingMedian, CenteredWithShrinkingEdges) {
  std::vector<std::pair<std::int64_t, double>> s{{0, 5}, {1, 1}, {2, 4}, {3, 2}, {4, 3}};
  const auto m = rolling_median(s, 3);
  const std::vector<double> expect{3, 4, 2, 3, 2.5};
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(m[i].first, static_cast<std::int64_t>(i));
    EXPECT_DOUBLE_EQ(m[i].second, expect[i]);
  }
  EXPECT_THROW(rolling_median(s, 4), DomainError);
}

TEST(Tertiles, SplitByCountWithRemaindersEarly) {
  std::vector<StepScalingFit> real(7), null(7);
  for (int i = 0; i < 7; ++i) {
    real[i].step = null[i].step = i * 10;
    real[i].z = i;
    null[i].z = 0.5;
  }
  const auto t = tertile_deltas(real, null, {0, 60});
  EXPECT_EQ(t.tertiles[0].n, 3u);
  EXPECT_EQ(t.tertiles[1].n, 2u);
  EXPECT_EQ(t.tertiles[2].n, 2u);
  EXPECT_DOUBLE_EQ(*t.tertiles[0].delta.mean, 0.5);
  EXPECT_EQ(*t.tertiles[2].step_lo, 50);
  EXPECT_DOUBLE_EQ(*t.overall.mean, 2.5);
  EXPECT_THROW(tertile_deltas(real, null, {100, 200}), DataError);
}

}  // namespace
}  // namespace fsgt
