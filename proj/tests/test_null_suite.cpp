#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <random>

#include "fsgt/null_suite.hpp"

namespace fsgt {
namespace {

FieldSnapshot real_field(std::size_t n, std::int64_t step) {
  FieldSnapshot s;
  s.manifest.model_id = "m";
  s.manifest.step = step;
  s.manifest.n_elements = n;
  s.manifest.field_kind = FieldKind::raw_gradient;
  std::mt19937_64 gen(static_cast<std::uint64_t>(step) * 31 + 5);
  std::lognormal_distribution<float> ln(0.0f, 1.5f);
  s.values.resize(n);
  for (auto& v : s.values) v = ln(gen) - 2.0f;
  return s;
}

std::vector<std::uint32_t> sorted_bits(const std::vector<float>& v) {
  std::vector<std::uint32_t> bits(v.size());
  std::transform(v.begin(), v.end(), bits.begin(), [](float f) { return std::bit_cast<std::uint32_t>(f); });
  std::sort(bits.begin(), bits.end());
  return bits;
}

TEST(NullSuite, VariantNames) {
  EXPECT_EQ(null_variant_from_string("n2"), NullVariant::n2);
  EXPECT_EQ(to_string(NullVariant::n1), "n1");
  EXPECT_THROW(null_variant_from_string("n3"), ConfigError);
}

TEST(NullSuite, PermutationPreservesMultisetBitwise) {
  const auto real = real_field(10000, 3);
  const auto n2 = generate_null(real, NullVariant::n2);
  EXPECT_EQ(sorted_bits(n2.values), sorted_bits(real.values));
  EXPECT_NE(n2.values, real.values);
  EXPECT_EQ(n2.manifest.field_kind, FieldKind::null_n2);
}

TEST(NullSuite, DeterministicPerStepSeeds) {
  const auto real = real_field(2000, 7);
  for (auto v : {NullVariant::n0, NullVariant::n1, NullVariant::n2}) {
    const auto a = generate_null(real, v);
    const auto b = generate_null(real, v);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.manifest.seed, std::optional<std::uint64_t>(42 + 7));
    const auto other = generate_null(real, v, 43);
    EXPECT_NE(other.values, a.values);
  }
  // Same base seed, different step gives an independent stream.
  auto shifted = real;
  shifted.manifest.step = 8;
  EXPECT_NE(generate_null(shifted, NullVariant::n0).values, generate_null(real, NullVariant::n0).values);
}

TEST(NullSuite, N0IgnoresRealValues) {
  auto a = real_field(500, 2);
  auto b = real_field(500, 2);
  for (auto& v : b.values) v *= 3.0f;
  EXPECT_EQ(generate_null(a, NullVariant::n0).values, generate_null(b, NullVariant::n0).values);
}

TEST(NullSuite, MomentMatchHandCase) {
  const std::vector<float> v{1, 2, 3, 4};
  const auto mm = moment_match(v);
  EXPECT_DOUBLE_EQ(mm.mean, 2.5);
  EXPECT_DOUBLE_EQ(mm.std, std::sqrt(1.25));
  EXPECT_THROW(moment_match(std::span<const float>{}), DataError);
}

TEST(NullSuite, N1MatchesFirstTwoMoments) {
  const auto real = real_field(200000, 1);
  const auto target = moment_match(real.values);
  const auto n1 = generate_null(real, NullVariant::n1);
  const auto got = moment_match(n1.values);
  EXPECT_NEAR(got.mean, target.mean, 5.0 * target.std / std::sqrt(200000.0));
  EXPECT_NEAR(got.std / target.std, 1.0, 0.01);
}

TEST(NullSuite, N0IsStandardNormal) {
  const auto n0 = gaussian_field(200000, 0.0, 1.0, 99);
  const auto mm = moment_match(n0);
  EXPECT_NEAR(mm.mean, 0.0, 0.01);
  EXPECT_NEAR(mm.std, 1.0, 0.01);
}

TEST(NullSuite, RejectsRealAndEmpty) {
  const auto real = real_field(10, 0);
  EXPECT_THROW(generate_null(real, NullVariant::real), DomainError);
  FieldSnapshot empty;
  EXPECT_THROW(generate_null(empty, NullVariant::n0), DataError);
}

TEST(NullSuite, DecompositionHandCase) {
  const auto d = decompose(0.5, 0.1, 0.3);
  EXPECT_DOUBLE_EQ(d.dist, 0.3 - 0.1);
  EXPECT_DOUBLE_EQ(d.assign, 0.5 - 0.3);
  EXPECT_NEAR(d.total, 0.4, 1e-15);
  EXPECT_THROW(decompose(std::nan(""), 0, 0), DomainError);
}

TEST(NullSuite, DecompositionIdentityIsExact) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(gen), b = u(gen), c = u(gen);
    const auto d = decompose(a, b, c);
    EXPECT_EQ(d.total, d.dist + d.assign);
    EXPECT_NEAR(d.total, a - b, 1e-14);
  }
}

}  // namespace
}  // namespace fsgt
