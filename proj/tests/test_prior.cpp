#include <gtest/gtest.h>

#include <random>

#include "sigdemand/prior.hpp"
#include "support.hpp"

using namespace sigdemand;

TEST(AlphaPrior, SymmetricCountsFloorVariance) {
  std::vector<PhaseCountSeries> s{{1, std::vector<int>(8, 12)}, {2, std::vector<int>(8, 12)}};
  const auto p = build_alpha_prior(s);
  EXPECT_FALSE(p.flat_fallback);
  EXPECT_EQ(p.sample_count, 8);
  for (const auto& ph : p.phases) {
    EXPECT_DOUBLE_EQ(ph.mean_share, 0.5);
    EXPECT_DOUBLE_EQ(ph.variance, kMinShareStddev * kMinShareStddev);
  }
}

TEST(AlphaPrior, SampleStatistics) {
  // Phase 1 shares 0.2, 0.3, 0.4 over three bins of ten CVs.
  std::vector<PhaseCountSeries> s{{1, {2, 3, 4}}, {2, {8, 7, 6}}};
  const auto p = build_alpha_prior(s, kMinShareStddev, 3);
  ASSERT_FALSE(p.flat_fallback);
  EXPECT_NEAR(p.phases[0].mean_share, 0.3, 1e-15);
  EXPECT_NEAR(p.phases[0].variance, 0.01, 1e-15);
  EXPECT_NEAR(p.phases[1].mean_share, 0.7, 1e-15);
}

TEST(AlphaPrior, EmptyBinsExcluded) {
  std::vector<PhaseCountSeries> with_gap{{1, {2, 0, 3, 4}}, {2, {8, 0, 7, 6}}};
  std::vector<PhaseCountSeries> without{{1, {2, 3, 4}}, {2, {8, 7, 6}}};
  const auto a = build_alpha_prior(with_gap, kMinShareStddev, 3);
  const auto b = build_alpha_prior(without, kMinShareStddev, 3);
  EXPECT_EQ(a.sample_count, 3);
  EXPECT_DOUBLE_EQ(a.phases[0].mean_share, b.phases[0].mean_share);
  EXPECT_DOUBLE_EQ(a.phases[0].variance, b.phases[0].variance);
}

TEST(AlphaPrior, TooFewBinsFallsBackToFlat) {
  std::vector<PhaseCountSeries> s{{1, {2, 3, 4}}, {2, {8, 7, 6}}, {3, {1, 1, 1}}};
  const auto p = build_alpha_prior(s);
  EXPECT_TRUE(p.flat_fallback);
  for (const auto& ph : p.phases) {
    EXPECT_DOUBLE_EQ(ph.mean_share, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(ph.variance, kFlatFallbackStddev * kFlatFallbackStddev);
  }
}

TEST(AlphaPrior, MeansSumToOneAndScaleFree) {
  std::mt19937_64 rng(17);
  std::poisson_distribution<int> count(9.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PhaseCountSeries> s(4), scaled(4);
    for (int z = 0; z < 4; ++z) {
      s[z].phase_id = scaled[z].phase_id = z + 1;
      for (int i = 0; i < 12; ++i) {
        const int c = count(rng);
        s[z].counts.push_back(c);
        scaled[z].counts.push_back(3 * c);
      }
    }
    const auto a = build_alpha_prior(s);
    const auto b = build_alpha_prior(scaled);
    double sum = 0.0;
    for (std::size_t z = 0; z < 4; ++z) {
      sum += a.phases[z].mean_share;
      EXPECT_NEAR(a.phases[z].mean_share, b.phases[z].mean_share, 1e-14);
      EXPECT_NEAR(a.phases[z].variance, b.phases[z].variance, 1e-14);
      EXPECT_GE(a.phases[z].variance, kMinShareStddev * kMinShareStddev);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Support, Examples) {
  using sigdemand::testing::phase_config;
  std::vector<PhaseConfig> eight;
  for (int z = 1; z <= 8; ++z) eight.push_back(phase_config(z, 2));
  EXPECT_DOUBLE_EQ(lambda0_support(eight, 2.0), 8.0);
  const std::vector<PhaseConfig> one{phase_config(1)};
  EXPECT_DOUBLE_EQ(lambda0_support(one, 2.0), 0.5);
  EXPECT_THROW(lambda0_support(one, 0.0), Error);
  EXPECT_THROW(make_prior({}, 0.0), Error);
}
