#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "adpm/error.hpp"
#include "adpm/spp_pool.hpp"
#include "oracles.hpp"

using namespace adpm;

namespace {

FeatureMap ramp(std::size_t side) {
  auto m = FeatureMap::zeros(side, side, 1);
  std::iota(m.values.begin(), m.values.end(), 0.0f);
  return m;
}

}  // namespace

TEST(PlanGrid, FormulaExamples) {
  const auto g = plan_grid(13, 4);
  EXPECT_EQ(g.window, 4u);
  EXPECT_EQ(g.stride, 3u);
  const auto global = plan_grid(13, 1);
  EXPECT_EQ(global.window, 13u);
  EXPECT_EQ(global.stride, 13u);
  EXPECT_THROW(plan_grid(3, 4), UnsupportedSizeError);
  EXPECT_THROW(plan_grid(5, 0), ValidationError);
}

TEST(PlanGrid, WindowsCoverEveryIndexAndStayInBounds) {
  for (std::size_t a = 1; a <= 40; ++a) {
    for (std::size_t n = 1; n <= a && n <= 8; ++n) {
      const auto g = plan_grid(a, n);
      EXPECT_GE(g.window, g.stride);
      EXPECT_GE(g.stride, 1u);
      std::vector<int> covered(a, 0);
      for (std::size_t k = 0; k < n; ++k) {
        const auto [lo, hi] = g.bounds(k);
        EXPECT_EQ(lo, k * g.stride);
        EXPECT_LT(lo, hi);
        EXPECT_LE(hi, a);
        for (std::size_t x = lo; x < hi; ++x) covered[x] = 1;
      }
      EXPECT_EQ(std::accumulate(covered.begin(), covered.end(), 0), static_cast<int>(a))
          << "a=" << a << " n=" << n;
    }
  }
}

TEST(PoolLevel, SmallExamples) {
  auto m = FeatureMap::zeros(2, 2, 1);
  m.values = {1, 2, 3, 4};
  EXPECT_EQ(pool_level(m, plan_grid(2, 1)), std::vector<double>{4});
  EXPECT_EQ(pool_level(m, plan_grid(2, 2)), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(pool_level(ramp(4), plan_grid(4, 2)), (std::vector<double>{5, 7, 13, 15}));
}

TEST(PoolLevel, ShapeMismatch) {
  EXPECT_THROW(pool_level(ramp(4), plan_grid(5, 2)), ValidationError);
}

TEST(SppDescriptor, LengthAndOracle) {
  auto big = FeatureMap::zeros(6, 6, 256);
  EXPECT_EQ(spp_descriptor(big).size(), 5376u);

  std::mt19937_64 rng(13);
  const auto m = adpm::testing::random_map(13, 2, rng);
  const auto d = spp_descriptor(m);
  ASSERT_EQ(d.size(), 42u);
  const std::vector<std::size_t> levels{1, 2, 4};
  EXPECT_EQ(d, adpm::testing::spp_oracle(m, levels));
}

TEST(SppDescriptor, ConstantMap) {
  auto m = FeatureMap::zeros(7, 7, 3);
  std::fill(m.values.begin(), m.values.end(), 2.5f);
  for (double v : spp_descriptor(m)) EXPECT_EQ(v, 2.5);
}

TEST(SppDescriptor, LengthIndependentOfSide) {
  for (std::size_t a = 4; a <= 20; ++a) {
    EXPECT_EQ(spp_descriptor(FeatureMap::zeros(a, a, 3)).size(), 63u);
  }
}

TEST(SppDescriptor, ShiftAndChannelPermutation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t a = 4 + trial % 9, c = 3;
    const auto m = adpm::testing::random_map(a, c, rng);
    const auto base = spp_descriptor(m);

    auto shifted = m;
    for (auto& v : shifted.values) v += 0.5f;
    const auto ds = spp_descriptor(shifted);
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(ds[i], static_cast<double>(static_cast<float>(base[i]) + 0.5f));
    }

    // Rotate channels: output channel k takes input channel (k + 1) % c.
    auto perm = m;
    for (std::size_t cell = 0; cell < m.cells(); ++cell) {
      for (std::size_t k = 0; k < c; ++k) {
        perm.values[cell * c + k] = m.values[cell * c + (k + 1) % c];
      }
    }
    const auto dp = spp_descriptor(perm);
    for (std::size_t block = 0; block < base.size() / c; ++block) {
      for (std::size_t k = 0; k < c; ++k) {
        EXPECT_EQ(dp[block * c + k], base[block * c + (k + 1) % c]);
      }
    }
  }
}

TEST(SppDescriptor, Errors) {
  EXPECT_THROW(spp_descriptor(FeatureMap::zeros(3, 3, 1)), UnsupportedSizeError);
  EXPECT_THROW(spp_descriptor(FeatureMap::zeros(4, 5, 1)), ValidationError);
  SppConfig bad;
  bad.levels = {2, 1};
  EXPECT_THROW(spp_descriptor(FeatureMap::zeros(4, 4, 1), bad), ValidationError);
}
