#include <gtest/gtest.h>

#include <random>

#include "adpm/error.hpp"
#include "adpm/kernel_engine.hpp"
#include "oracles.hpp"

using namespace adpm;
using adpm::testing::random_histogram;

namespace {

LayerHistogram hist(std::vector<std::uint32_t> c) { return LayerHistogram{std::move(c)}; }

Matrix from_rows(const std::vector<std::vector<double>>& v) {
  Matrix m(v.size(), v.front().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v[i].size(); ++j) m(i, j) = v[i][j];
  }
  return m;
}

}  // namespace

TEST(IntersectionKernel, Examples) {
  EXPECT_EQ(intersection_kernel(hist({3, 1, 0}), hist({3, 1, 0})), 4.0);
  EXPECT_EQ(intersection_kernel(hist({4, 0}), hist({0, 4})), 0.0);
  EXPECT_EQ(intersection_kernel(hist({2, 3, 1}), hist({1, 5, 0})), 4.0);
  EXPECT_THROW(intersection_kernel(hist({1, 2}), hist({1})), ValidationError);
}

TEST(GramMatrix, SmallCases) {
  const std::vector<LayerHistogram> one{hist({2, 5, 1})};
  const auto g1 = gram_matrix(one);
  ASSERT_EQ(g1.rows(), 1u);
  EXPECT_EQ(g1(0, 0), 8.0);

  const std::vector<LayerHistogram> two{hist({1, 2}), hist({1, 2})};
  const auto g2 = gram_matrix(two);
  for (double v : g2.values()) EXPECT_EQ(v, 3.0);
}

TEST(GramMatrix, MatchesOracleSymmetricDominantDiagonalAndPsd) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> h;
    for (int i = 0; i < 5 + trial; ++i) h.push_back(random_histogram(12, 36, rng));
    const auto g = gram_matrix(h);
    EXPECT_EQ(g, adpm::testing::naive_gram(h, h));
    EXPECT_TRUE(is_symmetric(g));
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) EXPECT_GE(g(i, i), g(i, j));
    }
    EXPECT_GE(adpm::testing::min_eigenvalue(g), -1e-8 * adpm::testing::trace(g));
  }
}

TEST(IdealMatrix, Examples) {
  const std::vector<std::size_t> l{0, 0, 1};
  EXPECT_EQ(ideal_matrix(l).y, from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}}));
  const std::vector<std::size_t> same{2, 2, 2};
  const auto all_same = ideal_matrix(same);
  for (double v : all_same.y.values()) EXPECT_EQ(v, 1.0);
  const std::vector<std::size_t> distinct{0, 1, 2};
  EXPECT_EQ(ideal_matrix(distinct).y, from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
}

TEST(FuseKernels, VertexIdenticalAndWeightedSum) {
  const auto k1 = from_rows({{3, 1, 2}, {1, 4, 0}, {2, 0, 5}});
  const auto k2 = from_rows({{6, 2, 1}, {2, 2, 3}, {1, 3, 7}});
  const std::vector<Matrix> grams{k1, k2};
  const std::vector<double> vertex{1.0, 0.0};
  EXPECT_EQ(fuse_kernels(grams, vertex), k1);

  const std::vector<Matrix> same{k1, k1, k1};
  const std::vector<double> w3{0.2, 0.3, 0.5};
  const auto f3 = fuse_kernels(same, w3);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(f3.values()[i], k1.values()[i], 1e-12);

  const std::vector<double> w{0.3, 0.7};
  const auto f = fuse_kernels(grams, w);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(f(i, j), 0.3 * k1(i, j) + 0.7 * k2(i, j));
  }
}

TEST(KernelSet, Validation) {
  const auto k = from_rows({{1, 0}, {0, 1}});
  KernelSet set{{k, k}, {0.5, 0.5}, {0, 1}};
  EXPECT_NO_THROW(set.validate());
  set.weights = {0.6, 0.6};
  EXPECT_THROW(set.validate(), ValidationError);
  set.weights = {1.5, -0.5};
  EXPECT_THROW(set.validate(), ValidationError);
  set.weights = {0.5, 0.5};
  set.grams[1] = from_rows({{1, 2}, {0, 1}});
  EXPECT_THROW(set.validate(), ValidationError);
  set.grams[1] = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_THROW(set.validate(), ValidationError);
}

TEST(TraceScale, MeanDiagonalBecomesOne) {
  const auto k = from_rows({{4, 1}, {1, 8}});
  EXPECT_DOUBLE_EQ(trace_scale(k), 2.0 / 12.0);
}

TEST(CrossGram, SelfEqualsFusedAndMatchesOracle) {
  std::mt19937_64 rng(12);
  const std::size_t N = 6, L = 3;
  std::vector<LayerFeatures> train(L);
  for (auto& layer : train) {
    for (std::size_t i = 0; i < N; ++i) layer.push_back(random_histogram(8, 20, rng));
  }
  const std::vector<double> w{0.2, 0.5, 0.3};
  std::vector<Matrix> grams;
  for (const auto& layer : train) grams.push_back(gram_matrix(layer));
  EXPECT_EQ(cross_gram(train, train, w), fuse_kernels(grams, w));

  const std::vector<double> scales{0.5, 2.0, 1.0};
  std::vector<Matrix> scaled = grams;
  for (std::size_t l = 0; l < L; ++l) {
    for (auto& v : scaled[l].values()) v *= scales[l];
  }
  EXPECT_EQ(cross_gram(train, train, w, scales), fuse_kernels(scaled, w));

  std::vector<LayerFeatures> test(L);
  for (auto& layer : test) {
    for (int i = 0; i < 2; ++i) layer.push_back(random_histogram(8, 20, rng));
  }
  const auto cg = cross_gram(train, test, w);
  ASSERT_EQ(cg.rows(), 2u);
  ASSERT_EQ(cg.cols(), N);
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t n = 0; n < N; ++n) {
      double oracle = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        oracle += w[l] * adpm::testing::naive_intersection(test[l][m], train[l][n]);
      }
      EXPECT_NEAR(cg(m, n), oracle, 1e-12);
    }
  }
}

TEST(CrossGram, SelfRowPeaksAtItsColumn) {
  std::mt19937_64 rng(14);
  std::vector<LayerFeatures> train(2);
  for (auto& layer : train) {
    for (int i = 0; i < 5; ++i) layer.push_back(random_histogram(6, 30, rng));
  }
  const std::vector<double> w{0.4, 0.6};
  for (std::size_t j = 0; j < 5; ++j) {
    std::vector<LayerFeatures> test{{train[0][j]}, {train[1][j]}};
    const auto row = cross_gram(train, test, w);
    for (std::size_t n = 0; n < 5; ++n) EXPECT_LE(row(0, n), row(0, j));
  }
}

TEST(CrossKernel, ShapeMismatch) {
  const std::vector<std::vector<double>> a{{1, 2}}, b{{1, 2, 3}};
  EXPECT_THROW(cross_kernel(a, b), ValidationError);
}
