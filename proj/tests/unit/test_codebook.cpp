#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "adpm/codebook.hpp"
#include "adpm/error.hpp"
#include "adpm/synth_bench.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace adpm;

namespace {

Matrix rows_of(const std::vector<std::vector<double>>& v) {
  Matrix m(v.size(), v.front().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::copy(v[i].begin(), v[i].end(), m.row(i).begin());
  }
  return m;
}

Codebook book_of(const std::vector<std::vector<double>>& centers) {
  Codebook b;
  b.centers = rows_of(centers);
  return b;
}

ImageRecord record_with(FeatureMap map) {
  ImageRecord r;
  r.image_id = "x";
  r.layer_maps.push_back(std::move(map));
  return r;
}

}  // namespace

TEST(CollectDescriptors, BelowCapKeepsAll) {
  std::mt19937_64 rng(1);
  std::vector<ImageRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(record_with(adpm::testing::random_map(2, 3, rng)));
  const auto all = collect_descriptors(recs, 0, 1000, 2, 9);
  ASSERT_EQ(all.rows(), 16u);
  EXPECT_EQ(all.cols(), 3u);
  EXPECT_EQ(all(5, 1), static_cast<double>(recs[1].layer_maps[0].values[1 * 3 + 1]));
}

TEST(CollectDescriptors, CapIsExactAndSeeded) {
  std::mt19937_64 rng(2);
  std::vector<ImageRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(record_with(adpm::testing::random_map(2, 3, rng)));
  const auto a = collect_descriptors(recs, 0, 8, 2, 42);
  const auto b = collect_descriptors(recs, 0, 8, 2, 42);
  const auto c = collect_descriptors(recs, 0, 8, 2, 43);
  EXPECT_EQ(a.rows(), 8u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // Every kept row is one of the source rows.
  const auto all = collect_descriptors(recs, 0, 1000, 2, 0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    bool found = false;
    for (std::size_t s = 0; s < all.rows() && !found; ++s) {
      found = std::equal(a.row(r).begin(), a.row(r).end(), all.row(s).begin());
    }
    EXPECT_TRUE(found);
  }
}

TEST(CollectDescriptors, InsufficientData) {
  std::vector<ImageRecord> recs{record_with(FeatureMap::zeros(1, 1, 2))};
  EXPECT_THROW(collect_descriptors(recs, 0, 1000, 300, 1), InsufficientDataError);
  EXPECT_THROW(collect_descriptors(recs, 1, 1000, 1, 1), ValidationError);
}

TEST(KMeans, TwoSeparatedClusters) {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({0, 0});
  for (int i = 0; i < 10; ++i) pts.push_back({10, 10});
  const auto res = kmeans(rows_of(pts), 2, 5);
  std::vector<std::vector<double>> centers;
  for (std::size_t d = 0; d < 2; ++d) {
    centers.push_back({res.book.centers(d, 0), res.book.centers(d, 1)});
  }
  std::sort(centers.begin(), centers.end());
  EXPECT_EQ(centers[0], (std::vector<double>{0, 0}));
  EXPECT_EQ(centers[1], (std::vector<double>{10, 10}));
  EXPECT_TRUE(res.converged);
}

TEST(KMeans, WcssNonIncreasingAndCentersDistinct) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 200; ++i) pts.push_back({n(rng), n(rng), n(rng)});
    const auto res = kmeans(rows_of(pts), 12, trial);
    for (std::size_t i = 1; i < res.wcss.size(); ++i) {
      EXPECT_LE(res.wcss[i], res.wcss[i - 1] * (1 + 1e-12) + 1e-12);
    }
    for (std::size_t a = 0; a < 12; ++a) {
      for (std::size_t b = 0; b < a; ++b) {
        EXPECT_FALSE(std::equal(res.book.centers.row(a).begin(), res.book.centers.row(a).end(),
                                res.book.centers.row(b).begin()));
      }
      for (double v : res.book.centers.row(a)) EXPECT_TRUE(std::isfinite(v));
    }
  }
}

TEST(KMeans, ThreeBlobsAgainstExhaustiveAssignment) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 0.1);
  const std::vector<std::vector<double>> means{{0, 0}, {5, 5}, {10, 0}};
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 60; ++i) {
    const auto& m = means[i % 3];
    pts.push_back({m[0] + n(rng), m[1] + n(rng)});
  }
  const auto book = train_codebook(rows_of(pts), 3, 17);
  // Sample mean of each blob, computed from the known generating blob.
  for (const auto& m : means) {
    double sx = 0, sy = 0, cnt = 0;
    for (const auto& p : pts) {
      if (std::hypot(p[0] - m[0], p[1] - m[1]) < 1.0) sx += p[0], sy += p[1], cnt += 1;
    }
    double best = 1e9;
    for (std::size_t d = 0; d < 3; ++d) {
      best = std::min(best, std::hypot(book.centers(d, 0) - m[0], book.centers(d, 1) - m[1]));
      EXPECT_TRUE(std::isfinite(book.centers(d, 0)));
    }
    EXPECT_LT(best, 0.5);
    double best_sample = 1e9;
    for (std::size_t d = 0; d < 3; ++d) {
      best_sample = std::min(best_sample, std::hypot(book.centers(d, 0) - sx / cnt,
                                                     book.centers(d, 1) - sy / cnt));
    }
    EXPECT_LT(best_sample, 1e-5);
  }
}

TEST(KMeans, DeterministicPerSeed) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({u(rng), u(rng)});
  EXPECT_EQ(train_codebook(rows_of(pts), 8, 4).centers, train_codebook(rows_of(pts), 8, 4).centers);
}

TEST(KMeans, DegenerateInput) {
  std::vector<std::vector<double>> pts(10, {1.0, 1.0});
  pts.push_back({2.0, 2.0});
  EXPECT_THROW(kmeans(rows_of(pts), 3, 1), DegenerateClusteringError);
  EXPECT_THROW(kmeans(rows_of(pts), 1, 1), ValidationError);
  EXPECT_NO_THROW(kmeans(rows_of(pts), 2, 1));
}

TEST(AssignWord, ExamplesAndTieRule) {
  const auto book = book_of({{0, 0}, {10, 10}});
  const std::vector<double> q{1, 1};
  EXPECT_EQ(assign_word(q, book), 0u);
  const std::vector<double> tie{5, 5};
  EXPECT_EQ(assign_word(tie, book), 0u);
  const auto swapped = book_of({{10, 10}, {0, 0}});
  EXPECT_EQ(assign_word(tie, swapped), 0u);
  const std::vector<double> wrong{1, 2, 3};
  EXPECT_THROW(assign_word(wrong, book), ValidationError);
}

TEST(AssignWord, MatchesLinearScan) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::vector<double>> centers;
  for (int d = 0; d < 300; ++d) centers.push_back({n(rng), n(rng), n(rng), n(rng), n(rng)});
  const auto book = book_of(centers);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> q{n(rng), n(rng), n(rng), n(rng), n(rng)};
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t d = 0; d < centers.size(); ++d) {
      double s = 0;
      for (int k = 0; k < 5; ++k) s += (q[k] - centers[d][k]) * (q[k] - centers[d][k]);
      if (s < best_d) best_d = s, best = d;
    }
    EXPECT_EQ(assign_word(q, book), best);
  }
}

TEST(EncodeHistogram, CellsOnOneCenter) {
  const auto book = book_of({{0, 0}, {1, 0}, {0, 1}, {3, 3}, {5, 5}});
  auto m = FeatureMap::zeros(2, 2, 2);
  std::fill(m.values.begin(), m.values.end(), 3.0f);
  const auto h = encode_histogram(m, book);
  EXPECT_EQ(h.counts, (std::vector<std::uint32_t>{0, 0, 0, 4, 0}));
}

TEST(EncodeHistogram, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = adpm::testing::random_map(13, 4, rng);
    std::vector<std::vector<double>> centers;
    std::uniform_real_distribution<double> u(-1, 1);
    for (int d = 0; d < 10; ++d) centers.push_back({u(rng), u(rng), u(rng), u(rng)});
    auto book = book_of(centers);
    book.l2_normalize = trial % 2 == 1;
    const auto h = encode_histogram(m, book);
    EXPECT_EQ(h.total(), 169u);
    std::vector<std::uint32_t> oracle(10, 0);
    for (std::size_t i = 0; i < 13; ++i) {
      for (std::size_t j = 0; j < 13; ++j) ++oracle[assign_word(m.cell(i, j), book)];
    }
    EXPECT_EQ(h.counts, oracle);
    EXPECT_EQ(h, brute_force_histogram(m, book));
  }
}

TEST(EncodeHistogram, ChannelMismatch) {
  const auto book = book_of({{0, 0}, {1, 1}});
  EXPECT_THROW(encode_histogram(FeatureMap::zeros(2, 2, 3), book), ValidationError);
}

TEST(CodebookIo, RoundTrip) {
  adpm::testing::TempDir dir;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({n(rng), n(rng), n(rng)});
  auto book = train_codebook(rows_of(pts), 6, 99);
  book.layer_index = 3;
  save_codebook(book, dir / "cb");
  const auto back = load_codebook(dir / "cb");
  EXPECT_EQ(back.centers, book.centers);
  EXPECT_EQ(back.layer_index, 3u);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.l2_normalize, book.l2_normalize);
}
