#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "adpm/error.hpp"
#include "adpm/kernel_engine.hpp"
#include "adpm/pipeline.hpp"
#include "adpm/synth_bench.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace adpm;
using adpm::testing::TempDir;

namespace {

std::string tree_bytes(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    all += f.lexically_relative(dir).string() + "\n" + adpm::testing::read_bytes(f);
  }
  return all;
}

// Holdout accuracy of an OvO SVM on one layer's histogram kernel.
double single_layer_holdout(const std::vector<ImageRecord>& train,
                            const std::vector<ImageRecord>& test, std::size_t layer,
                            std::size_t classes) {
  std::vector<ImageRecord> tr = train, te = test;
  for (auto* set : {&tr, &te}) {
    for (auto& r : *set) r.layer_maps = {r.layer_maps[layer]};
  }
  std::vector<const ImageRecord*> p;
  for (const auto& r : tr) p.push_back(&r);
  ScaleTrainOptions o;
  o.encoder.words = 6;
  const std::vector<std::string> names{"only"};
  const auto model = train_scale(p, "s0", classes, names, o);
  std::vector<const ImageRecord*> q;
  for (const auto& r : te) q.push_back(&r);
  const auto preds = predict_scale(model, q);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < te.size(); ++i) correct += preds[i].label == te[i].label;
  return static_cast<double>(correct) / static_cast<double>(te.size());
}

}  // namespace

TEST(SynthSpec, Validation) {
  SynthSpec s;
  EXPECT_NO_THROW(s.validate());
  s.signal_layers = {3};
  EXPECT_THROW(s.validate(), ValidationError);
  s.signal_layers = {0};
  EXPECT_THROW(s.validate(), ValidationError);
  s.signal_layers = {1};
  s.sigma = -0.1;
  EXPECT_THROW(s.validate(), ValidationError);
  s.sigma = 0.1;
  s.signal_scales = {"nope"};
  EXPECT_THROW(s.validate(), ValidationError);
  s.signal_scales = {};
  s.num_classes = 100;
  s.layers = {{4, 2}};
  EXPECT_THROW(s.validate(), ValidationError);  // 3^2 lattice points < 102
}

TEST(SynthBench, ZeroSigmaMakesClassImagesIdentical) {
  SynthSpec s;
  s.sigma = 0.0;
  s.num_classes = 3;
  s.images_per_class = 4;
  const auto recs = synthesize_records(s);
  for (const auto& a : recs) {
    for (const auto& b : recs) {
      if (a.label == b.label) {
        EXPECT_EQ(a.layer_maps, b.layer_maps);
      }
    }
  }
  // The signal layer differs between classes, the other one does not.
  EXPECT_NE(recs[0].layer_maps[1], recs.back().layer_maps[1]);
  EXPECT_EQ(recs[0].layer_maps[0], recs.back().layer_maps[0]);
}

TEST(SynthBench, SameSeedSameFiles) {
  TempDir a, b, c;
  SynthSpec s;
  s.scales = {"x", "y"};
  gen_synthetic_dataset(s, a.path());
  gen_synthetic_dataset(s, b.path());
  s.seed = 2;
  gen_synthetic_dataset(s, c.path());
  EXPECT_EQ(tree_bytes(a.path()), tree_bytes(b.path()));
  EXPECT_NE(tree_bytes(a.path()), tree_bytes(c.path()));
  const auto m = load_manifest(a / "manifest.tsv");
  EXPECT_EQ(m.records.size(), 40u);
  EXPECT_TRUE(validate_dataset(m).clean());
}

TEST(SynthBench, SignalLayerMeansSeparated) {
  SynthSpec s;
  s.sigma = 0.5;
  s.num_classes = 3;
  s.images_per_class = 20;
  const auto recs = synthesize_records(s);
  // Per-class mean descriptor of the object cells in the signal layer.
  std::vector<std::vector<double>> mean(3, std::vector<double>(4, 0.0));
  std::vector<double> count(3, 0.0);
  for (const auto& r : recs) {
    const auto& m = r.layer_maps[1];
    for (std::size_t cell = 0; cell < m.cells() / 2; ++cell) {
      for (std::size_t k = 0; k < 4; ++k) mean[r.label][k] += m.cell(cell)[k];
    }
    count[r.label] += static_cast<double>(m.cells() / 2);
  }
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      double d = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        const double diff = mean[a][k] / count[a] - mean[b][k] / count[b];
        d += diff * diff;
      }
      EXPECT_GE(std::sqrt(d), 6.0 * s.sigma);
    }
  }
}

TEST(SynthBench, SignalLayerSeparatesNonSignalLayerDoesNot) {
  SynthSpec s;
  s.num_classes = 2;
  s.images_per_class = 10;
  s.layers = {{4, 3}, {4, 3}};
  s.signal_layers = {2};
  s.sigma = 0.3;
  const auto train = synthesize_records(s);
  s.seed = 1234;
  const auto test = synthesize_records(s);
  EXPECT_EQ(single_layer_holdout(train, test, 1, 2), 1.0);
  EXPECT_LE(single_layer_holdout(train, test, 0, 2), 0.7);
}

TEST(SynthBench, ComplementaryDigitsAndScaleCoverage) {
  SynthSpec s;
  s.num_classes = 4;
  s.images_per_class = 3;
  s.layers = {{2, 3}, {2, 3}, {2, 3}};
  s.signal_layers = {1, 3};
  s.complementary_layers = true;
  s.scales = {"a", "b", "c"};
  s.scale_coverage = 2;
  s.sigma = 0.0;
  const auto recs = synthesize_records(s);
  auto find = [&](std::size_t cls, std::size_t i, const std::string& tag) -> const ImageRecord& {
    for (const auto& r : recs) {
      if (r.label == cls && r.image_id == "c" + std::to_string(cls) + "_i" + std::to_string(i) &&
          r.scale_tag == tag) {
        return r;
      }
    }
    throw std::runtime_error("missing");
  };
  // Class 1 and 3 share digit 1 in layer 1; classes 2 and 3 share it in layer 3.
  EXPECT_EQ(find(1, 0, "a").layer_maps[0], find(3, 0, "a").layer_maps[0]);
  EXPECT_NE(find(1, 0, "a").layer_maps[2], find(3, 0, "a").layer_maps[2]);
  EXPECT_EQ(find(2, 0, "a").layer_maps[2], find(3, 0, "a").layer_maps[2]);
  // Image 0 carries signal at scales a and b only; image 1 at b and c.
  EXPECT_EQ(find(1, 0, "c").layer_maps[0], find(0, 0, "c").layer_maps[0]);
  EXPECT_NE(find(1, 0, "b").layer_maps[0], find(0, 0, "b").layer_maps[0]);
  EXPECT_EQ(find(1, 1, "a").layer_maps[0], find(0, 1, "a").layer_maps[0]);
  EXPECT_NE(find(1, 1, "c").layer_maps[0], find(0, 1, "c").layer_maps[0]);
}

TEST(BruteForceSimplex, Examples) {
  Matrix k(2, 2);
  k(0, 0) = k(1, 1) = k(0, 1) = k(1, 0) = 3.0;
  const std::vector<double> b{2.0, 2.0};
  const auto sym = brute_force_simplex(k, b, 0.5);
  EXPECT_NEAR(sym.weights[0], 0.5, 1e-12);

  Matrix eye(2, 2);
  eye(0, 0) = eye(1, 1) = 1.0;
  const std::vector<double> b10{10.0, 0.0};
  const auto v = brute_force_simplex(eye, b10, 0.0);
  EXPECT_EQ(v.weights, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(v.evaluated, 101u);

  Matrix five(5, 5);
  const std::vector<double> b5(5, 0.0);
  EXPECT_THROW(brute_force_simplex(five, b5, 0.5), UnsupportedSizeError);
  EXPECT_THROW(brute_force_simplex(eye, b10, 0.5, 0.001), UnsupportedSizeError);
}

TEST(BruteForceSimplex, NeverBelowSolver) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 20; ++t) {
    QPProblem qp;
    qp.a = adpm::testing::random_psd(3, rng);
    std::normal_distribution<double> n(0, 1);
    qp.b = {n(rng), n(rng), n(rng)};
    const auto grid = brute_force_simplex(qp.a, qp.b, 0.5, 0.01);
    EXPECT_GE(grid.objective, solve_simplex_qp(qp).objective - 1e-6);
    EXPECT_EQ(grid.evaluated, 5151u);
  }
}

TEST(BruteForceHistogram, OneHotAndTotal) {
  Codebook book;
  book.centers = Matrix(3, 2);
  book.centers(1, 0) = 5;
  book.centers(2, 1) = 5;
  auto one = FeatureMap::zeros(1, 1, 2);
  one.values = {4.0f, 1.0f};
  EXPECT_EQ(brute_force_histogram(one, book).counts, (std::vector<std::uint32_t>{0, 1, 0}));
  std::mt19937_64 rng(2);
  const auto m = adpm::testing::random_map(7, 2, rng, 0, 5);
  EXPECT_EQ(brute_force_histogram(m, book).total(), 49u);
  EXPECT_THROW(brute_force_histogram(FeatureMap::zeros(2, 2, 3), book), ValidationError);
}
