#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "adpm/codebook.hpp"
#include "adpm/kernel_engine.hpp"
#include "adpm/svm_classifier.hpp"
#include "adpm/weight_solver.hpp"

using namespace adpm;

namespace {

std::vector<std::vector<double>> histograms(std::size_t n, std::size_t bins, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> p(2.0);
  std::vector<std::vector<double>> h(n, std::vector<double>(bins));
  for (auto& row : h) {
    for (auto& v : row) v = p(rng);
  }
  return h;
}

std::vector<std::size_t> alternating(std::size_t n, std::size_t classes) {
  std::vector<std::size_t> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = i % classes;
  return l;
}

}  // namespace

static void BM_GramMatrix(benchmark::State& state) {
  const auto h = histograms(state.range(0), 300, 1);
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix(h));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GramMatrix)->Arg(64)->Arg(256)->Arg(512)->Complexity(benchmark::oNSquared);

static void BM_EncodeHistogram(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const std::size_t side = state.range(0), channels = 256, words = 300;
  FeatureMap map = FeatureMap::zeros(side, side, channels);
  for (auto& v : map.values) v = u(rng);
  Codebook book;
  book.centers = Matrix(words, channels);
  for (auto& v : book.centers.values()) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(encode_histogram(map, book));
}
BENCHMARK(BM_EncodeHistogram)->Arg(13)->Arg(27);

static void BM_SolveSimplexQp(benchmark::State& state) {
  const std::size_t n = 120, layers = state.range(0);
  const auto labels = alternating(n, 4);
  std::vector<Matrix> grams;
  for (std::size_t l = 0; l < layers; ++l) grams.push_back(gram_matrix(histograms(n, 50, 10 + l)));
  const auto qp = assemble_qp(grams, ideal_matrix(labels), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_simplex_qp(qp));
}
BENCHMARK(BM_SolveSimplexQp)->Arg(5)->Arg(8);

static void BM_TrainOvo(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto k = gram_matrix(histograms(n, 100, 3));
  const auto labels = alternating(n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(train_ovo(k, labels, 5));
}
BENCHMARK(BM_TrainOvo)->Arg(100)->Arg(400);
BENCHMARK_MAIN();
