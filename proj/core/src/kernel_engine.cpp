#include "adpm/kernel_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "adpm/error.hpp"
#include "adpm/parallel.hpp"

namespace adpm {
namespace {

void require_equal_bins(std::span<const std::vector<double>> features) {
  for (const auto& f : features) {
    if (f.size() != features.front().size()) {
      throw ValidationError("histograms disagree on bin count (" +
                            std::to_string(f.size()) + " vs " +
                            std::to_string(features.front().size()) + ")");
    }
  }
}

std::vector<std::vector<double>> as_values(std::span<const LayerHistogram> hists) {
  std::vector<std::vector<double>> out;
  out.reserve(hists.size());
  for (const auto& h : hists) out.push_back(histogram_values(h));
  return out;
}

void check_simplex(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < -1e-9) throw ValidationError("fusion weight is negative or non-finite");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("fusion weights sum to " + std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

std::vector<double> histogram_values(const LayerHistogram& hist, bool l1_normalize) {
  std::vector<double> out(hist.counts.begin(), hist.counts.end());
  if (l1_normalize) {
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    if (total > 0.0) {
      for (double& v : out) v /= total;
    }
  }
  return out;
}

double intersection_kernel(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("intersection kernel needs equal bin counts (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) sum += std::min(a[d], b[d]);
  return sum;
}

double intersection_kernel(const LayerHistogram& a, const LayerHistogram& b) {
  return intersection_kernel(histogram_values(a), histogram_values(b));
}

Matrix gram_matrix(std::span<const std::vector<double>> features) {
  require_equal_bins(features);
  const std::size_t n = features.size();
  Matrix g(n, n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j) g(i, j) = intersection_kernel(features[i], features[j]);
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  }
  return g;
}

Matrix gram_matrix(std::span<const LayerHistogram> histograms) {
  const auto values = as_values(histograms);
  return gram_matrix(values);
}

Matrix cross_kernel(std::span<const std::vector<double>> rows,
                    std::span<const std::vector<double>> cols) {
  if (!rows.empty() && !cols.empty() && rows.front().size() != cols.front().size()) {
    throw ValidationError("test and training histograms disagree on bin count");
  }
  require_equal_bins(rows);
  require_equal_bins(cols);
  Matrix k(rows.size(), cols.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < cols.size(); ++j) k(i, j) = intersection_kernel(rows[i], cols[j]);
  });
  return k;
}

IdealKernel ideal_matrix(std::span<const std::size_t> labels) {
  const std::size_t n = labels.size();
  IdealKernel ideal{Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) ideal.y(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
  }
  return ideal;
}

bool is_symmetric(const Matrix& m, double tol) {
  if (!m.square()) return false;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double a = m(i, j), b = m(j, i);
      if (std::abs(a - b) > tol * std::max({1.0, std::abs(a), std::abs(b)})) return false;
    }
  }
  return true;
}

void KernelSet::validate() const {
  if (grams.empty()) throw ValidationError("kernel set has no grams");
  if (weights.size() != grams.size()) {
    throw ValidationError("kernel set has " + std::to_string(grams.size()) + " grams but " +
                          std::to_string(weights.size()) + " weights");
  }
  const std::size_t n = grams.front().rows();
  for (std::size_t l = 0; l < grams.size(); ++l) {
    if (grams[l].rows() != n || grams[l].cols() != n) {
      throw ValidationError("gram " + std::to_string(l) + " is not " + std::to_string(n) +
                            "x" + std::to_string(n));
    }
    if (!is_symmetric(grams[l])) {
      throw ValidationError("gram " + std::to_string(l) + " is not symmetric");
    }
  }
  if (!labels.empty() && labels.size() != n) {
    throw ValidationError("kernel set label count does not match gram size");
  }
  check_simplex(weights);
}

Matrix fuse_kernels(const KernelSet& set) {
  set.validate();
  return fuse_kernels(set.grams, set.weights);
}

Matrix fuse_kernels(std::span<const Matrix> grams, std::span<const double> weights) {
  if (grams.empty() || grams.size() != weights.size()) {
    throw ValidationError("fuse_kernels needs one weight per gram");
  }
  const std::size_t rows = grams.front().rows(), cols = grams.front().cols();
  Matrix fused(rows, cols);
  for (std::size_t l = 0; l < grams.size(); ++l) {
    if (grams[l].rows() != rows || grams[l].cols() != cols) {
      throw ValidationError("fuse_kernels: gram shapes differ");
    }
    const auto src = grams[l].values();
    auto dst = fused.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weights[l] * src[i];
  }
  return fused;
}

double trace_scale(const Matrix& gram) {
  double trace = 0.0;
  for (std::size_t i = 0; i < gram.rows(); ++i) trace += gram(i, i);
  if (!(trace > 0.0)) throw ValidationError("cannot trace-normalize a gram with zero trace");
  return static_cast<double>(gram.rows()) / trace;
}

Matrix cross_gram(std::span<const LayerFeatures> train_by_layer,
                  std::span<const LayerFeatures> test_by_layer, std::span<const double> weights,
                  std::span<const double> layer_scales) {
  const std::size_t layers = train_by_layer.size();
  if (layers == 0 || test_by_layer.size() != layers || weights.size() != layers) {
    throw ValidationError("cross_gram needs matching layer counts for train, test and weights");
  }
  if (!layer_scales.empty() && layer_scales.size() != layers) {
    throw ValidationError("cross_gram: layer scale count mismatch");
  }
  check_simplex(weights);
  const std::size_t n = train_by_layer.front().size();
  const std::size_t m = test_by_layer.front().size();
  Matrix out(m, n);
  for (std::size_t l = 0; l < layers; ++l) {
    if (train_by_layer[l].size() != n || test_by_layer[l].size() != m) {
      throw ValidationError("cross_gram: image counts differ across layers");
    }
    if (weights[l] == 0.0) continue;
    // Same rounding order as scaling the gram first and then fusing.
    const double scale = layer_scales.empty() ? 1.0 : layer_scales[l];
    const Matrix k = cross_kernel(test_by_layer[l], train_by_layer[l]);
    auto dst = out.values();
    const auto src = k.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weights[l] * (scale * src[i]);
  }
  return out;
}

}  // namespace adpm
