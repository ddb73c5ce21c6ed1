#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adpm/codebook.hpp"
#include "adpm/matrix.hpp"

namespace adpm {

/// Per-image encoded vectors for one layer (histogram counts or pooled
/// descriptors), in image order.
using LayerFeatures = std::vector<std::vector<double>>;

/// Histogram counts as kernel input, optionally L1-normalized.
std::vector<double> histogram_values(const LayerHistogram& hist, bool l1_normalize = false);

/// Sum over bins of min(a[d], b[d]).
double intersection_kernel(std::span<const double> a, std::span<const double> b);
double intersection_kernel(const LayerHistogram& a, const LayerHistogram& b);

/// N x N intersection-kernel Gram matrix.
Matrix gram_matrix(std::span<const std::vector<double>> features);
Matrix gram_matrix(std::span<const LayerHistogram> histograms);

/// M x N kernel between `rows` (M vectors) and `cols` (N vectors).
Matrix cross_kernel(std::span<const std::vector<double>> rows,
                    std::span<const std::vector<double>> cols);

/// Label-agreement target: y(i,j) = 1 when labels match, else 0.
struct IdealKernel {
  Matrix y;
};

IdealKernel ideal_matrix(std::span<const std::size_t> labels);

struct KernelSet {
  std::vector<Matrix> grams;
  std::vector<double> weights;
  std::vector<std::size_t> labels;

  /// Checks equal square shapes, symmetry and simplex weights (1e-9).
  void validate() const;
};

/// Weighted sum of the grams.
Matrix fuse_kernels(const KernelSet& set);
Matrix fuse_kernels(std::span<const Matrix> grams, std::span<const double> weights);

/// Factor N / trace(gram) that brings the mean self-similarity to 1.
double trace_scale(const Matrix& gram);

/// Fused intersection kernel between each test image and each training
/// image (M x N). `layer_scales` multiplies layer l's kernel before
/// weighting; empty means all ones.
Matrix cross_gram(std::span<const LayerFeatures> train_by_layer,
                  std::span<const LayerFeatures> test_by_layer,
                  std::span<const double> weights,
                  std::span<const double> layer_scales = {});

bool is_symmetric(const Matrix& m, double tol = 1e-9);

}  // namespace adpm
