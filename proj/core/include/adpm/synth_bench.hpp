#pragma once

// Synthetic multi-layer, multi-scale datasets with controlled placement of
// class signal, and brute-force reference implementations for tests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adpm/codebook.hpp"
#include "adpm/tensor_store.hpp"
#include "adpm/weight_solver.hpp"

namespace adpm {

struct SynthLayer {
  std::size_t side = 4;
  std::size_t channels = 4;
};

struct SynthSpec {
  std::size_t num_classes = 2;
  std::size_t images_per_class = 10;
  std::vector<SynthLayer> layers{{4, 4}, {4, 4}};
  std::vector<std::size_t> signal_layers{2};  // 1-based
  std::vector<std::string> scales{"s0"};
  std::vector<std::string> signal_scales;     // empty: every scale
  // Signal scales an image carries class signal in, cycling with the image
  // index. 0 means all of them.
  std::size_t scale_coverage = 0;
  // Split the class index into base-b digits, one digit per signal layer,
  // so that no single layer separates every class.
  bool complementary_layers = false;
  double sigma = 0.1;
  std::uint64_t seed = 1;
  double object_fraction = 0.5;  // share of cells holding the object

  void validate() const;
  std::size_t num_layers() const noexcept { return layers.size(); }
  std::size_t num_images() const noexcept { return num_classes * images_per_class; }
};

/// Builds every (image, scale) record in memory; ids are "c<class>_i<index>".
std::vector<ImageRecord> synthesize_records(const SynthSpec& spec);

/// Writes <out>/<scale>/<id>_<layer>.adpm and <out>/manifest.tsv.
DatasetManifest gen_synthetic_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

struct GridOptimum {
  std::vector<double> weights;
  double objective = 0.0;  // same objective as qp_objective
  std::size_t evaluated = 0;
};

/// Exhaustive search over the simplex grid with step `resolution`.
/// Supports at most 4 weights and resolution >= 0.005.
GridOptimum brute_force_simplex(const Matrix& a, std::span<const double> b, double lambda,
                                double resolution = 0.01);

/// Nearest-center counting with plain loops; first minimum wins.
LayerHistogram brute_force_histogram(const FeatureMap& map, const Codebook& book);

}  // namespace adpm
