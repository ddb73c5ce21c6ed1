#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adpm/matrix.hpp"
#include "adpm/tensor_store.hpp"

namespace adpm {

inline constexpr std::size_t kDefaultCodebookWords = 300;

/// Visual vocabulary for one layer: D centers of dimension p. Centers are
/// rounded to float precision so the on-disk form reproduces assignments
/// exactly.
struct Codebook {
  std::size_t layer_index = 0;
  Matrix centers;  // D x p
  std::uint64_t seed = 0;
  bool l2_normalize = false;  // descriptors are unit-normalized before assignment

  std::size_t words() const noexcept { return centers.rows(); }
  std::size_t dim() const noexcept { return centers.cols(); }
};

/// Word counts of one image at one layer. Sums to the number of grid cells.
struct LayerHistogram {
  std::vector<std::uint32_t> counts;

  std::uint64_t total() const;
  std::size_t bins() const noexcept { return counts.size(); }
  bool operator==(const LayerHistogram&) const = default;
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  double shift_tolerance = 1e-6;
  bool l2_normalize = false;
};

struct KMeansResult {
  Codebook book;
  std::vector<double> wcss;  // within-cluster sum of squares after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
};

/// Gathers every grid-cell descriptor of `layer` from `maps` as matrix rows.
/// When more than `cap` rows exist, a uniform subset of exactly `cap` rows is
/// kept (without replacement, original order preserved, fixed by `seed`).
/// Throws InsufficientDataError if fewer than `min_rows` descriptors exist.
Matrix collect_descriptors(std::span<const FeatureMap* const> maps, std::size_t cap,
                           std::size_t min_rows, std::uint64_t seed,
                           bool l2_normalize = false);
Matrix collect_descriptors(std::span<const ImageRecord> records, std::size_t layer,
                           std::size_t cap, std::size_t min_rows, std::uint64_t seed,
                           bool l2_normalize = false);

/// k-means++ seeding followed by Lloyd's iterations.
KMeansResult kmeans(const Matrix& descriptors, std::size_t words, std::uint64_t seed,
                    const KMeansOptions& options = {});

Codebook train_codebook(const Matrix& descriptors, std::size_t words, std::uint64_t seed,
                        const KMeansOptions& options = {});

/// Nearest center by squared Euclidean distance; ties go to the lowest index.
std::size_t assign_word(std::span<const double> descriptor, const Codebook& book);
std::size_t assign_word(std::span<const float> descriptor, const Codebook& book);

LayerHistogram encode_histogram(const FeatureMap& map, const Codebook& book);

/// Writes <stem>.adpm (D x p x 1 tensor) and <stem>.txt (sidecar header).
void save_codebook(const Codebook& book, const std::filesystem::path& stem);
Codebook load_codebook(const std::filesystem::path& stem);

}  // namespace adpm
