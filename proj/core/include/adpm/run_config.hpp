#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "adpm/scale_model.hpp"

namespace adpm {

/// Experiment settings. Read from a flat `key = value` text file ('#'
/// starts a comment); every key can also be set from the command line.
/// Relative paths resolve against `workspace`.
struct RunConfig {
  std::filesystem::path workspace = ".";
  std::vector<std::filesystem::path> manifests;
  std::size_t words = kDefaultCodebookWords;
  double lambda = kDefaultLambda;
  double svm_c = 1.0;
  double svm_tol = 1e-3;
  std::size_t svm_max_passes = 50;
  std::uint64_t seed = 1;
  double split_fraction = 0.5;
  std::size_t folds = 0;  // > 0 selects k-fold cross validation
  std::size_t repeats = 10;
  std::vector<std::string> scales;  // include list; empty keeps every scale
  bool normalize_histograms = false;
  bool trace_normalize = false;
  bool normalize_descriptors = false;
  Encoder encoder = Encoder::Bovw;
  std::size_t descriptor_cap = 100000;
  std::size_t kmeans_max_iter = 100;
  std::vector<std::size_t> spp_levels{1, 2, 4};
  std::vector<double> fixed_weights;
  double qp_tol = 1e-9;
  std::size_t qp_max_iter = 10000;

  /// Sets one key. `manifest` appends (comma-separated lists allowed).
  /// Throws ValidationError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Parses a config file; the workspace defaults to the file's directory.
  static RunConfig from_file(const std::filesystem::path& path);

  void validate() const;

  /// Canonical key=value lines, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  ScaleTrainOptions train_options() const;
  bool uses_folds() const noexcept { return folds > 0; }
};

}  // namespace adpm
