#pragma once

// End-to-end runs: train a bundle of per-scale models, predict with it, and
// repeated stratified cross validation.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adpm/report.hpp"
#include "adpm/run_config.hpp"
#include "adpm/scale_model.hpp"
#include "adpm/tensor_store.hpp"

namespace adpm {

/// Records from one or more manifests, restricted to the included scales.
struct Dataset {
  std::size_t num_classes = 0;
  std::vector<std::string> layer_names;
  std::vector<std::string> scales;  // sorted
  std::vector<ImageRecord> records;
};

Dataset load_dataset(std::span<const DatasetManifest> manifests,
                     std::span<const std::string> include_scales = {});
Dataset load_dataset(const RunConfig& cfg);

struct ImageUnit {
  std::string image_id;
  std::size_t label = 0;
};

/// Distinct images sorted by id. Throws if one id carries two labels.
std::vector<ImageUnit> dataset_images(const Dataset& data);

struct Split {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Stratified splits: per class, a seeded shuffle per repeat, then either
/// the first round(fraction * n) images train, or k folds by position.
std::vector<Split> make_splits(std::span<const ImageUnit> images, std::size_t num_classes,
                               const RunConfig& cfg);

struct TrainedBundle {
  std::size_t num_classes = 0;
  std::vector<std::string> layer_names;
  std::vector<ScaleModel> scales;  // sorted by scale tag
  std::vector<std::pair<std::string, std::string>> config;
};

/// Trains one model per scale on `train_ids` (all images when empty).
TrainedBundle train_bundle(const Dataset& data, std::span<const std::string> train_ids,
                           const RunConfig& cfg);
TrainedBundle run_train(const RunConfig& cfg);

void save_bundle(const TrainedBundle& bundle, const std::filesystem::path& dir);
TrainedBundle load_bundle(const std::filesystem::path& dir);

/// Scores `test_ids` (all images when empty) of `data` with the bundle.
TaskResult evaluate(const TrainedBundle& bundle, const Dataset& data,
                    std::span<const std::string> test_ids = {});

PredictionReport run_predict(const TrainedBundle& bundle, const DatasetManifest& test);

CrossvalReport crossval(const Dataset& data, const RunConfig& cfg);
CrossvalReport run_crossval(const RunConfig& cfg);

}  // namespace adpm
