#pragma once

// One scale's trained pipeline: per-layer codebooks, training encodings,
// learned fusion weights and the one-vs-one SVM on the fused kernel.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adpm/codebook.hpp"
#include "adpm/kernel_engine.hpp"
#include "adpm/spp_pool.hpp"
#include "adpm/svm_classifier.hpp"
#include "adpm/tensor_store.hpp"
#include "adpm/weight_solver.hpp"

namespace adpm {

enum class Encoder { Bovw, Spp };

const char* encoder_name(Encoder e);
Encoder parse_encoder(const std::string& text);

struct EncoderOptions {
  Encoder encoder = Encoder::Bovw;
  std::size_t words = kDefaultCodebookWords;
  std::size_t descriptor_cap = 100000;
  std::size_t kmeans_max_iterations = 100;
  bool l2_normalize_descriptors = false;
  bool normalize_histograms = false;  // L1-normalize kernel inputs
  SppConfig spp;
};

struct ScaleTrainOptions {
  EncoderOptions encoder;
  double lambda = kDefaultLambda;
  double qp_tol = 1e-9;
  std::size_t qp_max_iter = 10000;
  bool trace_normalize = false;
  SvmParams svm;
  std::uint64_t seed = 1;
  std::vector<double> fixed_weights;  // non-empty: skip weight learning
};

/// Wall-clock seconds per stage. Not part of any persisted output.
struct StageTimings {
  double codebooks = 0.0;
  double encoding = 0.0;
  double grams = 0.0;
  double weights = 0.0;
  double svm = 0.0;
};

struct ScaleModel {
  std::string scale_tag;
  std::size_t num_classes = 0;
  std::vector<std::string> layer_names;
  EncoderOptions encoder;
  bool trace_normalize = false;
  std::vector<Codebook> codebooks;            // one per layer (BoVW only)
  std::vector<LayerFeatures> train_features;  // [layer][image], raw encodings
  std::vector<std::string> train_ids;
  std::vector<std::size_t> train_labels;
  std::vector<double> layer_scales;           // trace factors, 1 when off
  WeightSolution weights;
  OvoModel svm;
  StageTimings timings;

  std::size_t num_layers() const noexcept { return layer_names.size(); }
};

/// Deterministic per-purpose seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Raw encoding of one layer map: histogram counts or SPP descriptor.
std::vector<double> encode_layer(const FeatureMap& map, const EncoderOptions& encoder,
                                 const Codebook* book);

/// Kernel input for a raw encoding (applies the L1 option).
std::vector<double> kernel_input(std::span<const double> raw, const EncoderOptions& encoder);

ScaleModel train_scale(std::span<const ImageRecord* const> records, const std::string& scale_tag,
                       std::size_t num_classes, std::span<const std::string> layer_names,
                       const ScaleTrainOptions& options);

/// [layer][image] raw encodings of `records` with the model's codebooks.
std::vector<LayerFeatures> encode_images(const ScaleModel& model,
                                         std::span<const ImageRecord* const> records);

/// Fused M x N kernel between test encodings and the training set.
Matrix scale_cross_kernel(const ScaleModel& model, std::span<const LayerFeatures> test_features);

std::vector<OvoPrediction> predict_scale(const ScaleModel& model,
                                         std::span<const ImageRecord* const> records);

void save_scale_model(const ScaleModel& model, const std::filesystem::path& dir);
ScaleModel load_scale_model(const std::filesystem::path& dir);

}  // namespace adpm
