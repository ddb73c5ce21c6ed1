#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adpm/scale_model.hpp"

namespace adpm {

struct ScalePrediction {
  std::string scale_tag;
  std::size_t predicted = 0;
  double confidence = 0.0;  // one-vs-one summed margin of the predicted class
};

/// Most votes wins; ties go to the highest summed confidence among the tied
/// classes, then to the lowest class index.
std::size_t vote(std::span<const ScalePrediction> predictions, std::size_t num_classes);

/// One test image with its record at each available scale.
struct MultiscaleImage {
  std::string image_id;
  std::size_t label = 0;
  std::map<std::string, const ImageRecord*> by_scale;
};

struct MultiscaleResult {
  std::string image_id;
  std::size_t truth = 0;
  std::size_t predicted = 0;
  std::vector<ScalePrediction> per_scale;  // in model order, available scales only
  std::vector<std::string> missing_scales;
};

/// Runs every scale model on its records (batched per scale) and votes per
/// image. Images lacking a scale vote over the scales they have; an image
/// with no usable scale is a ValidationError.
std::vector<MultiscaleResult> predict_multiscale(std::span<const ScaleModel> models,
                                                 std::span<const MultiscaleImage> images);

}  // namespace adpm
