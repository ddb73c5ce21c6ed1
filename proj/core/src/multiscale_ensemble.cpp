#include "adpm/multiscale_ensemble.hpp"

#include <string>

#include "adpm/error.hpp"

namespace adpm {

std::size_t vote(std::span<const ScalePrediction> predictions, std::size_t num_classes) {
  if (predictions.empty()) throw ValidationError("cannot vote over zero predictions");
  std::vector<std::size_t> votes(num_classes, 0);
  std::vector<double> confidence(num_classes, 0.0);
  for (const auto& p : predictions) {
    if (p.predicted >= num_classes) {
      throw ValidationError("scale '" + p.scale_tag + "' predicted class " +
                            std::to_string(p.predicted) + " >= " + std::to_string(num_classes));
    }
    ++votes[p.predicted];
    confidence[p.predicted] += p.confidence;
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < num_classes; ++k) {
    if (votes[k] > votes[best] ||
        (votes[k] == votes[best] && confidence[k] > confidence[best])) {
      best = k;
    }
  }
  return best;
}

std::vector<MultiscaleResult> predict_multiscale(std::span<const ScaleModel> models,
                                                 std::span<const MultiscaleImage> images) {
  if (models.empty()) throw ValidationError("no scale models to predict with");
  const std::size_t num_classes = models.front().num_classes;

  std::vector<MultiscaleResult> results(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    results[i].image_id = images[i].image_id;
    results[i].truth = images[i].label;
  }

  for (const auto& model : models) {
    std::vector<const ImageRecord*> batch;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto it = images[i].by_scale.find(model.scale_tag);
      if (it == images[i].by_scale.end() || it->second == nullptr) {
        results[i].missing_scales.push_back(model.scale_tag);
        continue;
      }
      batch.push_back(it->second);
      owner.push_back(i);
    }
    const auto preds = predict_scale(model, batch);
    for (std::size_t b = 0; b < preds.size(); ++b) {
      results[owner[b]].per_scale.push_back(
          ScalePrediction{model.scale_tag, preds[b].label, preds[b].confidence});
    }
  }

  for (auto& r : results) {
    if (r.per_scale.empty()) {
      throw ValidationError("image '" + r.image_id + "' has no record at any trained scale");
    }
    r.predicted = vote(r.per_scale, num_classes);
  }
  return results;
}

}  // namespace adpm
