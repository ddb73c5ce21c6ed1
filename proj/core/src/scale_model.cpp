#include "adpm/scale_model.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adpm/error.hpp"
#include "adpm/parallel.hpp"

namespace adpm {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

LayerFeatures kernel_inputs(const LayerFeatures& raw, const EncoderOptions& encoder) {
  LayerFeatures out;
  out.reserve(raw.size());
  for (const auto& f : raw) out.push_back(kernel_input(f, encoder));
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(std::strtod(item.c_str(), nullptr));
  }
  return out;
}

void save_features(const LayerFeatures& features, const std::filesystem::path& path) {
  const std::size_t n = features.size();
  const std::size_t d = n ? features.front().size() : 0;
  FeatureMap grid = FeatureMap::zeros(n, d, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) grid.values[i * d + k] = static_cast<float>(features[i][k]);
  }
  save_tensor(grid, path);
}

LayerFeatures load_features(const std::filesystem::path& path) {
  const auto grid = load_tensor(path);
  LayerFeatures out(grid.height, std::vector<double>(grid.width));
  for (std::size_t i = 0; i < grid.height; ++i) {
    for (std::size_t k = 0; k < grid.width; ++k) out[i][k] = grid.values[i * grid.width + k];
  }
  return out;
}

}  // namespace

const char* encoder_name(Encoder e) { return e == Encoder::Spp ? "spp" : "bovw"; }

Encoder parse_encoder(const std::string& text) {
  if (text == "bovw") return Encoder::Bovw;
  if (text == "spp") return Encoder::Spp;
  throw ValidationError("unknown encoder '" + text + "' (expected bovw or spp)");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<double> encode_layer(const FeatureMap& map, const EncoderOptions& encoder,
                                 const Codebook* book) {
  if (encoder.encoder == Encoder::Spp) {
    auto desc = spp_descriptor(map, encoder.spp);
    for (double v : desc) {
      if (v < 0.0) {
        throw ValidationError("spp encoder needs non-negative activations for the "
                              "intersection kernel");
      }
    }
    return desc;
  }
  if (book == nullptr) throw ValidationError("bovw encoding needs a codebook");
  return histogram_values(encode_histogram(map, *book));
}

std::vector<double> kernel_input(std::span<const double> raw, const EncoderOptions& encoder) {
  std::vector<double> out(raw.begin(), raw.end());
  if (encoder.normalize_histograms) {
    double total = 0.0;
    for (double v : out) total += v;
    if (total > 0.0) {
      for (double& v : out) v /= total;
    }
  }
  return out;
}

ScaleModel train_scale(std::span<const ImageRecord* const> records, const std::string& scale_tag,
                       std::size_t num_classes, std::span<const std::string> layer_names,
                       const ScaleTrainOptions& options) {
  if (records.empty()) throw ValidationError("scale '" + scale_tag + "' has no training records");
  const std::size_t layers = layer_names.size();
  ScaleModel model;
  model.scale_tag = scale_tag;
  model.num_classes = num_classes;
  model.layer_names.assign(layer_names.begin(), layer_names.end());
  model.encoder = options.encoder;
  model.trace_normalize = options.trace_normalize;
  for (const auto* r : records) {
    if (r->layer_maps.size() != layers) {
      throw ValidationError("record '" + r->image_id + "' has " +
                            std::to_string(r->layer_maps.size()) + " layers, expected " +
                            std::to_string(layers));
    }
    model.train_ids.push_back(r->image_id);
    model.train_labels.push_back(r->label);
  }

  auto start = Clock::now();
  if (options.encoder.encoder == Encoder::Bovw) {
    model.codebooks.resize(layers);
    parallel_for(layers, [&](std::size_t l) {
      std::vector<const FeatureMap*> maps;
      maps.reserve(records.size());
      for (const auto* r : records) maps.push_back(&r->layer_maps[l]);
      const auto descriptors =
          collect_descriptors(maps, options.encoder.descriptor_cap, options.encoder.words,
                              derive_seed(options.seed, 2 * l),
                              options.encoder.l2_normalize_descriptors);
      KMeansOptions km;
      km.max_iterations = options.encoder.kmeans_max_iterations;
      km.l2_normalize = options.encoder.l2_normalize_descriptors;
      auto book = train_codebook(descriptors, options.encoder.words,
                                 derive_seed(options.seed, 2 * l + 1), km);
      book.layer_index = l;
      model.codebooks[l] = std::move(book);
    });
  }
  model.timings.codebooks = seconds_since(start);

  start = Clock::now();
  model.train_features = encode_images(model, records);
  model.timings.encoding = seconds_since(start);

  start = Clock::now();
  std::vector<Matrix> grams(layers);
  model.layer_scales.assign(layers, 1.0);
  for (std::size_t l = 0; l < layers; ++l) {
    grams[l] = gram_matrix(kernel_inputs(model.train_features[l], model.encoder));
    if (options.trace_normalize) {
      model.layer_scales[l] = trace_scale(grams[l]);
      for (double& v : grams[l].values()) v = model.layer_scales[l] * v;
    }
  }
  model.timings.grams = seconds_since(start);

  start = Clock::now();
  if (!options.fixed_weights.empty()) {
    if (options.fixed_weights.size() != layers) {
      throw ValidationError("fixed_weights lists " + std::to_string(options.fixed_weights.size()) +
                            " values for " + std::to_string(layers) + " layers");
    }
    double sum = 0.0;
    for (double w : options.fixed_weights) {
      if (!(w >= 0.0)) throw ValidationError("fixed_weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("fixed_weights must sum to 1");
    model.weights.weights = options.fixed_weights;
    model.weights.converged = true;
    model.weights.objective =
        qp_objective(assemble_qp(grams, ideal_matrix(model.train_labels), options.lambda),
                     model.weights.weights);
  } else {
    model.weights = learn_weights(grams, model.train_labels, options.lambda, options.qp_tol,
                                  options.qp_max_iter);
  }
  model.timings.weights = seconds_since(start);

  start = Clock::now();
  KernelSet set{std::move(grams), model.weights.weights, model.train_labels};
  const Matrix fused = fuse_kernels(set);
  model.svm = train_ovo(fused, model.train_labels, num_classes, options.svm);
  model.timings.svm = seconds_since(start);
  return model;
}

std::vector<LayerFeatures> encode_images(const ScaleModel& model,
                                         std::span<const ImageRecord* const> records) {
  const std::size_t layers = model.num_layers();
  std::vector<LayerFeatures> out(layers, LayerFeatures(records.size()));
  parallel_for(records.size(), [&](std::size_t i) {
    const auto* r = records[i];
    if (r->layer_maps.size() != layers) {
      throw ValidationError("record '" + r->image_id + "' has " +
                            std::to_string(r->layer_maps.size()) + " layers, model has " +
                            std::to_string(layers));
    }
    for (std::size_t l = 0; l < layers; ++l) {
      const Codebook* book = model.codebooks.empty() ? nullptr : &model.codebooks[l];
      out[l][i] = encode_layer(r->layer_maps[l], model.encoder, book);
    }
  });
  return out;
}

Matrix scale_cross_kernel(const ScaleModel& model, std::span<const LayerFeatures> test_features) {
  std::vector<LayerFeatures> train_in, test_in;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    train_in.push_back(kernel_inputs(model.train_features[l], model.encoder));
    test_in.push_back(kernel_inputs(test_features[l], model.encoder));
  }
  return cross_gram(train_in, test_in, model.weights.weights, model.layer_scales);
}

std::vector<OvoPrediction> predict_scale(const ScaleModel& model,
                                         std::span<const ImageRecord* const> records) {
  if (records.empty()) return {};
  const auto features = encode_images(model, records);
  return predict_ovo(model.svm, scale_cross_kernel(model, features));
}

void save_scale_model(const ScaleModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "scale.txt", std::ios::trunc);
    meta << "scale_tag=" << model.scale_tag << '\n'
         << "num_classes=" << model.num_classes << '\n'
         << "layers=";
    for (std::size_t l = 0; l < model.layer_names.size(); ++l) {
      meta << (l ? "," : "") << model.layer_names[l];
    }
    meta << '\n'
         << "encoder=" << encoder_name(model.encoder.encoder) << '\n'
         << "words=" << model.encoder.words << '\n'
         << "normalize_histograms=" << (model.encoder.normalize_histograms ? 1 : 0) << '\n'
         << "normalize_descriptors=" << (model.encoder.l2_normalize_descriptors ? 1 : 0) << '\n'
         << "spp_levels=";
    for (std::size_t i = 0; i < model.encoder.spp.levels.size(); ++i) {
      meta << (i ? "," : "") << model.encoder.spp.levels[i];
    }
    meta << '\n' << "trace_normalize=" << (model.trace_normalize ? 1 : 0) << '\n' << "layer_scales=";
    for (std::size_t l = 0; l < model.layer_scales.size(); ++l) {
      meta << (l ? "," : "") << fmt_double(model.layer_scales[l]);
    }
    meta << '\n' << "weights=";
    for (std::size_t l = 0; l < model.weights.weights.size(); ++l) {
      meta << (l ? "," : "") << fmt_double(model.weights.weights[l]);
    }
    meta << '\n'
         << "objective=" << fmt_double(model.weights.objective) << '\n'
         << "qp_iterations=" << model.weights.iterations << '\n'
         << "qp_converged=" << (model.weights.converged ? 1 : 0) << '\n';
    if (!meta) throw IoError("cannot write scale metadata in '" + dir.string() + "'", 0);
  }
  {
    std::ofstream ids(dir / "train_ids.tsv", std::ios::trunc);
    for (std::size_t i = 0; i < model.train_ids.size(); ++i) {
      ids << model.train_ids[i] << '\t' << model.train_labels[i] << '\n';
    }
  }
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (!model.codebooks.empty()) {
      save_codebook(model.codebooks[l], dir / ("codebook_" + std::to_string(l)));
    }
    save_features(model.train_features[l], dir / ("features_" + std::to_string(l) + ".adpm"));
  }
  save_ovo_model(model.svm, dir / "svm.txt");
}

ScaleModel load_scale_model(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "scale.txt");
  if (!meta) throw ValidationError("missing scale metadata in '" + dir.string() + "'");
  ScaleModel model;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "scale_tag") model.scale_tag = value;
    else if (key == "num_classes") model.num_classes = std::stoull(value);
    else if (key == "layers") {
      std::istringstream in(value);
      std::string name;
      while (std::getline(in, name, ',')) model.layer_names.push_back(name);
    } else if (key == "encoder") model.encoder.encoder = parse_encoder(value);
    else if (key == "words") model.encoder.words = std::stoull(value);
    else if (key == "normalize_histograms") model.encoder.normalize_histograms = value == "1";
    else if (key == "normalize_descriptors") model.encoder.l2_normalize_descriptors = value == "1";
    else if (key == "spp_levels") {
      model.encoder.spp.levels.clear();
      for (double v : parse_doubles(value)) model.encoder.spp.levels.push_back(static_cast<std::size_t>(v));
    } else if (key == "trace_normalize") model.trace_normalize = value == "1";
    else if (key == "layer_scales") model.layer_scales = parse_doubles(value);
    else if (key == "weights") model.weights.weights = parse_doubles(value);
    else if (key == "objective") model.weights.objective = std::strtod(value.c_str(), nullptr);
    else if (key == "qp_iterations") model.weights.iterations = std::stoull(value);
    else if (key == "qp_converged") model.weights.converged = value == "1";
  }
  const std::size_t layers = model.layer_names.size();
  if (layers == 0 || model.weights.weights.size() != layers || model.layer_scales.size() != layers) {
    throw FormatError("scale metadata in '" + dir.string() + "' is incomplete");
  }

  std::ifstream ids(dir / "train_ids.tsv");
  while (std::getline(ids, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    model.train_ids.push_back(line.substr(0, tab));
    model.train_labels.push_back(std::stoull(line.substr(tab + 1)));
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (model.encoder.encoder == Encoder::Bovw) {
      model.codebooks.push_back(load_codebook(dir / ("codebook_" + std::to_string(l))));
    }
    model.train_features.push_back(load_features(dir / ("features_" + std::to_string(l) + ".adpm")));
    if (model.train_features.back().size() != model.train_ids.size()) {
      throw FormatError("training features of layer " + std::to_string(l) +
                        " do not match the training id list");
    }
  }
  model.svm = load_ovo_model(dir / "svm.txt");
  if (model.svm.num_train != model.train_ids.size()) {
    throw FormatError("svm model size does not match the training id list");
  }
  return model;
}

}  // namespace adpm
