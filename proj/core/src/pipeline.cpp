#include "adpm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "adpm/error.hpp"
#include "adpm/multiscale_ensemble.hpp"
#include "adpm/parallel.hpp"

namespace adpm {
namespace {

using ScaleIndex = std::map<std::string, std::map<std::string, const ImageRecord*>>;

// image_id -> scale_tag -> record
ScaleIndex index_records(const Dataset& data) {
  ScaleIndex index;
  for (const auto& r : data.records) index[r.image_id][r.scale_tag] = &r;
  return index;
}

std::string protocol_name(const RunConfig& cfg) {
  std::ostringstream out;
  if (cfg.uses_folds()) {
    out << "stratified " << cfg.folds << "-fold cross validation x " << cfg.repeats << " repeats";
  } else {
    out << "stratified split_fraction=" << cfg.split_fraction << " x " << cfg.repeats
        << " repeats";
  }
  return out.str();
}

std::vector<MultiscaleImage> gather_images(const ScaleIndex& index,
                                           std::span<const std::string> ids) {
  std::vector<MultiscaleImage> images;
  auto add = [&](const std::string& id, const std::map<std::string, const ImageRecord*>& scales) {
    MultiscaleImage img;
    img.image_id = id;
    img.label = scales.begin()->second->label;
    img.by_scale = scales;
    images.push_back(std::move(img));
  };
  if (ids.empty()) {
    for (const auto& [id, scales] : index) add(id, scales);
  } else {
    for (const auto& id : ids) {
      const auto it = index.find(id);
      if (it == index.end()) throw ValidationError("unknown image id '" + id + "'");
      add(id, it->second);
    }
  }
  return images;
}

}  // namespace

Dataset load_dataset(std::span<const DatasetManifest> manifests,
                     std::span<const std::string> include_scales) {
  if (manifests.empty()) throw ValidationError("no manifests given");
  Dataset data;
  data.num_classes = manifests.front().num_classes;
  data.layer_names = manifests.front().layer_names;
  const std::set<std::string> include(include_scales.begin(), include_scales.end());
  std::set<std::string> scales;
  for (const auto& m : manifests) {
    if (m.num_classes != data.num_classes) {
      throw ValidationError("manifest '" + m.source.string() + "' declares " +
                            std::to_string(m.num_classes) + " classes, expected " +
                            std::to_string(data.num_classes));
    }
    if (m.layer_names != data.layer_names) {
      throw ValidationError("manifest '" + m.source.string() + "' lists different layers");
    }
    for (const auto& rec : m.records) {
      if (!include.empty() && !include.contains(rec.scale_tag)) continue;
      data.records.push_back(load_record(rec));
      scales.insert(rec.scale_tag);
    }
  }
  for (const auto& s : include) {
    if (!scales.contains(s)) throw ValidationError("included scale '" + s + "' has no records");
  }
  data.scales.assign(scales.begin(), scales.end());
  if (data.records.empty()) throw ValidationError("dataset has no records");
  return data;
}

Dataset load_dataset(const RunConfig& cfg) {
  std::vector<DatasetManifest> manifests;
  for (const auto& p : cfg.manifests) manifests.push_back(load_manifest(cfg.resolve(p)));
  return load_dataset(manifests, cfg.scales);
}

std::vector<ImageUnit> dataset_images(const Dataset& data) {
  std::map<std::string, std::size_t> labels;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : data.records) {
    if (!seen.emplace(r.image_id, r.scale_tag).second) {
      throw ValidationError("image '" + r.image_id + "' appears twice at scale '" +
                            r.scale_tag + "'");
    }
    const auto [it, inserted] = labels.emplace(r.image_id, r.label);
    if (!inserted && it->second != r.label) {
      throw ValidationError("image '" + r.image_id + "' has different labels across scales");
    }
  }
  std::vector<ImageUnit> out;
  for (const auto& [id, label] : labels) out.push_back({id, label});
  return out;
}

std::vector<Split> make_splits(std::span<const ImageUnit> images, std::size_t num_classes,
                               const RunConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<std::string>> by_class(num_classes);
  for (const auto& img : images) {
    if (img.label >= num_classes) throw ValidationError("label out of range in split");
    by_class[img.label].push_back(img.image_id);
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::size_t n = by_class[k].size();
    if (cfg.uses_folds() && n < cfg.folds) {
      throw ValidationError("class " + std::to_string(k) + " has " + std::to_string(n) +
                            " images, fewer than " + std::to_string(cfg.folds) + " folds");
    }
    if (!cfg.uses_folds() && n < 2) {
      throw ValidationError("class " + std::to_string(k) + " needs at least 2 images to split");
    }
  }

  std::vector<Split> splits;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 1000003 + r));
    auto shuffled = by_class;
    for (auto& ids : shuffled) std::shuffle(ids.begin(), ids.end(), rng);

    const std::size_t folds = cfg.uses_folds() ? cfg.folds : 1;
    for (std::size_t f = 0; f < folds; ++f) {
      Split split;
      split.repeat = r;
      split.fold = f;
      for (const auto& ids : shuffled) {
        const std::size_t n = ids.size();
        for (std::size_t p = 0; p < n; ++p) {
          bool test;
          if (cfg.uses_folds()) {
            test = p % folds == f;
          } else {
            auto n_train = static_cast<std::size_t>(std::llround(cfg.split_fraction * n));
            n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
            test = p >= n_train;
          }
          (test ? split.test_ids : split.train_ids).push_back(ids[p]);
        }
      }
      std::sort(split.train_ids.begin(), split.train_ids.end());
      std::sort(split.test_ids.begin(), split.test_ids.end());
      splits.push_back(std::move(split));
    }
  }
  return splits;
}

TrainedBundle train_bundle(const Dataset& data, std::span<const std::string> train_ids,
                           const RunConfig& cfg) {
  cfg.validate();
  TrainedBundle bundle;
  bundle.num_classes = data.num_classes;
  bundle.layer_names = data.layer_names;
  bundle.config = cfg.entries();

  const std::set<std::string> wanted(train_ids.begin(), train_ids.end());
  const auto options = cfg.train_options();
  bundle.scales.resize(data.scales.size());
  parallel_for(data.scales.size(), [&](std::size_t s) {
    const auto& tag = data.scales[s];
    std::vector<const ImageRecord*> records;
    for (const auto& r : data.records) {
      if (r.scale_tag == tag && (wanted.empty() || wanted.contains(r.image_id))) {
        records.push_back(&r);
      }
    }
    std::sort(records.begin(), records.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->image_id < b->image_id; });
    try {
      bundle.scales[s] = train_scale(records, tag, data.num_classes, data.layer_names, options);
    } catch (const ValidationError& e) {
      throw ValidationError("training scale '" + tag + "': " + e.what());
    }
  });
  return bundle;
}

TrainedBundle run_train(const RunConfig& cfg) {
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  return train_bundle(data, {}, cfg);
}

void save_bundle(const TrainedBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir / "bundle.txt", std::ios::trunc);
  meta << "adpm-bundle 1\n"
       << "num_classes=" << bundle.num_classes << '\n'
       << "layers=";
  for (std::size_t l = 0; l < bundle.layer_names.size(); ++l) {
    meta << (l ? "," : "") << bundle.layer_names[l];
  }
  meta << "\nscales=";
  for (std::size_t s = 0; s < bundle.scales.size(); ++s) {
    meta << (s ? "," : "") << bundle.scales[s].scale_tag;
  }
  meta << '\n';
  for (const auto& [k, v] : bundle.config) meta << "config." << k << '=' << v << '\n';
  if (!meta) throw IoError("cannot write bundle metadata", 0);

  std::ofstream weights(dir / "weights.tsv", std::ios::trunc);
  weights << "scale";
  for (const auto& l : bundle.layer_names) weights << '\t' << l;
  weights << '\n';
  for (const auto& scale : bundle.scales) {
    weights << scale.scale_tag;
    for (double w : scale.weights.weights) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.12g", w);
      weights << '\t' << buf;
    }
    weights << '\n';
  }
  for (const auto& scale : bundle.scales) save_scale_model(scale, dir / ("scale_" + scale.scale_tag));
}

TrainedBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "bundle.txt");
  if (!meta) throw ValidationError("'" + dir.string() + "' is not a bundle directory");
  std::string line;
  std::getline(meta, line);
  if (line != "adpm-bundle 1") throw FormatError("unsupported bundle header '" + line + "'");
  TrainedBundle bundle;
  std::vector<std::string> scales;
  auto split = [](const std::string& v) {
    std::vector<std::string> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
  };
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "num_classes") bundle.num_classes = std::stoull(value);
    else if (key == "layers") bundle.layer_names = split(value);
    else if (key == "scales") scales = split(value);
    else if (key.rfind("config.", 0) == 0) bundle.config.emplace_back(key.substr(7), value);
  }
  for (const auto& tag : scales) {
    auto model = load_scale_model(dir / ("scale_" + tag));
    if (model.layer_names != bundle.layer_names || model.num_classes != bundle.num_classes) {
      throw FormatError("scale '" + tag + "' disagrees with the bundle header");
    }
    bundle.scales.push_back(std::move(model));
  }
  if (bundle.scales.empty()) throw FormatError("bundle has no scales");
  return bundle;
}

TaskResult evaluate(const TrainedBundle& bundle, const Dataset& data,
                    std::span<const std::string> test_ids) {
  if (data.layer_names.size() != bundle.layer_names.size()) {
    throw ValidationError("test data has " + std::to_string(data.layer_names.size()) +
                          " layers, bundle expects " + std::to_string(bundle.layer_names.size()));
  }
  if (data.num_classes > bundle.num_classes) {
    throw ValidationError("test data declares more classes than the bundle was trained on");
  }
  const auto index = index_records(data);
  const auto images = gather_images(index, test_ids);
  if (images.empty()) throw ValidationError("no test images");

  TaskResult result;
  result.rows = predict_multiscale(bundle.scales, images);

  std::vector<std::size_t> truth, predicted;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_scale;  // correct, seen
  for (const auto& row : result.rows) {
    truth.push_back(row.truth);
    predicted.push_back(row.predicted);
    for (const auto& s : row.per_scale) {
      auto& [correct, seen] = per_scale[s.scale_tag];
      correct += s.predicted == row.truth ? 1 : 0;
      ++seen;
    }
  }
  result.metrics = report_metrics(truth, predicted, bundle.num_classes);
  for (const auto& [scale, cs] : per_scale) {
    result.scale_accuracy[scale] =
        static_cast<double>(cs.first) / static_cast<double>(cs.second);
  }
  for (const auto& scale : bundle.scales) {
    result.weights[scale.scale_tag] = scale.weights.weights;
    result.timings[scale.scale_tag] = scale.timings;
  }
  return result;
}

PredictionReport run_predict(const TrainedBundle& bundle, const DatasetManifest& test) {
  if (test.records.empty()) throw ValidationError("test manifest has no records");
  std::vector<std::string> trained;
  for (const auto& s : bundle.scales) trained.push_back(s.scale_tag);

  PredictionReport report;
  report.num_classes = bundle.num_classes;
  report.layer_names = bundle.layer_names;
  std::set<std::string> skipped;
  for (const auto& r : test.records) {
    if (std::find(trained.begin(), trained.end(), r.scale_tag) == trained.end()) {
      skipped.insert(r.scale_tag);
    }
  }
  for (const auto& s : skipped) {
    report.warnings.push_back("scale '" + s + "' has no trained model; its records are ignored");
  }
  const std::vector<DatasetManifest> manifests{test};
  std::vector<std::string> present;
  {
    std::set<std::string> tags;
    for (const auto& r : test.records) tags.insert(r.scale_tag);
    for (const auto& t : trained) {
      if (tags.contains(t)) present.push_back(t);
    }
  }
  if (present.empty()) throw ValidationError("test manifest shares no scale with the bundle");
  const Dataset data = load_dataset(manifests, present);
  dataset_images(data);  // label consistency

  report.result = evaluate(bundle, data);
  for (const auto& row : report.result.rows) {
    for (const auto& m : row.missing_scales) {
      report.warnings.push_back("image '" + row.image_id + "' is missing scale '" + m + "'");
    }
  }
  return report;
}

CrossvalReport crossval(const Dataset& data, const RunConfig& cfg) {
  cfg.validate();
  const auto images = dataset_images(data);
  const auto splits = make_splits(images, data.num_classes, cfg);

  CrossvalReport report;
  report.num_classes = data.num_classes;
  report.layer_names = data.layer_names;
  report.scales = data.scales;
  report.config = cfg.entries();
  report.protocol = protocol_name(cfg);
  report.tasks.resize(splits.size());

  parallel_for(splits.size(), [&](std::size_t t) {
    const auto& split = splits[t];
    const auto bundle = train_bundle(data, split.train_ids, cfg);
    auto result = evaluate(bundle, data, split.test_ids);
    result.repeat = split.repeat;
    result.fold = split.fold;
    report.tasks[t] = std::move(result);
  });

  std::vector<double> accuracies;
  std::map<std::string, std::vector<double>> scale_acc;
  std::vector<MetricsReport> parts;
  for (const auto& task : report.tasks) {
    accuracies.push_back(task.metrics.accuracy);
    parts.push_back(task.metrics);
    for (const auto& [scale, acc] : task.scale_accuracy) scale_acc[scale].push_back(acc);
  }
  report.accuracy = mean_std(accuracies);
  for (const auto& [scale, values] : scale_acc) report.scale_accuracy[scale] = mean_std(values);
  report.pooled = pool_metrics(parts);
  return report;
}

CrossvalReport run_crossval(const RunConfig& cfg) {
  cfg.validate();
  return crossval(load_dataset(cfg), cfg);
}

}  // namespace adpm
