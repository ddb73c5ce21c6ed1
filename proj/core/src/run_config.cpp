#include "adpm/run_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adpm/error.hpp"

namespace adpm {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw ValidationError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (!value.empty() && value.front() != '-') v = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ValidationError("config key '" + key + "': expected a non-negative integer, got '" +
                          value + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ValidationError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "workspace") workspace = value;
  else if (key == "manifest" || key == "manifests") {
    for (const auto& m : split_list(value)) manifests.emplace_back(m);
  } else if (key == "words") words = to_uint(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "svm_c") svm_c = to_double(key, value);
  else if (key == "svm_tol") svm_tol = to_double(key, value);
  else if (key == "svm_max_passes") svm_max_passes = to_uint(key, value);
  else if (key == "seed") seed = to_uint(key, value);
  else if (key == "split_fraction") split_fraction = to_double(key, value);
  else if (key == "folds") folds = to_uint(key, value);
  else if (key == "repeats") repeats = to_uint(key, value);
  else if (key == "scales") scales = split_list(value);
  else if (key == "normalize_histograms") normalize_histograms = to_bool(key, value);
  else if (key == "trace_normalize") trace_normalize = to_bool(key, value);
  else if (key == "normalize_descriptors") normalize_descriptors = to_bool(key, value);
  else if (key == "encoder") encoder = parse_encoder(value);
  else if (key == "descriptor_cap") descriptor_cap = to_uint(key, value);
  else if (key == "kmeans_max_iter") kmeans_max_iter = to_uint(key, value);
  else if (key == "spp_levels") {
    spp_levels.clear();
    for (const auto& item : split_list(value)) spp_levels.push_back(to_uint(key, item));
  } else if (key == "fixed_weights") {
    fixed_weights.clear();
    for (const auto& item : split_list(value)) fixed_weights.push_back(to_double(key, item));
  } else if (key == "qp_tol") qp_tol = to_double(key, value);
  else if (key == "qp_max_iter") qp_max_iter = to_uint(key, value);
  else throw ValidationError("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  RunConfig cfg;
  cfg.workspace = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "workspace") {
      const std::filesystem::path ws = value;
      cfg.workspace = ws.is_absolute() ? ws : cfg.workspace / ws;
    } else {
      cfg.set(key, value);
    }
  }
  return cfg;
}

void RunConfig::validate() const {
  if (words < 2) throw ValidationError("words must be >= 2");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(svm_c > 0.0)) throw ValidationError("svm_c must be > 0");
  if (!(svm_tol > 0.0)) throw ValidationError("svm_tol must be > 0");
  if (svm_max_passes == 0) throw ValidationError("svm_max_passes must be >= 1");
  if (!uses_folds() && !(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ValidationError("split_fraction must lie strictly between 0 and 1");
  }
  if (folds == 1) throw ValidationError("folds must be 0 (fraction split) or >= 2");
  if (repeats == 0) throw ValidationError("repeats must be >= 1");
  if (descriptor_cap < words) throw ValidationError("descriptor_cap must be >= words");
  if (kmeans_max_iter == 0) throw ValidationError("kmeans_max_iter must be >= 1");
  SppConfig{spp_levels}.validate();
  if (!fixed_weights.empty()) {
    double sum = 0.0;
    for (double w : fixed_weights) {
      if (w < 0.0) throw ValidationError("fixed_weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("fixed_weights must sum to 1");
  }
  if (!(qp_tol > 0.0)) throw ValidationError("qp_tol must be > 0");
  if (qp_max_iter == 0) throw ValidationError("qp_max_iter must be >= 1");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  auto path_str = [](const std::filesystem::path& p) { return p.generic_string(); };
  auto bool_str = [](bool b) { return std::string(b ? "true" : "false"); };
  return {
      {"manifest", join(manifests, path_str)},
      {"words", std::to_string(words)},
      {"lambda", num(lambda)},
      {"svm_c", num(svm_c)},
      {"svm_tol", num(svm_tol)},
      {"svm_max_passes", std::to_string(svm_max_passes)},
      {"seed", std::to_string(seed)},
      {"split_fraction", num(split_fraction)},
      {"folds", std::to_string(folds)},
      {"repeats", std::to_string(repeats)},
      {"scales", join(scales, [](const std::string& s) { return s; })},
      {"normalize_histograms", bool_str(normalize_histograms)},
      {"trace_normalize", bool_str(trace_normalize)},
      {"normalize_descriptors", bool_str(normalize_descriptors)},
      {"encoder", encoder_name(encoder)},
      {"descriptor_cap", std::to_string(descriptor_cap)},
      {"kmeans_max_iter", std::to_string(kmeans_max_iter)},
      {"spp_levels", join(spp_levels, [](std::size_t n) { return std::to_string(n); })},
      {"fixed_weights", join(fixed_weights, num)},
      {"qp_tol", num(qp_tol)},
      {"qp_max_iter", std::to_string(qp_max_iter)},
  };
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : workspace / p;
}

ScaleTrainOptions RunConfig::train_options() const {
  ScaleTrainOptions o;
  o.encoder.encoder = encoder;
  o.encoder.words = words;
  o.encoder.descriptor_cap = descriptor_cap;
  o.encoder.kmeans_max_iterations = kmeans_max_iter;
  o.encoder.l2_normalize_descriptors = normalize_descriptors;
  o.encoder.normalize_histograms = normalize_histograms;
  o.encoder.spp.levels = spp_levels;
  o.lambda = lambda;
  o.qp_tol = qp_tol;
  o.qp_max_iter = qp_max_iter;
  o.trace_normalize = trace_normalize;
  o.svm.c = svm_c;
  o.svm.tol = svm_tol;
  o.svm.max_passes = svm_max_passes;
  o.seed = seed;
  o.fixed_weights = fixed_weights;
  return o;
}

}  // namespace adpm
