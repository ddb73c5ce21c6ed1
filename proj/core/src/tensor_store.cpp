#include "adpm/tensor_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "adpm/error.hpp"

namespace adpm {
namespace {

template <typename T>
void put_le(std::array<char, 8>& buf, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((u >> (8 * i)) & 0xFFu);
  }
}

template <typename T>
T get_le(const char* bytes) {
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return static_cast<T>(u);
}

class CountingWriter {
public:
  explicit CountingWriter(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    std::array<char, 8> buf{};
    put_le(buf, value);
    write(buf.data(), sizeof(T));
  }

  void write(const char* data, std::size_t n) {
    out_.write(data, static_cast<std::streamsize>(n));
    if (!out_) throw IoError("tensor write failed", offset_);
    offset_ += n;
  }

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::ostream& out_;
  std::uint64_t offset_ = 0;
};

class CountingReader {
public:
  explicit CountingReader(std::istream& in) : in_(in) {}

  void read(char* data, std::size_t n, const char* what) {
    in_.read(data, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(in_.gcount());
    if (got != n) {
      throw IoError(std::string("truncated tensor: ") + what, offset_ + got);
    }
    offset_ += n;
  }

  template <typename T>
  T get(const char* what) {
    std::array<char, 8> buf{};
    read(buf.data(), sizeof(T), what);
    return get_le<T>(buf.data());
  }

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::size_t parse_count(const std::string& text, const std::string& context) {
  if (text.empty() || !std::all_of(text.begin(), text.end(),
                                   [](char c) { return c >= '0' && c <= '9'; })) {
    throw ValidationError(context + ": expected a non-negative integer, got '" + text + "'");
  }
  try {
    return static_cast<std::size_t>(std::stoull(text));
  } catch (const std::out_of_range&) {
    throw ValidationError(context + ": integer out of range '" + text + "'");
  }
}

using Shape = std::tuple<std::size_t, std::size_t, std::size_t>;

}  // namespace

FeatureMap FeatureMap::zeros(std::size_t height, std::size_t width, std::size_t channels) {
  FeatureMap map;
  map.height = height;
  map.width = width;
  map.channels = channels;
  map.values.assign(height * width * channels, 0.0f);
  return map;
}

void FeatureMap::validate() const {
  if (height == 0 || width == 0 || channels == 0) {
    throw ValidationError("feature map has a zero dimension");
  }
  if (values.size() != height * width * channels) {
    throw ValidationError("feature map holds " + std::to_string(values.size()) +
                          " values, shape requires " +
                          std::to_string(height * width * channels));
  }
  const auto bad = std::find_if(values.begin(), values.end(),
                                [](float v) { return !std::isfinite(v); });
  if (bad != values.end()) {
    throw ValidationError("feature map has a non-finite value at index " +
                          std::to_string(bad - values.begin()));
  }
}

std::uint64_t write_tensor(const FeatureMap& map, std::ostream& out) {
  map.validate();
  CountingWriter writer(out);
  writer.write(kTensorMagic, sizeof(kTensorMagic));
  writer.put<std::uint32_t>(kTensorVersion);
  writer.put<std::uint64_t>(map.height);
  writer.put<std::uint64_t>(map.width);
  writer.put<std::uint64_t>(map.channels);

  std::vector<char> payload(map.values.size() * 4);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(map.values[i]);
    for (std::size_t b = 0; b < 4; ++b) {
      payload[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
  }
  writer.write(payload.data(), payload.size());
  out.flush();
  if (!out) throw IoError("tensor flush failed", writer.offset());
  return writer.offset();
}

FeatureMap read_tensor(std::istream& in) {
  CountingReader reader(in);
  std::array<char, 4> magic{};
  reader.read(magic.data(), magic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kTensorMagic)) {
    throw FormatError("bad tensor magic '" + std::string(magic.data(), magic.size()) +
                      "', expected 'ADPM'");
  }
  const auto version = reader.get<std::uint32_t>("version");
  if (version != kTensorVersion) {
    throw FormatError("unsupported tensor format version " + std::to_string(version));
  }
  FeatureMap map;
  const auto h = reader.get<std::uint64_t>("height");
  const auto w = reader.get<std::uint64_t>("width");
  const auto c = reader.get<std::uint64_t>("channels");
  if (h == 0 || w == 0 || c == 0) {
    throw FormatError("tensor header has a zero dimension");
  }
  // Guard against absurd headers before allocating.
  constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;
  if (h > kMaxElements / w || h * w > kMaxElements / c) {
    throw FormatError("tensor header dimensions are implausibly large");
  }
  map.height = h;
  map.width = w;
  map.channels = c;

  const std::size_t count = h * w * c;
  std::vector<char> payload(count * 4);
  reader.read(payload.data(), payload.size(), "payload");
  map.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    map.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(payload.data() + 4 * i));
  }
  map.validate();
  return map;
}

std::uint64_t save_tensor(const FeatureMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing", 0);
  return write_tensor(map, out);
}

FeatureMap load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open tensor file '" + path.string() + "'");
  try {
    return read_tensor(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what(), e.offset());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");

  DatasetManifest manifest;
  manifest.source = path;
  const auto base = path.parent_path();
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto text = line.substr(1);
      if (!text.empty() && text.front() == ' ') text.erase(0, 1);
      manifest.comments.push_back(std::move(text));
      continue;
    }
    const auto fields = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!have_header) {
      const std::string prefix = "num_classes=";
      if (fields[0].rfind(prefix, 0) != 0) {
        throw ValidationError(where + ": header must start with 'num_classes='");
      }
      manifest.num_classes = parse_count(fields[0].substr(prefix.size()), where);
      if (manifest.num_classes == 0) {
        throw ValidationError(where + ": num_classes must be positive");
      }
      manifest.layer_names.assign(fields.begin() + 1, fields.end());
      if (manifest.layer_names.empty()) {
        throw ValidationError(where + ": header lists no layer names");
      }
      have_header = true;
      continue;
    }

    if (fields.size() < 3) {
      throw ValidationError(where + ": record needs image_id, label, scale_tag and paths");
    }
    ManifestRecord record;
    record.image_id = fields[0];
    if (record.image_id.empty()) throw ValidationError(where + ": empty image_id");
    const std::string rec = "record '" + record.image_id + "' (" + where + ")";
    record.label = parse_count(fields[1], rec + " label");
    if (record.label >= manifest.num_classes) {
      throw ValidationError(rec + ": label " + std::to_string(record.label) +
                            " >= num_classes " + std::to_string(manifest.num_classes));
    }
    record.scale_tag = fields[2];
    if (record.scale_tag.empty()) throw ValidationError(rec + ": empty scale_tag");
    const std::size_t layers = fields.size() - 3;
    if (layers != manifest.num_layers()) {
      throw ValidationError(rec + ": lists " + std::to_string(layers) + " layers, header has " +
                            std::to_string(manifest.num_layers()));
    }
    for (std::size_t l = 0; l < layers; ++l) {
      std::filesystem::path p = fields[3 + l];
      record.layer_paths.push_back(p.is_absolute() ? p : base / p);
    }
    manifest.records.push_back(std::move(record));
  }
  if (!have_header) throw ValidationError(path.string() + ": missing header line");

  // Every file must parse; shapes must agree per (scale, layer).
  std::map<std::pair<std::string, std::size_t>, std::pair<Shape, std::string>> shapes;
  for (const auto& record : manifest.records) {
    for (std::size_t l = 0; l < record.layer_paths.size(); ++l) {
      const auto& file = record.layer_paths[l];
      if (!std::filesystem::exists(file)) {
        throw ValidationError("record '" + record.image_id + "': missing file '" +
                              file.string() + "'");
      }
      FeatureMap map;
      try {
        map = load_tensor(file);
      } catch (const Error& e) {
        throw ValidationError("record '" + record.image_id + "': " + e.what());
      }
      const Shape shape{map.height, map.width, map.channels};
      const auto key = std::make_pair(record.scale_tag, l);
      const auto [it, inserted] = shapes.try_emplace(key, shape, record.image_id);
      if (!inserted && it->second.first != shape) {
        throw ValidationError("record '" + record.image_id + "': layer '" +
                              manifest.layer_names[l] + "' shape differs from record '" +
                              it->second.second + "' at scale '" + record.scale_tag + "'");
      }
    }
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest '" + path.string() + "' for writing", 0);
  const auto base = std::filesystem::absolute(path).parent_path().lexically_normal();
  auto portable = [&](const std::filesystem::path& p) {
    const auto abs = std::filesystem::absolute(p).lexically_normal();
    const auto rel = abs.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return abs.generic_string();
  };

  for (const auto& comment : manifest.comments) out << "# " << comment << '\n';
  out << "num_classes=" << manifest.num_classes;
  for (const auto& name : manifest.layer_names) out << '\t' << name;
  out << '\n';
  for (const auto& record : manifest.records) {
    out << record.image_id << '\t' << record.label << '\t' << record.scale_tag;
    for (const auto& p : record.layer_paths) out << '\t' << portable(p);
    out << '\n';
  }
  if (!out) throw IoError("manifest write failed", static_cast<std::uint64_t>(out.tellp()));
}

ImageRecord load_record(const ManifestRecord& record) {
  ImageRecord image;
  image.image_id = record.image_id;
  image.label = record.label;
  image.scale_tag = record.scale_tag;
  image.layer_maps.reserve(record.layer_paths.size());
  for (const auto& p : record.layer_paths) image.layer_maps.push_back(load_tensor(p));
  return image;
}

std::vector<ImageRecord> load_records(const DatasetManifest& manifest) {
  std::vector<ImageRecord> images;
  images.reserve(manifest.records.size());
  for (const auto& record : manifest.records) images.push_back(load_record(record));
  return images;
}

ValidationReport validate_dataset(const DatasetManifest& manifest) {
  ValidationReport report;

  std::map<std::string, std::vector<std::size_t>> per_scale_counts;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& record : manifest.records) {
    auto& counts = per_scale_counts[record.scale_tag];
    counts.resize(manifest.num_classes, 0);
    if (record.label < counts.size()) ++counts[record.label];
    if (!seen.emplace(record.scale_tag, record.image_id).second) {
      report.warnings.push_back("duplicate id '" + record.image_id + "' at scale '" +
                                record.scale_tag + "'");
    }
  }

  // Imbalance: smallest class below 80% of the largest within a scale.
  for (const auto& [scale, counts] : per_scale_counts) {
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*hi > 0 && 5 * *lo < 4 * *hi) {
      std::ostringstream msg;
      msg << "class imbalance at scale '" << scale << "': class "
          << (lo - counts.begin()) << " has " << *lo << " records, class "
          << (hi - counts.begin()) << " has " << *hi;
      report.warnings.push_back(msg.str());
    }
  }

  for (const auto& record : manifest.records) {
    for (std::size_t l = 0; l < record.layer_paths.size(); ++l) {
      try {
        const auto map = load_tensor(record.layer_paths[l]);
        const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
        if (lo != map.values.end() && *lo == *hi) {
          report.warnings.push_back("constant map in record '" + record.image_id +
                                    "' layer '" + manifest.layer_names[l] + "'");
        }
      } catch (const Error& e) {
        report.warnings.push_back("unreadable map in record '" + record.image_id +
                                  "': " + e.what());
      }
    }
  }
  return report;
}

}  // namespace adpm
