#pragma once

// Binary tensor container and dataset manifest.
//
// Tensor file layout (all little-endian):
//
//   offset  size  field
//   0       4     magic "ADPM"
//   4       4     format version (u32, currently 1)
//   8       8     height   (u64)
//   16      8     width    (u64)
//   24      8     channels (u64)
//   32      4*h*w*c  payload, f32, row-major grid with channel fastest
//
// The manifest is UTF-8 text. Lines starting with '#' are comments, blank
// lines are ignored. The first non-comment line is the header:
//
//   num_classes=<K>\t<layer name 1>\t...\t<layer name L>
//
// and every following line is one record:
//
//   <image_id>\t<label>\t<scale_tag>\t<path layer 1>\t...\t<path layer L>
//
// Relative tensor paths are resolved against the manifest's directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace adpm {

inline constexpr char kTensorMagic[4] = {'A', 'D', 'P', 'M'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 32;

/// Activations of one convolutional layer for one image: a height x width
/// grid of `channels`-dimensional descriptors.
struct FeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> values;

  static FeatureMap zeros(std::size_t height, std::size_t width, std::size_t channels);

  std::size_t cells() const noexcept { return height * width; }

  float& at(std::size_t i, std::size_t j, std::size_t k) {
    return values[(i * width + j) * channels + k];
  }
  float at(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(i * width + j) * channels + k];
  }

  /// Descriptor of grid cell (i, j); contiguous because channels vary fastest.
  std::span<const float> cell(std::size_t i, std::size_t j) const {
    return {values.data() + (i * width + j) * channels, channels};
  }
  std::span<const float> cell(std::size_t flat_index) const {
    return {values.data() + flat_index * channels, channels};
  }

  /// Throws ValidationError unless the shape is positive, the value count
  /// matches the shape and every value is finite.
  void validate() const;

  bool operator==(const FeatureMap&) const = default;
};

/// Writes the header and payload; returns the number of bytes written.
std::uint64_t write_tensor(const FeatureMap& map, std::ostream& out);
FeatureMap read_tensor(std::istream& in);

std::uint64_t save_tensor(const FeatureMap& map, const std::filesystem::path& path);
FeatureMap load_tensor(const std::filesystem::path& path);

struct ManifestRecord {
  std::string image_id;
  std::size_t label = 0;
  std::string scale_tag;
  std::vector<std::filesystem::path> layer_paths;  // resolved, one per layer
};

struct DatasetManifest {
  std::filesystem::path source;
  std::size_t num_classes = 0;
  std::vector<std::string> layer_names;
  std::vector<std::string> comments;  // '#' lines, without the marker
  std::vector<ManifestRecord> records;

  std::size_t num_layers() const noexcept { return layer_names.size(); }
};

/// One image at one scale with every layer's activations loaded.
struct ImageRecord {
  std::string image_id;
  std::size_t label = 0;
  std::string scale_tag;
  std::vector<FeatureMap> layer_maps;
};

/// Parses and fully validates a manifest: labels in range, layer counts,
/// every tensor readable, and per-layer shapes consistent within each
/// scale tag. Throws ValidationError naming the offending record.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes `manifest` to `path`. Tensor paths inside the manifest directory
/// are written relative to it.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

ImageRecord load_record(const ManifestRecord& record);
std::vector<ImageRecord> load_records(const DatasetManifest& manifest);

struct ValidationReport {
  std::vector<std::string> warnings;
  bool clean() const noexcept { return warnings.empty(); }
};

/// Reports class imbalance, constant-valued maps and duplicate image ids
/// within a scale. Never throws for data problems.
ValidationReport validate_dataset(const DatasetManifest& manifest);

}  // namespace adpm
