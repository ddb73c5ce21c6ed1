#include "adpm/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "adpm/error.hpp"

namespace adpm {
namespace {

template <typename T>
double squared_distance(std::span<const T> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double d = static_cast<double>(a[k]) - b[k];
    sum += d * d;
  }
  return sum;
}

template <typename T>
std::size_t nearest(std::span<const T> x, const Matrix& centers, double* best_out = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < centers.rows(); ++d) {
    const double dist = squared_distance(x, centers.row(d));
    if (dist < best_d) {
      best_d = dist;
      best = d;
    }
  }
  if (best_out) *best_out = best_d;
  return best;
}

void l2_normalize_row(std::span<double> row) {
  double norm = 0.0;
  for (double v : row) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : row) v /= norm;
  }
}

std::size_t count_distinct_rows(const Matrix& m, std::size_t stop_at) {
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = m.row(a), rb = m.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::size_t distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size() && distinct < stop_at; ++i) {
    const auto ra = m.row(order[i - 1]), rb = m.row(order[i]);
    if (!std::equal(ra.begin(), ra.end(), rb.begin())) ++distinct;
  }
  return distinct;
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Matrix seed_plus_plus(const Matrix& x, std::size_t words, std::mt19937_64& rng) {
  const std::size_t n = x.rows();
  Matrix centers(words, x.cols());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  std::copy_n(x.row(first).begin(), x.cols(), centers.row(0).begin());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centers.row(0));

  for (std::size_t c = 1; c < words; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = n;
    if (total > 0.0) {
      const double target = unit_uniform(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          chosen = i;
          break;
        }
      }
      if (chosen == n) {
        // Rounding left target at the very end; take the last positive row.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            chosen = i;
            break;
          }
        }
      }
    }
    if (chosen == n) throw DegenerateClusteringError("k-means++ ran out of distinct points");
    std::copy_n(x.row(chosen).begin(), x.cols(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), centers.row(c)));
    }
  }
  return centers;
}

std::string sidecar_path(const std::filesystem::path& stem) { return stem.string() + ".txt"; }
std::string tensor_path(const std::filesystem::path& stem) { return stem.string() + ".adpm"; }

}  // namespace

std::uint64_t LayerHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

Matrix collect_descriptors(std::span<const FeatureMap* const> maps, std::size_t cap,
                           std::size_t min_rows, std::uint64_t seed, bool l2_normalize) {
  if (maps.empty()) throw InsufficientDataError("no feature maps to collect descriptors from");
  if (cap < min_rows) {
    throw ValidationError("descriptor cap " + std::to_string(cap) +
                          " is below the word count " + std::to_string(min_rows));
  }
  const std::size_t dim = maps.front()->channels;
  std::size_t total = 0;
  for (const auto* map : maps) {
    if (map->channels != dim) {
      throw ValidationError("feature maps of one layer disagree on channel count");
    }
    total += map->cells();
  }
  if (total < min_rows) {
    throw InsufficientDataError("only " + std::to_string(total) +
                                " descriptors available, need at least " +
                                std::to_string(min_rows));
  }

  std::vector<std::size_t> keep;
  if (total <= cap) {
    keep.resize(total);
    std::iota(keep.begin(), keep.end(), 0);
  } else {
    // Partial Fisher-Yates over row indices.
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    keep.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cap));
    std::sort(keep.begin(), keep.end());
  }

  Matrix out(keep.size(), dim);
  std::size_t map_index = 0;
  std::size_t map_start = 0;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    while (keep[r] >= map_start + maps[map_index]->cells()) {
      map_start += maps[map_index]->cells();
      ++map_index;
    }
    const auto cell = maps[map_index]->cell(keep[r] - map_start);
    std::copy(cell.begin(), cell.end(), out.row(r).begin());
    if (l2_normalize) l2_normalize_row(out.row(r));
  }
  return out;
}

Matrix collect_descriptors(std::span<const ImageRecord> records, std::size_t layer,
                           std::size_t cap, std::size_t min_rows, std::uint64_t seed,
                           bool l2_normalize) {
  std::vector<const FeatureMap*> maps;
  maps.reserve(records.size());
  for (const auto& record : records) {
    if (layer >= record.layer_maps.size()) {
      throw ValidationError("record '" + record.image_id + "' has no layer " +
                            std::to_string(layer));
    }
    maps.push_back(&record.layer_maps[layer]);
  }
  return collect_descriptors(maps, cap, min_rows, seed, l2_normalize);
}

KMeansResult kmeans(const Matrix& x, std::size_t words, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (words < 2) throw ValidationError("codebook needs at least 2 words");
  if (x.rows() < words) {
    throw InsufficientDataError("k-means needs at least " + std::to_string(words) +
                                " rows, got " + std::to_string(x.rows()));
  }
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw ValidationError("descriptor matrix has a non-finite value");
  }
  const std::size_t distinct = count_distinct_rows(x, words);
  if (distinct == 1) throw DegenerateClusteringError("all descriptors are identical");
  if (distinct < words) {
    throw DegenerateClusteringError("only " + std::to_string(distinct) +
                                    " distinct descriptors for " + std::to_string(words) +
                                    " words");
  }

  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  std::mt19937_64 rng(seed);
  KMeansResult result;
  Matrix centers = seed_plus_plus(x, words, rng);

  std::vector<std::size_t> assignment(n);
  std::vector<double> dist(n);
  std::vector<std::size_t> sizes(words);
  Matrix sums(words, p);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assignment[i] = nearest(x.row(i), centers, &dist[i]);
      wcss += dist[i];
    }
    result.wcss.push_back(wcss);
    result.iterations = iter + 1;

    std::fill(sizes.begin(), sizes.end(), 0);
    std::fill(sums.values().begin(), sums.values().end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[assignment[i]];
      auto s = sums.row(assignment[i]);
      const auto r = x.row(i);
      for (std::size_t k = 0; k < p; ++k) s[k] += r[k];
    }

    double max_shift = 0.0;
    std::vector<bool> taken(n, false);
    for (std::size_t d = 0; d < words; ++d) {
      std::vector<double> updated(p);
      if (sizes[d] > 0) {
        for (std::size_t k = 0; k < p; ++k) {
          updated[k] = sums(d, k) / static_cast<double>(sizes[d]);
        }
      } else {
        // Empty cluster: move it onto the point worst served by its center.
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (!taken[i] && (far == n || dist[i] > dist[far])) far = i;
        }
        taken[far] = true;
        dist[far] = 0.0;
        std::copy_n(x.row(far).begin(), p, updated.begin());
      }
      max_shift = std::max(max_shift, std::sqrt(squared_distance(
                                          std::span<const double>(updated), centers.row(d))));
      std::copy(updated.begin(), updated.end(), centers.row(d).begin());
    }
    if (max_shift < options.shift_tolerance) {
      result.converged = true;
      break;
    }
  }

  for (double& v : centers.values()) v = static_cast<double>(static_cast<float>(v));
  for (std::size_t a = 0; a < words; ++a) {
    for (std::size_t b = a + 1; b < words; ++b) {
      const auto ra = centers.row(a), rb = centers.row(b);
      if (std::equal(ra.begin(), ra.end(), rb.begin())) {
        throw DegenerateClusteringError("k-means produced duplicate centers " +
                                        std::to_string(a) + " and " + std::to_string(b));
      }
    }
  }

  result.book.centers = std::move(centers);
  result.book.seed = seed;
  result.book.l2_normalize = options.l2_normalize;
  return result;
}

Codebook train_codebook(const Matrix& descriptors, std::size_t words, std::uint64_t seed,
                        const KMeansOptions& options) {
  return kmeans(descriptors, words, seed, options).book;
}

std::size_t assign_word(std::span<const double> descriptor, const Codebook& book) {
  if (descriptor.size() != book.dim()) {
    throw ValidationError("descriptor dimension " + std::to_string(descriptor.size()) +
                          " does not match codebook dimension " + std::to_string(book.dim()));
  }
  if (book.l2_normalize) {
    std::vector<double> unit(descriptor.begin(), descriptor.end());
    l2_normalize_row(unit);
    return nearest(std::span<const double>(unit), book.centers);
  }
  return nearest(descriptor, book.centers);
}

std::size_t assign_word(std::span<const float> descriptor, const Codebook& book) {
  if (descriptor.size() != book.dim()) {
    throw ValidationError("descriptor dimension " + std::to_string(descriptor.size()) +
                          " does not match codebook dimension " + std::to_string(book.dim()));
  }
  if (book.l2_normalize) {
    std::vector<double> unit(descriptor.begin(), descriptor.end());
    l2_normalize_row(unit);
    return nearest(std::span<const double>(unit), book.centers);
  }
  return nearest(descriptor, book.centers);
}

LayerHistogram encode_histogram(const FeatureMap& map, const Codebook& book) {
  if (map.channels != book.dim()) {
    throw ValidationError("feature map has " + std::to_string(map.channels) +
                          " channels, codebook expects " + std::to_string(book.dim()));
  }
  LayerHistogram hist;
  hist.counts.assign(book.words(), 0);
  for (std::size_t cell = 0; cell < map.cells(); ++cell) {
    ++hist.counts[assign_word(map.cell(cell), book)];
  }
  return hist;
}

void save_codebook(const Codebook& book, const std::filesystem::path& stem) {
  FeatureMap grid = FeatureMap::zeros(book.words(), book.dim(), 1);
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    grid.values[i] = static_cast<float>(book.centers.values()[i]);
  }
  save_tensor(grid, tensor_path(stem));
  std::ofstream side(sidecar_path(stem), std::ios::trunc);
  side << "layer_index=" << book.layer_index << '\n'
       << "words=" << book.words() << '\n'
       << "seed=" << book.seed << '\n'
       << "l2_normalize=" << (book.l2_normalize ? 1 : 0) << '\n';
  if (!side) throw IoError("cannot write codebook sidecar '" + sidecar_path(stem) + "'", 0);
}

Codebook load_codebook(const std::filesystem::path& stem) {
  const auto grid = load_tensor(tensor_path(stem));
  if (grid.channels != 1) throw FormatError("codebook tensor must have one channel");
  Codebook book;
  book.centers = Matrix(grid.height, grid.width);
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    book.centers.values()[i] = grid.values[i];
  }

  std::ifstream side(sidecar_path(stem));
  if (!side) throw ValidationError("missing codebook sidecar '" + sidecar_path(stem) + "'");
  std::string line;
  std::size_t words = 0;
  while (std::getline(side, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "layer_index") book.layer_index = std::stoull(value);
    else if (key == "words") words = std::stoull(value);
    else if (key == "seed") book.seed = std::stoull(value);
    else if (key == "l2_normalize") book.l2_normalize = value == "1";
  }
  if (words != book.words()) {
    throw FormatError("codebook sidecar word count disagrees with tensor rows");
  }
  return book;
}

}  // namespace adpm
