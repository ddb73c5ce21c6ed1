#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "adpm/tensor_store.hpp"

namespace adpm {

/// Window layout for one pyramid level over a side of length `side`:
/// window ceil(side/n), stride floor(side/n), n windows per axis.
struct SppGrid {
  std::size_t side = 0;
  std::size_t n = 0;
  std::size_t window = 0;
  std::size_t stride = 0;

  /// Half-open index range [begin, end) of window k along one axis. The
  /// last window is stretched to end at `side` so every index is covered.
  std::pair<std::size_t, std::size_t> bounds(std::size_t k) const;
};

struct SppConfig {
  std::vector<std::size_t> levels{1, 2, 4};

  void validate() const;
  std::size_t cells_per_channel() const;  // sum of n^2
};

SppGrid plan_grid(std::size_t side, std::size_t n);

/// Max-pools each of the n x n windows. Output is region-major (row of
/// regions, then column), channel fastest; length n*n*channels.
std::vector<double> pool_level(const FeatureMap& map, const SppGrid& grid);

/// Concatenation of pool_level over cfg.levels; length channels * sum n^2.
std::vector<double> spp_descriptor(const FeatureMap& map, const SppConfig& cfg = {});

}  // namespace adpm
