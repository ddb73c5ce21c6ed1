#include "adpm/spp_pool.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "adpm/error.hpp"

namespace adpm {

std::pair<std::size_t, std::size_t> SppGrid::bounds(std::size_t k) const {
  const std::size_t begin = k * stride;
  const std::size_t end = (k + 1 == n) ? side : std::min(begin + window, side);
  return {begin, end};
}

void SppConfig::validate() const {
  if (levels.empty()) throw ValidationError("spp config has no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == 0) throw ValidationError("spp level must be >= 1");
    if (i > 0 && levels[i] <= levels[i - 1]) {
      throw ValidationError("spp levels must be strictly increasing");
    }
  }
}

std::size_t SppConfig::cells_per_channel() const {
  std::size_t total = 0;
  for (auto n : levels) total += n * n;
  return total;
}

SppGrid plan_grid(std::size_t side, std::size_t n) {
  if (n == 0) throw ValidationError("spp grid size must be >= 1");
  if (side < n) {
    throw UnsupportedSizeError("feature map side " + std::to_string(side) +
                               " is smaller than grid size " + std::to_string(n));
  }
  return SppGrid{side, n, (side + n - 1) / n, side / n};
}

std::vector<double> pool_level(const FeatureMap& map, const SppGrid& grid) {
  if (map.height != grid.side || map.width != grid.side) {
    throw ValidationError("feature map " + std::to_string(map.height) + "x" +
                          std::to_string(map.width) + " does not match grid side " +
                          std::to_string(grid.side));
  }
  if (map.values.size() != map.height * map.width * map.channels) {
    throw ValidationError("feature map value count does not match its shape");
  }
  const std::size_t c = map.channels;
  std::vector<double> out(grid.n * grid.n * c, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < grid.n; ++r) {
    const auto [r0, r1] = grid.bounds(r);
    for (std::size_t s = 0; s < grid.n; ++s) {
      const auto [s0, s1] = grid.bounds(s);
      double* region = out.data() + (r * grid.n + s) * c;
      for (std::size_t i = r0; i < r1; ++i) {
        for (std::size_t j = s0; j < s1; ++j) {
          const auto cell = map.cell(i, j);
          for (std::size_t k = 0; k < c; ++k) {
            region[k] = std::max(region[k], static_cast<double>(cell[k]));
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> spp_descriptor(const FeatureMap& map, const SppConfig& cfg) {
  cfg.validate();
  if (map.height != map.width) {
    throw ValidationError("spp pooling requires a square feature map");
  }
  std::vector<double> out;
  out.reserve(cfg.cells_per_channel() * map.channels);
  for (auto n : cfg.levels) {
    const auto level = pool_level(map, plan_grid(map.height, n));
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

}  // namespace adpm
