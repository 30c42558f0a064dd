#pragma once

#include <cstdint>
#include <cstdlib>

#include "gradband/a3c.hpp"
#include "gradband/grid_map.hpp"

namespace gradband::testing {

// Reference training setup shared by the tests that need a trained agent.
inline TrainConfig reference_train(int n, std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.gamma = 0.95;
  cfg.lr = 1e-3;
  cfg.total_env_steps = 1000ull * n * n;
  cfg.seed = seed;
  return cfg;
}

inline bool adjacent(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1; }

}  // namespace gradband::testing

#include <algorithm>
#include <limits>

#include "gradband/value_surface.hpp"

namespace gradband::testing {

// What a perfect critic would learn: minus the shortest-path distance to the
// goal. Obstacles and unreachable cells carry the free-cell minimum.
inline ValueSurface oracle_surface(const GridMap& map) {
  const int n = map.size();
  const auto dist = bfs_distances(map, map.goal());
  ValueSurface s;
  s.size = n;
  s.values.assign(static_cast<std::size_t>(n) * n, 0.0);
  s.free_mask.assign(static_cast<std::size_t>(n) * n, 0);
  double lo = std::numeric_limits<double>::infinity();
  s.value_max = -std::numeric_limits<double>::infinity();
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      if (map.is_obstacle({x, y})) continue;
      s.free_mask[i] = 1;
      s.values[i] = dist[i] >= 0 ? -static_cast<double>(dist[i]) : -4.0 * n * n;
      lo = std::min(lo, s.values[i]);
      s.value_max = std::max(s.value_max, s.values[i]);
    }
  for (std::size_t i = 0; i < s.values.size(); ++i)
    if (!s.free_mask[i]) s.values[i] = lo;
  return s;
}

}  // namespace gradband::testing
