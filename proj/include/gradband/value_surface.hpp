#pragma once

#include <cstdint>
#include <vector>

#include "gradband/grid_map.hpp"

namespace gradband {

// Per-cell state value on an N x N map, row-major (index y * N + x).
// Only free cells carry meaningful values; obstacle cells hold a filler.
struct ValueSurface {
  int size = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> free_mask;
  double value_max = 0.0;

  double at(Cell c) const { return values[static_cast<std::size_t>(c.y) * size + c.x]; }
  bool is_free(Cell c) const { return free_mask[static_cast<std::size_t>(c.y) * size + c.x] != 0; }
};

}  // namespace gradband
