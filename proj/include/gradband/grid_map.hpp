#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gradband {

// Integer cell coordinate. Origin bottom-left, x rightward, y upward.
struct Cell {
  int x = 0;
  int y = 0;

  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

// Row-major order used everywhere a deterministic cell ordering is needed.
constexpr bool row_major_less(Cell a, Cell b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

// N x N occupancy grid with start and goal. Immutable once built.
//
// The constructor enforces the structural invariants (cells in the box,
// start != goal, endpoints not obstructed). Connectivity is a property of the
// map, queried with is_connected(); generate_random_map() guarantees it.
class GridMap {
 public:
  GridMap(int size, std::span<const Cell> obstacles, Cell start, Cell goal);

  int size() const noexcept { return size_; }
  Cell start() const noexcept { return start_; }
  Cell goal() const noexcept { return goal_; }

  bool in_bounds(Cell c) const noexcept {
    return c.x >= 0 && c.y >= 0 && c.x < size_ && c.y < size_;
  }
  bool is_obstacle(Cell c) const noexcept { return occupancy_[index(c)] != 0; }
  // In bounds and not an obstacle. Start and goal are free.
  bool is_free(Cell c) const noexcept { return in_bounds(c) && !is_obstacle(c); }

  // Obstacles in row-major order.
  std::vector<Cell> obstacles() const;
  std::size_t obstacle_count() const noexcept { return obstacle_count_; }
  std::size_t free_count() const noexcept {
    return static_cast<std::size_t>(size_) * size_ - obstacle_count_;
  }

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  std::size_t index(Cell c) const noexcept {
    return static_cast<std::size_t>(c.y) * size_ + c.x;
  }

  int size_;
  Cell start_;
  Cell goal_;
  std::vector<std::uint8_t> occupancy_;
  std::size_t obstacle_count_ = 0;
};

struct EdgePointSet {
  std::vector<Cell> points;
};

// Same map with x and y exchanged (start, goal and obstacles transposed).
GridMap transpose(const GridMap& map);

// Start in the lower-left corner region, goal in the upper-right one; obstacles
// are round(density * (n^2 - 2)) distinct cells. Resamples until connected,
// throwing GenerationFailure after 1000 attempts.
GridMap generate_random_map(int n, double obstacle_density, std::uint64_t seed);

// 4-connected free-cell path from start to goal.
bool is_connected(const GridMap& map);

// Shortest 4-connected path lengths from `from` to every cell; -1 where unreachable.
std::vector<int> bfs_distances(const GridMap& map, Cell from);

// Obstacle cells with at least one free 4-neighbour, row-major.
EdgePointSet obstacle_edge_points(const GridMap& map);

// Union of the map's obstacles with `cells`. Throws InvalidArgument if a cell is
// the start, the goal, or out of bounds.
GridMap add_baffle(const GridMap& map, std::span<const Cell> cells);

// Text format: "gridmap v1 <N>" followed by N rows, top row (y = N-1) first;
// glyphs '.', '#', 'S', 'G'. Every line ends with '\n'.
std::string serialize(const GridMap& map);
GridMap parse(std::string_view text);

// Stable 64-bit FNV-1a fingerprint of the serialized map, as 16 hex digits.
std::string fingerprint(const GridMap& map);

GridMap read_map_file(const std::string& path);
void write_map_file(const GridMap& map, const std::string& path);

}  // namespace gradband
