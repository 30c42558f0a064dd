#include "gradband/grid_map.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "gradband/error.hpp"

namespace gradband {

namespace {

constexpr std::array<Cell, 4> kNeighbourOffsets{{{0, 1}, {0, -1}, {-1, 0}, {1, 0}}};
constexpr int kMaxGenerationAttempts = 1000;

std::string cell_str(Cell c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
}

}  // namespace

GridMap::GridMap(int size, std::span<const Cell> obstacles, Cell start, Cell goal)
    : size_(size), start_(start), goal_(goal) {
  if (size < 1) throw InvalidArgument("map size must be positive");
  if (!in_bounds(start) || !in_bounds(goal)) throw InvalidArgument("start or goal outside the map");
  if (start == goal) throw InvalidArgument("start and goal coincide at " + cell_str(start));
  occupancy_.assign(static_cast<std::size_t>(size) * size, 0);
  for (Cell c : obstacles) {
    if (!in_bounds(c)) throw InvalidArgument("obstacle " + cell_str(c) + " outside the map");
    if (c == start || c == goal) throw InvalidArgument("obstacle on start or goal " + cell_str(c));
    auto& slot = occupancy_[index(c)];
    if (slot == 0) {
      slot = 1;
      ++obstacle_count_;
    }
  }
}

std::vector<Cell> GridMap::obstacles() const {
  std::vector<Cell> out;
  out.reserve(obstacle_count_);
  for (int y = 0; y < size_; ++y)
    for (int x = 0; x < size_; ++x)
      if (is_obstacle({x, y})) out.push_back({x, y});
  return out;
}

GridMap transpose(const GridMap& map) {
  auto obstacles = map.obstacles();
  for (auto& c : obstacles) std::swap(c.x, c.y);
  return GridMap(map.size(), obstacles, {map.start().y, map.start().x}, {map.goal().y, map.goal().x});
}

std::vector<int> bfs_distances(const GridMap& map, Cell from) {
  const int n = map.size();
  std::vector<int> dist(static_cast<std::size_t>(n) * n, -1);
  if (!map.is_free(from)) return dist;
  std::deque<Cell> queue{from};
  dist[static_cast<std::size_t>(from.y) * n + from.x] = 0;
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(c.y) * n + c.x];
    for (Cell o : kNeighbourOffsets) {
      Cell nb{c.x + o.x, c.y + o.y};
      if (!map.is_free(nb)) continue;
      auto& slot = dist[static_cast<std::size_t>(nb.y) * n + nb.x];
      if (slot >= 0) continue;
      slot = d + 1;
      queue.push_back(nb);
    }
  }
  return dist;
}

bool is_connected(const GridMap& map) {
  const auto dist = bfs_distances(map, map.start());
  return dist[static_cast<std::size_t>(map.goal().y) * map.size() + map.goal().x] >= 0;
}

GridMap generate_random_map(int n, double obstacle_density, std::uint64_t seed) {
  if (n < 5) throw InvalidArgument("map size must be at least 5");
  if (!(obstacle_density >= 0.0 && obstacle_density < 1.0))
    throw InvalidArgument("obstacle density must lie in [0, 1)");

  std::mt19937_64 rng(seed);
  // Corner regions: the lower-left and upper-right quarter-width squares.
  const int corner = std::max(1, (n + 3) / 4);
  // Plain modulo draws keep the sequence identical across standard libraries.
  const auto near = [&] { return static_cast<int>(rng() % static_cast<std::uint64_t>(corner)); };
  const auto far = [&] { return n - corner + near(); };
  const auto cells = static_cast<std::size_t>(n) * n;
  const auto target = static_cast<std::size_t>(std::llround(obstacle_density * static_cast<double>(cells - 2)));

  std::vector<Cell> pool;
  pool.reserve(cells);
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    const int sx = near(), sy = near();
    const int gx = far(), gy = far();
    const Cell start{sx, sy};
    const Cell goal{gx, gy};
    pool.clear();
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (Cell c{x, y}; c != start && c != goal) pool.push_back(c);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < target; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    GridMap map(n, std::span<const Cell>(pool.data(), target), start, goal);
    if (is_connected(map)) return map;
  }
  throw GenerationFailure("no connected " + std::to_string(n) + "x" + std::to_string(n) +
                          " map at density " + std::to_string(obstacle_density) + " after " +
                          std::to_string(kMaxGenerationAttempts) + " attempts");
}

EdgePointSet obstacle_edge_points(const GridMap& map) {
  EdgePointSet out;
  const int n = map.size();
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!map.is_obstacle({x, y})) continue;
      const bool edge = std::any_of(kNeighbourOffsets.begin(), kNeighbourOffsets.end(),
                                    [&](Cell o) { return map.is_free({x + o.x, y + o.y}); });
      if (edge) out.points.push_back({x, y});
    }
  }
  return out;
}

GridMap add_baffle(const GridMap& map, std::span<const Cell> cells) {
  for (Cell c : cells) {
    if (c == map.start() || c == map.goal())
      throw InvalidArgument("baffle cell " + cell_str(c) + " lies on the start or goal");
    if (!map.in_bounds(c)) throw InvalidArgument("baffle cell " + cell_str(c) + " outside the map");
  }
  auto obstacles = map.obstacles();
  obstacles.insert(obstacles.end(), cells.begin(), cells.end());
  return GridMap(map.size(), obstacles, map.start(), map.goal());
}

std::string serialize(const GridMap& map) {
  const int n = map.size();
  std::string out = "gridmap v1 " + std::to_string(n) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(n) * (n + 1));
  for (int y = n - 1; y >= 0; --y) {
    for (int x = 0; x < n; ++x) {
      const Cell c{x, y};
      out += c == map.start() ? 'S' : c == map.goal() ? 'G' : map.is_obstacle(c) ? '#' : '.';
    }
    out += '\n';
  }
  return out;
}

GridMap parse(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto eol = text.find('\n', pos);
    const auto end = eol == std::string_view::npos ? text.size() : eol;
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  if (lines.empty()) throw ParseError(1, 1, "empty input");

  constexpr std::string_view kMagic = "gridmap v1 ";
  const auto header = lines[0];
  if (header.substr(0, kMagic.size()) != kMagic) throw ParseError(1, 1, "expected 'gridmap v1 <N>' header");
  int n = 0;
  const auto digits = header.substr(kMagic.size());
  if (digits.empty() || digits.size() > 6 ||
      !std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
    throw ParseError(1, static_cast<int>(kMagic.size()) + 1, "malformed size");
  for (char ch : digits) n = n * 10 + (ch - '0');
  if (n < 1) throw ParseError(1, static_cast<int>(kMagic.size()) + 1, "size must be positive");
  if (lines.size() < static_cast<std::size_t>(n) + 1)
    throw ParseError(static_cast<int>(lines.size()) + 1, 1, "expected " + std::to_string(n) + " grid rows");
  for (std::size_t i = static_cast<std::size_t>(n) + 1; i < lines.size(); ++i)
    if (!lines[i].empty()) throw ParseError(static_cast<int>(i) + 1, 1, "unexpected trailing content");

  std::vector<Cell> obstacles;
  Cell start{}, goal{};
  bool have_start = false, have_goal = false;
  for (int row = 0; row < n; ++row) {
    const int line_no = row + 2;
    const auto line = lines[static_cast<std::size_t>(row) + 1];
    if (static_cast<int>(line.size()) != n)
      throw ParseError(line_no, std::min<int>(static_cast<int>(line.size()), n) + 1,
                       "row has " + std::to_string(line.size()) + " glyphs, expected " + std::to_string(n));
    const int y = n - 1 - row;
    for (int x = 0; x < n; ++x) {
      const char g = line[static_cast<std::size_t>(x)];
      switch (g) {
        case '.':
          break;
        case '#':
          obstacles.push_back({x, y});
          break;
        case 'S':
          if (have_start) throw ParseError(line_no, x + 1, "duplicate 'S'");
          start = {x, y};
          have_start = true;
          break;
        case 'G':
          if (have_goal) throw ParseError(line_no, x + 1, "duplicate 'G'");
          goal = {x, y};
          have_goal = true;
          break;
        default:
          throw ParseError(line_no, x + 1, std::string("unknown glyph '") + g + "'");
      }
    }
  }
  if (!have_start) throw ParseError(n + 1, 1, "missing 'S'");
  if (!have_goal) throw ParseError(n + 1, 1, "missing 'G'");
  return GridMap(n, obstacles, start, goal);
}

std::string fingerprint(const GridMap& map) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : serialize(map)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GridMap read_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open map file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void write_map_file(const GridMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write map file " + path);
  out << serialize(map);
  if (!out) throw Error("write failed for " + path);
}

}  // namespace gradband
