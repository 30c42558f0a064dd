#include <doctest.h>

#include <algorithm>
#include <deque>
#include <random>
#include <set>

#include "gradband/error.hpp"
#include "gradband/grid_map.hpp"

using namespace gradband;

namespace {

// Independent flood fill used as the connectivity oracle.
bool flood_reaches(const GridMap& m) {
  const int n = m.size();
  std::vector<char> seen(n * n, 0);
  std::deque<Cell> q{m.start()};
  seen[m.start().y * n + m.start().x] = 1;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    if (c == m.goal()) return true;
    for (const Cell d : {Cell{1, 0}, Cell{-1, 0}, Cell{0, 1}, Cell{0, -1}}) {
      const Cell nb{c.x + d.x, c.y + d.y};
      if (nb.x < 0 || nb.y < 0 || nb.x >= n || nb.y >= n) continue;
      if (m.is_obstacle(nb) || seen[nb.y * n + nb.x]) continue;
      seen[nb.y * n + nb.x] = 1;
      q.push_back(nb);
    }
  }
  return false;
}

void check_invariants(const GridMap& m) {
  CHECK(m.start() != m.goal());
  CHECK(m.is_free(m.start()));
  CHECK(m.is_free(m.goal()));
  for (const Cell c : m.obstacles()) CHECK(m.in_bounds(c));
}

}  // namespace

TEST_CASE("generate_random_map: empty, deterministic, always connected") {
  const GridMap empty = generate_random_map(5, 0.0, 123);
  CHECK(empty.obstacle_count() == 0);
  CHECK(is_connected(empty));

  CHECK(serialize(generate_random_map(10, 0.15, 7)) == serialize(generate_random_map(10, 0.15, 7)));

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const GridMap m = generate_random_map(10, 0.15, seed);
    REQUIRE(flood_reaches(m));
    check_invariants(m);
    CHECK(m.obstacle_count() == 15);  // round(0.15 * 98)
  }
}

TEST_CASE("generate_random_map rejects bad arguments and runs out of attempts") {
  CHECK_THROWS_AS(generate_random_map(4, 0.1, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_random_map(10, -0.1, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_random_map(10, 0.9, 1), GenerationFailure);
}

TEST_CASE("is_connected agrees with a flood fill") {
  CHECK(is_connected(GridMap(5, {}, {0, 0}, {4, 4})));
  std::vector<Cell> wall;
  for (int y = 0; y < 5; ++y) wall.push_back({2, y});
  CHECK_FALSE(is_connected(GridMap(5, wall, {0, 0}, {4, 4})));

  std::mt19937_64 rng(99);
  for (int seed = 0; seed < 500; ++seed) {
    // Dense obstacle fields without the generator's connectivity filter.
    std::vector<Cell> obs;
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x)
        if ((x || y) && (x != 9 || y != 9) && rng() % 100 < 35) obs.push_back({x, y});
    const GridMap m(10, obs, {0, 0}, {9, 9});
    CHECK(is_connected(m) == flood_reaches(m));
  }
}

TEST_CASE("bfs_distances matches Manhattan distance on an empty map") {
  const GridMap m(6, {}, {0, 0}, {5, 5});
  const auto d = bfs_distances(m, {2, 3});
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) CHECK(d[y * 6 + x] == std::abs(x - 2) + std::abs(y - 3));
}

TEST_CASE("obstacle_edge_points") {
  CHECK(obstacle_edge_points(GridMap(5, {}, {0, 0}, {4, 4})).points.empty());

  const std::vector<Cell> single{{2, 2}};
  CHECK(obstacle_edge_points(GridMap(5, single, {0, 0}, {4, 4})).points == single);

  std::vector<Cell> block;
  for (int y = 3; y <= 5; ++y)
    for (int x = 3; x <= 5; ++x) block.push_back({x, y});
  const auto edges = obstacle_edge_points(GridMap(9, block, {0, 0}, {8, 8})).points;
  CHECK(edges.size() == 8);
  CHECK(std::find(edges.begin(), edges.end(), Cell{4, 4}) == edges.end());

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GridMap m = generate_random_map(12, 0.3, seed);
    for (const Cell c : obstacle_edge_points(m).points) {
      CHECK(m.is_obstacle(c));
      int free_nb = 0;
      for (const Cell d : {Cell{1, 0}, Cell{-1, 0}, Cell{0, 1}, Cell{0, -1}})
        free_nb += m.is_free({c.x + d.x, c.y + d.y});
      CHECK(free_nb >= 1);
    }
  }
}

TEST_CASE("add_baffle is a set union") {
  const std::vector<Cell> obs{{1, 2}, {2, 2}};
  const GridMap m(6, obs, {0, 0}, {5, 5});
  CHECK(add_baffle(m, {}) == m);
  const std::vector<Cell> one{{3, 3}};
  CHECK(add_baffle(m, one).obstacle_count() == 3);
  const std::vector<Cell> five{{0, 2}, {1, 2}, {2, 2}, {3, 2}, {4, 2}};
  CHECK(add_baffle(m, five).obstacle_count() == 5);
  const std::vector<Cell> on_goal{{5, 5}};
  CHECK_THROWS_AS(add_baffle(m, on_goal), InvalidArgument);
  const std::vector<Cell> outside{{6, 0}};
  CHECK_THROWS_AS(add_baffle(m, outside), InvalidArgument);
}

TEST_CASE("serialize / parse") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const int n = 5 + static_cast<int>(seed % 26);
    const GridMap m = generate_random_map(n, 0.2, seed);
    CHECK(parse(serialize(m)) == m);
  }

  const std::string three = serialize(GridMap(3, {}, {0, 0}, {2, 2}));
  CHECK(three == "gridmap v1 3\n..G\n...\nS..\n");

  try {
    parse("gridmap v1 3\n..G\nS..\nS..\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(e.column() == 1);
  }
  CHECK_THROWS_AS(parse("gridmap v1 3\n..G\n...\n"), ParseError);
  CHECK_THROWS_AS(parse("gridmap v1 3\n..G\n.x.\nS..\n"), ParseError);
}

TEST_CASE("transpose swaps coordinates") {
  const GridMap m = generate_random_map(9, 0.2, 5);
  const GridMap t = transpose(m);
  CHECK(t.start() == Cell{m.start().y, m.start().x});
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) CHECK(m.is_obstacle({x, y}) == t.is_obstacle({y, x}));
  CHECK(transpose(t) == m);
}
