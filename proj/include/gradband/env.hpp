#pragma once

#include <array>
#include <span>
#include <vector>

#include "gradband/grid_map.hpp"

namespace gradband {

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kActionCount = 4;

constexpr Cell move(Cell c, Action a) {
  switch (a) {
    case Action::Up:
      return {c.x, c.y + 1};
    case Action::Down:
      return {c.x, c.y - 1};
    case Action::Left:
      return {c.x - 1, c.y};
    case Action::Right:
      return {c.x + 1, c.y};
  }
  return c;
}

struct RewardConfig {
  double goal = 1.0;
  double step = -0.002;
  double collision = -0.01;
};

// Local view of the map around the agent.
//   window: (2r+1)^2 entries, top row first; -1 obstacle or outside the map,
//           0 free, +1 goal.
//   goal_delta: (goal - position) / N.
struct Observation {
  int radius = 2;
  std::vector<int> window;
  std::array<double, 2> goal_delta{};
};

constexpr int observation_size(int radius) { return (2 * radius + 1) * (2 * radius + 1) + 2; }

Observation observe(const GridMap& map, Cell pos, int radius);
// Network input for `pos`, written into `out` (size observation_size(radius)).
void encode_observation(const GridMap& map, Cell pos, int radius, std::span<double> out);

struct StepOutcome {
  Cell pos;
  double reward = 0.0;
  bool reached = false;
  bool collided = false;
};

// Moves into obstacles or walls keep the position and cost a collision penalty
// on top of the step penalty. Entering the goal pays rewards.goal + rewards.step.
StepOutcome step(const GridMap& map, Cell pos, Action action, const RewardConfig& rewards);

}  // namespace gradband
