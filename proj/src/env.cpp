#include "gradband/env.hpp"

#include <cstdlib>

namespace gradband {

namespace {

int glyph(const GridMap& map, Cell c) {
  if (!map.is_free(c)) return -1;
  return c == map.goal() ? 1 : 0;
}

}  // namespace

Observation observe(const GridMap& map, Cell pos, int radius) {
  Observation obs;
  obs.radius = radius;
  obs.window.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
  for (int dy = radius; dy >= -radius; --dy)
    for (int dx = -radius; dx <= radius; ++dx) obs.window.push_back(glyph(map, {pos.x + dx, pos.y + dy}));
  const double inv_n = 1.0 / map.size();
  obs.goal_delta = {(map.goal().x - pos.x) * inv_n, (map.goal().y - pos.y) * inv_n};
  return obs;
}

void encode_observation(const GridMap& map, Cell pos, int radius, std::span<double> out) {
  std::size_t i = 0;
  for (int dy = radius; dy >= -radius; --dy)
    for (int dx = -radius; dx <= radius; ++dx) out[i++] = glyph(map, {pos.x + dx, pos.y + dy});
  const double inv_n = 1.0 / map.size();
  out[i++] = (map.goal().x - pos.x) * inv_n;
  out[i] = (map.goal().y - pos.y) * inv_n;
}

StepOutcome step(const GridMap& map, Cell pos, Action action, const RewardConfig& rewards) {
  const Cell next = move(pos, action);
  if (!map.is_free(next)) return {pos, rewards.step + rewards.collision, false, true};
  if (next == map.goal()) return {next, rewards.goal + rewards.step, true, false};
  return {next, rewards.step, false, false};
}

}  // namespace gradband
