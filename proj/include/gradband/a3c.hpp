#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradband/env.hpp"
#include "gradband/error.hpp"
#include "gradband/grid_map.hpp"
#include "gradband/network.hpp"
#include "gradband/value_surface.hpp"

namespace gradband {

struct TrainConfig {
  int workers = 1;
  // Training stops at the first n-step segment boundary at or past this count.
  std::uint64_t total_env_steps = 200'000;
  int n_step = 8;
  double gamma = 0.99;
  double lr = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  // Episode step cap (T_max). 0 selects 10 * N; explicit values must be >= 4N.
  int step_cap = 0;
  RewardConfig reward;
  // Probability that a training episode starts from a uniformly random free
  // cell instead of the map's start.
  double random_start_prob = 0.5;
  double max_grad_norm = 5.0;
  int hidden = 64;
  int window_radius = 2;
  std::uint64_t seed = 1;
};

int effective_step_cap(const TrainConfig& cfg, int map_size);
// Throws InvalidArgument when a field is out of range for this map size.
void validate_config(const TrainConfig& cfg, int map_size);

struct Agent {
  Arch arch;
  int window_radius = 2;
  std::vector<double> params;
  std::string trained_on;
  std::uint64_t train_steps = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const Agent&, const Agent&) = default;
};

// Fresh, untrained agent with the architecture `cfg` describes.
Agent make_agent(const TrainConfig& cfg, std::uint64_t seed);

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::uint64_t step, const std::string& what)
      : Error("training diverged at env step " + std::to_string(step) + ": " + what), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

struct TrainStats {
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  std::uint64_t goals_reached = 0;
  std::uint64_t gradients_produced = 0;
  std::uint64_t updates_applied = 0;
  double wall_seconds = 0.0;
};

// A3C on a single map from a fresh initialisation.
Agent train(const GridMap& map, const TrainConfig& cfg, TrainStats* stats = nullptr);

// A3C over a set of maps; each episode runs on the next map in round-robin
// order (per worker). Starts from `init`'s parameters when given; the optimiser
// state always starts fresh. With cfg.total_env_steps == 0 the result equals
// *init (or a fresh agent).
Agent train_on_maps(std::span<const GridMap> maps, const TrainConfig& cfg, const Agent* init,
                    TrainStats* stats = nullptr);

enum class RolloutMode { Greedy, Stochastic };

struct EpisodeResult {
  bool reached = false;
  int steps = 0;
  double wall_seconds = 0.0;
  Cell end_position;
  // steps + 1 cells; a collision repeats the previous cell.
  std::vector<Cell> path;
};

EpisodeResult rollout(const Agent& agent, const GridMap& map, int step_cap, RolloutMode mode,
                      std::uint64_t seed = 0);

// Fraction of `rollouts` episodes that reach the goal.
double success_rate(const Agent& agent, const GridMap& map, int rollouts, int step_cap, RolloutMode mode,
                    std::uint64_t seed = 0);

// Critic value at every free cell; obstacle cells carry the free-cell minimum.
ValueSurface extract_value_surface(const Agent& agent, const GridMap& map);

// Binary checkpoint; layout documented in docs/agent_format.md.
std::string encode_agent(const Agent& agent);
Agent decode_agent(std::string_view bytes);
void save_agent(const Agent& agent, const std::string& path);
Agent load_agent(const std::string& path);

}  // namespace gradband
