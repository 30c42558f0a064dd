#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradband/a3c.hpp"
#include "gradband/cdg.hpp"
#include "gradband/grid_map.hpp"

namespace gradband {

// How T_total is measured: environment steps (machine independent) or rollout
// wall-clock seconds.
enum class TimeMode { Steps, WallSeconds };

const char* to_string(TimeMode mode);
TimeMode parse_time_mode(const std::string& text);

struct AttackParams {
  double omega1 = 0.3;
  double omega2 = 0.7;
  double epsilon = 1.0;  // steps or seconds, per time_mode
  TimeMode time_mode = TimeMode::Steps;
};

// Throws InvalidArgument unless omega1 + omega2 = 1, omega2 > omega1 and
// epsilon > 0.
void validate_params(const AttackParams& params);

double euclidean_distance(Cell a, Cell b);
double relu_excess_time(double t_total, double epsilon);
double outcome_time(const EpisodeResult& outcome, TimeMode mode);

// omega1 * max(0, T - epsilon) + omega2 * |end - goal|.
double f_attack(const EpisodeResult& outcome, Cell goal, const AttackParams& params);

struct FailureTags {
  bool near_start = false;
  bool near_goal = false;
  bool dense_band_region = false;

  bool empty() const { return !near_start && !near_goal && !dense_band_region; }
  std::vector<std::string> names() const;
  friend bool operator==(const FailureTags&, const FailureTags&) = default;
};

struct ScoredExample {
  DominantExample example;
  EpisodeResult outcome;  // representative trial
  double f_attack = 0.0;
  FailureTags tags;
};

struct ValidationConfig {
  int trials = 5;
  int step_cap = 0;  // 0: 10 * N
  RolloutMode mode = RolloutMode::Greedy;
  std::uint64_t seed = 0;
  int jobs = 1;
  int near_radius = 2;         // Chebyshev radius for near-start / near-goal
  double dense_factor = 2.0;   // band density over map density
};

int effective_step_cap(const ValidationConfig& cfg, int map_size);

// epsilon = factor * median time of `trials` clean-map rollouts.
double calibrate_epsilon(const Agent& agent, const GridMap& map, const ValidationConfig& cfg, TimeMode mode,
                         double factor = 3.0);

// Aggregates `trials` rollouts on `map`: majority verdict on reaching the goal,
// then the median-time trial among those that agree with it.
EpisodeResult aggregate_rollouts(const Agent& agent, const GridMap& map, const ValidationConfig& cfg, TimeMode mode);

FailureTags failure_tags(const GridMap& base, const DominantExample& example, const GradientBand* band, int near_radius,
                         double dense_factor);

struct SampleSpaceReport {
  std::string map_id;
  AttackParams params;
  int step_cap = 0;
  int trials = 0;
  std::size_t total = 0;                // |S|
  std::vector<ScoredExample> scored;    // every candidate, in input order
  std::vector<ScoredExample> valid;     // f_attack > 0
  std::optional<double> generation_precision;  // absent when total == 0
};

SampleSpaceReport validate_examples(const Agent& agent, const GridMap& base, std::span<const DominantExample> examples,
                                    const AttackParams& params, const ValidationConfig& cfg,
                                    const GradientBand* band = nullptr);

// Recomputes every f_attack from the stored outcomes and rebuilds the valid set.
SampleSpaceReport rescore(const SampleSpaceReport& report, Cell goal);

// Throw UndefinedPrecision when the denominator is zero.
double generation_precision(std::size_t n_success, std::size_t m_total);
double immune_precision(std::size_t i_success, std::size_t n_success);

// Table-style CSV: example id, time, arrived point, F_attack, tags.
std::string report_csv(const SampleSpaceReport& report);

}  // namespace gradband
