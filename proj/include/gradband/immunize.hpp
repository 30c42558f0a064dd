#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradband/a3c.hpp"
#include "gradband/cdg.hpp"
#include "gradband/validation.hpp"

namespace gradband {

struct RetrainConfig {
  // Hyperparameters of the original training run; only total_env_steps and
  // seed are replaced.
  TrainConfig train;
  // Fraction of the original agent's train_steps spent per example (<= 0.2).
  double budget_fraction = 0.2;
  bool from_scratch = false;
  // Alternate episodes between the perturbed map and the clean map.
  bool mix_clean = false;
  int verify_rollouts = 100;
  int verify_min_success = 80;
  std::uint64_t seed = 1;
};

std::uint64_t retrain_budget(const Agent& original, const RetrainConfig& cfg);

// The retrained agent did not pass verification. It is still available, so a
// caller can decide to evaluate it anyway.
class RetrainFailed : public Error {
 public:
  RetrainFailed(Agent agent, int successes, int rollouts)
      : Error("retrained agent reached the goal in " + std::to_string(successes) + "/" + std::to_string(rollouts) +
              " rollouts"),
        agent_(std::move(agent)),
        successes_(successes) {}
  const Agent& agent() const noexcept { return agent_; }
  int successes() const noexcept { return successes_; }

 private:
  Agent agent_;
  int successes_;
};

struct RetrainResult {
  Agent agent;
  TrainStats stats;
  double wall_seconds = 0.0;
};

// Single-example ("1:N") adversarial training. Verification is skipped when
// the budget is zero, in which case the agent is returned unchanged.
RetrainResult gradient_band_retrain(const Agent& agent, const GridMap& base, const DominantExample& example,
                                    const RetrainConfig& cfg);

// Fine-tunes round-robin over every perturbed map with the single-example
// budget per map. Verification requires the mean success over the perturbed
// maps to reach the same threshold.
RetrainResult traditional_adversarial_training(const Agent& agent, const GridMap& base,
                                               std::span<const DominantExample> examples, const RetrainConfig& cfg);

struct ImmunityReport {
  std::string map_id;
  std::string training_example_id;
  double retrain_wall_seconds = 0.0;
  std::optional<double> baseline_wall_seconds;
  std::size_t baseline_examples = 0;
  std::vector<ScoredExample> scored;
  std::optional<double> immune_precision;
  std::optional<double> speedup;
  bool retrain_verified = true;
  // agent_new on its own training example: F_attack = 0.
  bool training_example_immunized = false;
  // Fraction of clean-map trials with F_attack = 0.
  double clean_success = 0.0;
};

// Scores `remaining` against agent_new. Throws UndefinedPrecision when
// `remaining` is empty.
ImmunityReport evaluate_immunity(const Agent& agent_new, const GridMap& base, std::span<const ScoredExample> remaining,
                                 const AttackParams& params, const ValidationConfig& cfg,
                                 const GradientBand* band = nullptr);

std::string immunity_csv(const ImmunityReport& report, TimeMode mode);

}  // namespace gradband
