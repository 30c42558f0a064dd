#include "gradband/immunize.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace gradband {

std::uint64_t retrain_budget(const Agent& original, const RetrainConfig& cfg) {
  if (!(cfg.budget_fraction >= 0.0) || cfg.budget_fraction > 0.2)
    throw InvalidArgument("retrain budget fraction must lie in [0, 0.2]");
  return static_cast<std::uint64_t>(std::llround(cfg.budget_fraction * static_cast<double>(original.train_steps)));
}

namespace {

RetrainResult fine_tune(const Agent& agent, std::span<const GridMap> maps, std::uint64_t budget,
                        const RetrainConfig& cfg) {
  TrainConfig tc = cfg.train;
  tc.total_env_steps = budget;
  tc.seed = cfg.seed;
  RetrainResult out;
  const auto t0 = std::chrono::steady_clock::now();
  out.agent = train_on_maps(maps, tc, cfg.from_scratch ? nullptr : &agent, &out.stats);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.agent.trained_on = agent.trained_on;
  out.agent.train_steps = agent.train_steps + budget;
  return out;
}

int verified_successes(const Agent& agent, const GridMap& map, const RetrainConfig& cfg) {
  const double rate = success_rate(agent, map, cfg.verify_rollouts, effective_step_cap(cfg.train, map.size()),
                                   RolloutMode::Greedy, cfg.seed);
  return static_cast<int>(std::lround(rate * cfg.verify_rollouts));
}

}  // namespace

RetrainResult gradient_band_retrain(const Agent& agent, const GridMap& base, const DominantExample& example,
                                    const RetrainConfig& cfg) {
  const std::uint64_t budget = retrain_budget(agent, cfg);
  if (budget == 0 && !cfg.from_scratch) return {agent, {}, 0.0};

  const GridMap perturbed = perturbed_map(base, example);
  std::vector<GridMap> maps{perturbed};
  if (cfg.mix_clean) maps.push_back(base);
  auto out = fine_tune(agent, maps, budget, cfg);
  const int ok = verified_successes(out.agent, perturbed, cfg);
  if (ok < cfg.verify_min_success) throw RetrainFailed(out.agent, ok, cfg.verify_rollouts);
  return out;
}

RetrainResult traditional_adversarial_training(const Agent& agent, const GridMap& base,
                                               std::span<const DominantExample> examples, const RetrainConfig& cfg) {
  if (examples.empty()) throw InvalidArgument("traditional adversarial training needs at least one example");
  const std::uint64_t budget = retrain_budget(agent, cfg);
  if (budget == 0 && !cfg.from_scratch) return {agent, {}, 0.0};

  std::vector<GridMap> maps;
  for (const auto& ex : examples) maps.push_back(perturbed_map(base, ex));
  auto out = fine_tune(agent, maps, budget * examples.size(), cfg);
  long total = 0;
  for (const auto& m : maps) total += verified_successes(out.agent, m, cfg);
  const int mean = static_cast<int>(total / static_cast<long>(maps.size()));
  if (mean < cfg.verify_min_success) throw RetrainFailed(out.agent, mean, cfg.verify_rollouts);
  return out;
}

ImmunityReport evaluate_immunity(const Agent& agent_new, const GridMap& base, std::span<const ScoredExample> remaining,
                                 const AttackParams& params, const ValidationConfig& cfg, const GradientBand* band) {
  if (remaining.empty()) throw UndefinedPrecision("immune precision undefined: no remaining valid examples");
  std::vector<DominantExample> examples;
  for (const auto& s : remaining) examples.push_back(s.example);
  auto rep = validate_examples(agent_new, base, examples, params, cfg, band);

  ImmunityReport out;
  out.map_id = rep.map_id;
  out.scored = std::move(rep.scored);
  std::size_t immune = 0;
  for (const auto& s : out.scored) immune += s.f_attack == 0.0;
  out.immune_precision = immune_precision(immune, out.scored.size());

  const int cap = effective_step_cap(cfg, base.size());
  int clean_ok = 0;
  for (int t = 0; t < cfg.trials; ++t) {
    const auto r = rollout(agent_new, base, cap, cfg.mode, cfg.seed + static_cast<std::uint64_t>(t));
    clean_ok += f_attack(r, base.goal(), params) == 0.0;
  }
  out.clean_success = static_cast<double>(clean_ok) / cfg.trials;
  return out;
}

std::string immunity_csv(const ImmunityReport& report, TimeMode mode) {
  std::ostringstream out;
  out << "example,time,reached,arrived_x,arrived_y,f_attack,immunized,tags\n";
  for (const auto& s : report.scored) {
    std::string tags;
    for (const auto& name : s.tags.names()) tags += (tags.empty() ? "" : ";") + name;
    out << s.example.id() << ',' << outcome_time(s.outcome, mode) << ',' << (s.outcome.reached ? 1 : 0) << ','
        << s.outcome.end_position.x << ',' << s.outcome.end_position.y << ',' << s.f_attack << ','
        << (s.f_attack == 0.0 ? 1 : 0) << ',' << tags << '\n';
  }
  return out.str();
}

}  // namespace gradband
