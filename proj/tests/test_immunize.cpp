#include <doctest.h>

#include "gradband/immunize.hpp"
#include "support.hpp"

using namespace gradband;

namespace {

struct Fixture {
  GridMap map = GridMap(8, {}, {0, 0}, {7, 7});
  Agent agent;
  std::vector<DominantExample> examples;

  Fixture() {
    agent = train(map, testing::reference_train(8, 4));
    for (int y : {3, 4}) {
      DominantExample e;
      e.base_map_id = fingerprint(map);
      e.index = y;
      for (int x = 1; x <= 6; ++x) e.baffle_cells.push_back({x, y});
      examples.push_back(e);
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

RetrainConfig retrain_cfg() {
  RetrainConfig c;
  c.train = testing::reference_train(8);
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("retrain budget") {
  Agent a;
  a.train_steps = 1000;
  RetrainConfig c;
  CHECK(retrain_budget(a, c) == 200);
  c.budget_fraction = 0.21;
  CHECK_THROWS_AS(retrain_budget(a, c), InvalidArgument);
  c.budget_fraction = -0.1;
  CHECK_THROWS_AS(retrain_budget(a, c), InvalidArgument);
}

TEST_CASE("zero budget is the identity") {
  const auto& f = fixture();
  RetrainConfig c = retrain_cfg();
  c.budget_fraction = 0.0;
  CHECK(gradient_band_retrain(f.agent, f.map, f.examples[0], c).agent == f.agent);
  CHECK(traditional_adversarial_training(f.agent, f.map, f.examples, c).agent == f.agent);
}

TEST_CASE("single-example retraining immunizes its own example and is deterministic") {
  const auto& f = fixture();
  const RetrainConfig c = retrain_cfg();
  RetrainResult a, b;
  try {
    a = gradient_band_retrain(f.agent, f.map, f.examples[0], c);
    b = gradient_band_retrain(f.agent, f.map, f.examples[0], c);
  } catch (const RetrainFailed& e) {
    FAIL(e.what());
  }
  CHECK(a.agent == b.agent);
  CHECK(a.agent.arch == f.agent.arch);
  CHECK(a.stats.env_steps >= retrain_budget(f.agent, c));
  const GridMap pm = perturbed_map(f.map, f.examples[0]);
  CHECK(rollout(a.agent, pm, effective_step_cap(c.train, 8), RolloutMode::Greedy).reached);
}

TEST_CASE("traditional training on one example matches single-example retraining") {
  const auto& f = fixture();
  const RetrainConfig c = retrain_cfg();
  const std::vector<DominantExample> one{f.examples[1]};
  const auto single = gradient_band_retrain(f.agent, f.map, f.examples[1], c);
  const auto trad = traditional_adversarial_training(f.agent, f.map, one, c);
  CHECK(single.agent == trad.agent);
  CHECK(single.stats.env_steps == trad.stats.env_steps);

  const auto both = traditional_adversarial_training(f.agent, f.map, f.examples, c);
  CHECK(both.stats.env_steps >= 2 * retrain_budget(f.agent, c));
  CHECK(both.wall_seconds >= 2 * 0.5 * single.wall_seconds);
}

TEST_CASE("immunity evaluation") {
  const auto& f = fixture();
  ValidationConfig vc;
  const AttackParams p{0.3, 0.7, 1000.0, TimeMode::Steps};
  std::vector<ScoredExample> remaining;
  for (const auto& e : f.examples) remaining.push_back({e, {}, 1.0, {}});

  // An agent that beats every example within epsilon is fully immune.
  RetrainConfig c = retrain_cfg();
  c.train.total_env_steps = 0;
  const Agent immune = train_on_maps(std::vector<GridMap>{perturbed_map(f.map, f.examples[0]),
                                                          perturbed_map(f.map, f.examples[1])},
                                     testing::reference_train(8, 6), &f.agent);
  const auto rep = evaluate_immunity(immune, f.map, remaining, p, vc);
  std::size_t zero = 0;
  for (const auto& s : rep.scored) {
    const auto r = rollout(immune, perturbed_map(f.map, s.example), effective_step_cap(vc, 8), RolloutMode::Greedy);
    CHECK(s.f_attack == f_attack(r, f.map.goal(), p));
    zero += s.f_attack == 0.0;
  }
  CHECK(*rep.immune_precision == static_cast<double>(zero) / rep.scored.size());
  if (zero == rep.scored.size()) CHECK(*rep.immune_precision == 1.0);
  CHECK(rep.clean_success >= 0.0);
  CHECK(rep.clean_success <= 1.0);

  CHECK_THROWS_AS(evaluate_immunity(immune, f.map, {}, p, vc), UndefinedPrecision);
  const std::string csv = immunity_csv(rep, TimeMode::Steps);
  CHECK(csv.rfind("example,time,reached", 0) == 0);
}
