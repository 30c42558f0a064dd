#include <doctest.h>

#include <cmath>
#include <random>

#include "gradband/validation.hpp"
#include "support.hpp"

using namespace gradband;

namespace {

EpisodeResult outcome(bool reached, int steps, Cell end) {
  EpisodeResult r;
  r.reached = reached;
  r.steps = steps;
  r.end_position = end;
  return r;
}

AttackParams params(double w1, double w2, double eps) { return {w1, w2, eps, TimeMode::Steps}; }

DominantExample row_baffle(const GridMap& m, int y, int x0, int x1) {
  DominantExample e;
  e.base_map_id = fingerprint(m);
  e.orientation = Orientation::Row;
  e.index = y;
  for (int x = x0; x <= x1; ++x) e.baffle_cells.push_back({x, y});
  return e;
}

}  // namespace

TEST_CASE("euclidean distance") {
  CHECK(euclidean_distance({19, 19}, {19, 19}) == 0.0);
  CHECK(euclidean_distance({0, 0}, {3, 4}) == 5.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Cell a{int(rng() % 200) - 100, int(rng() % 200) - 100};
    const Cell b{int(rng() % 200) - 100, int(rng() % 200) - 100};
    CHECK(euclidean_distance(a, b) == euclidean_distance(b, a));
    CHECK((euclidean_distance(a, b) == 0.0) == (a == b));
  }
}

TEST_CASE("excess time") {
  CHECK(relu_excess_time(8, 60) == 0.0);
  CHECK(relu_excess_time(60, 60) == 0.0);
  CHECK(relu_excess_time(100, 60) == 40.0);
}

TEST_CASE("attack score") {
  const Cell goal{19, 19};
  // Reached in 8 with epsilon 60: no attack effect at all.
  CHECK(f_attack(outcome(true, 8, goal), goal, params(0.3, 0.7, 60)) == 0.0);

  CHECK(f_attack(outcome(false, 100, {16, 16}), goal, params(0.3, 0.7, 60)) ==
        doctest::Approx(0.3 * 40 + 0.7 * std::sqrt(18.0)).epsilon(1e-12));
  CHECK(std::abs(f_attack(outcome(false, 100, {16, 16}), goal, params(0.3, 0.7, 60)) - 14.970) < 1e-3);

  // Cap-limited run that never arrives: positive and increasing in omega2.
  double prev = 0.0;
  for (int k = 0; k <= 9; ++k) {
    const double w2 = 0.55 + 0.05 * k;
    const double f = f_attack(outcome(false, 40, {1, 2}), goal, params(1.0 - w2, w2, 60));
    CHECK(f > 0.0);
    CHECK(f > prev);
    prev = f;
  }
}

TEST_CASE("attack score properties") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Cell goal{9, 9};
  for (int i = 0; i < 2000; ++i) {
    const double w2 = 0.5 + 0.5 * u(rng) + 1e-9;
    const AttackParams p = params(1.0 - w2, w2, 1.0 + 50 * u(rng));
    const bool reached = rng() % 2;
    const int steps = int(rng() % 120);
    const Cell end = reached ? goal : Cell{int(rng() % 9), int(rng() % 9)};
    const double f = f_attack(outcome(reached, steps, end), goal, p);
    CHECK(f >= 0.0);
    CHECK((f == 0.0) == (reached && steps <= p.epsilon));

    // A run that stops short within epsilon against one that arrives late.
    const Cell stop{int(rng() % 9), int(rng() % 9)};
    const double d = euclidean_distance(stop, goal);
    const double e = 1 + double(rng() % 50);
    const double short_run = f_attack(outcome(false, int(p.epsilon), stop), goal, p);
    const double late_run = f_attack(outcome(true, int(std::ceil(p.epsilon)) + int(e), goal), goal, p);
    const double excess = std::ceil(p.epsilon) + e - p.epsilon;
    if (p.omega2 * d > p.omega1 * excess) CHECK(short_run > late_run);
  }
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(validate_params(params(0.3, 0.7, 1)));
  CHECK_THROWS_AS(validate_params(params(0.4, 0.7, 1)), InvalidArgument);
  CHECK_THROWS_AS(validate_params(params(0.5, 0.5, 1)), InvalidArgument);
  CHECK_THROWS_AS(validate_params(params(0.3, 0.7, 0)), InvalidArgument);
  CHECK(parse_time_mode("steps") == TimeMode::Steps);
  CHECK(parse_time_mode("seconds") == TimeMode::WallSeconds);
  CHECK_THROWS(parse_time_mode("minutes"));
}

TEST_CASE("precision ratios") {
  CHECK(generation_precision(0, 7) == 0.0);
  CHECK(generation_precision(17, 18) == doctest::Approx(0.94444444444));
  CHECK_THROWS_AS(generation_precision(0, 0), UndefinedPrecision);
  CHECK(immune_precision(9, 9) == 1.0);
  CHECK(immune_precision(15, 16) == 0.9375);
  CHECK_THROWS_AS(immune_precision(0, 0), UndefinedPrecision);
}

TEST_CASE("failure tags") {
  const GridMap m(10, {}, {0, 0}, {9, 9});
  CHECK(failure_tags(m, row_baffle(m, 2, 1, 3), nullptr, 2, 2.0).near_start);
  CHECK_FALSE(failure_tags(m, row_baffle(m, 2, 1, 3), nullptr, 2, 2.0).near_goal);
  CHECK(failure_tags(m, row_baffle(m, 7, 6, 8), nullptr, 2, 2.0).near_goal);
  CHECK(failure_tags(m, row_baffle(m, 5, 4, 5), nullptr, 2, 2.0).empty());
  CHECK(failure_tags(m, row_baffle(m, 2, 1, 3), nullptr, 2, 2.0).names() == std::vector<std::string>{"near-start"});
}

TEST_CASE("validate_examples with an agent that never arrives") {
  const GridMap m = generate_random_map(10, 0.1, 3);
  const Agent idle = make_agent(TrainConfig{}, 1);
  ValidationConfig cfg;
  cfg.step_cap = 12;  // too short to cross a 10x10 map
  std::vector<DominantExample> ex;
  for (int y = 3; y <= 6; ++y)
    if (m.is_free({4, y}) && m.is_free({5, y})) ex.push_back(row_baffle(m, y, 4, 5));
  REQUIRE(!ex.empty());
  const auto rep = validate_examples(idle, m, ex, params(0.3, 0.7, 100), cfg);
  CHECK(rep.total == ex.size());
  CHECK(rep.valid.size() == ex.size());
  CHECK(rep.generation_precision == 1.0);
}

TEST_CASE("validate_examples filters and counts like an independent pass") {
  const GridMap m(8, {}, {0, 0}, {7, 7});
  const Agent a = train(m, testing::reference_train(8, 2));
  ValidationConfig cfg;
  REQUIRE(rollout(a, m, effective_step_cap(cfg, 8), RolloutMode::Greedy).reached);

  std::vector<DominantExample> ex;
  for (int y = 1; y <= 6; ++y) ex.push_back(row_baffle(m, y, 0, 5));
  for (int y = 1; y <= 6; ++y) ex.push_back(row_baffle(m, y, 2, 7));
  const AttackParams p = params(0.3, 0.7, 15);
  const auto rep = validate_examples(a, m, ex, p, cfg);

  REQUIRE(rep.scored.size() == ex.size());
  std::size_t valid = 0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const auto r = rollout(a, perturbed_map(m, ex[i]), effective_step_cap(cfg, 8), RolloutMode::Greedy);
    const double f = f_attack(r, m.goal(), p);
    CHECK(rep.scored[i].f_attack == f);
    CHECK(rep.scored[i].example == ex[i]);
    valid += f > 0.0;
    if (r.reached && r.steps <= p.epsilon) CHECK(rep.scored[i].f_attack == 0.0);
  }
  CHECK(rep.valid.size() == valid);
  CHECK(*rep.generation_precision == static_cast<double>(valid) / ex.size());
  for (const auto& s : rep.valid) CHECK(s.f_attack > 0.0);

  const auto again = rescore(rep, m.goal());
  CHECK(again.valid.size() == rep.valid.size());
  CHECK(again.generation_precision == rep.generation_precision);
  for (std::size_t i = 0; i < rep.scored.size(); ++i) CHECK(again.scored[i].f_attack == rep.scored[i].f_attack);

  // Parallel scoring is a pure speed-up.
  cfg.jobs = 3;
  const auto par = validate_examples(a, m, ex, p, cfg);
  for (std::size_t i = 0; i < rep.scored.size(); ++i) CHECK(par.scored[i].f_attack == rep.scored[i].f_attack);

  const std::string csv = report_csv(rep);
  CHECK(csv.rfind("example,time,time_unit,reached,arrived_x,arrived_y,f_attack,tags\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == ex.size() + 1);
}

TEST_CASE("epsilon calibration scales the clean time") {
  const GridMap m(8, {}, {0, 0}, {7, 7});
  const Agent a = train(m, testing::reference_train(8, 2));
  ValidationConfig cfg;
  const auto r = rollout(a, m, effective_step_cap(cfg, 8), RolloutMode::Greedy);
  CHECK(calibrate_epsilon(a, m, cfg, TimeMode::Steps, 3.0) == 3.0 * r.steps);
}
