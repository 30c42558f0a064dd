#include "gradband/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace gradband {

const char* to_string(TimeMode mode) { return mode == TimeMode::Steps ? "steps" : "seconds"; }

TimeMode parse_time_mode(const std::string& text) {
  if (text == "steps") return TimeMode::Steps;
  if (text == "seconds" || text == "wall") return TimeMode::WallSeconds;
  throw InvalidArgument("unknown time mode '" + text + "' (expected steps or seconds)");
}

void validate_params(const AttackParams& params) {
  if (!(params.omega1 >= 0.0) || !(params.omega2 >= 0.0))
    throw InvalidArgument("attack weights must be nonnegative");
  if (std::abs(params.omega1 + params.omega2 - 1.0) > 1e-12) throw InvalidArgument("attack weights must sum to 1");
  if (!(params.omega2 > params.omega1)) throw InvalidArgument("omega2 must exceed omega1");
  if (!(params.epsilon > 0.0) || !std::isfinite(params.epsilon)) throw InvalidArgument("epsilon must be positive");
}

double euclidean_distance(Cell a, Cell b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

double relu_excess_time(double t_total, double epsilon) { return std::max(0.0, t_total - epsilon); }

double outcome_time(const EpisodeResult& outcome, TimeMode mode) {
  return mode == TimeMode::Steps ? static_cast<double>(outcome.steps) : outcome.wall_seconds;
}

double f_attack(const EpisodeResult& outcome, Cell goal, const AttackParams& params) {
  const double excess = relu_excess_time(outcome_time(outcome, params.time_mode), params.epsilon);
  const double miss = outcome.reached ? 0.0 : euclidean_distance(outcome.end_position, goal);
  return params.omega1 * excess + params.omega2 * miss;
}

std::vector<std::string> FailureTags::names() const {
  std::vector<std::string> out;
  if (near_start) out.emplace_back("near-start");
  if (near_goal) out.emplace_back("near-goal");
  if (dense_band_region) out.emplace_back("dense-band-region");
  return out;
}

int effective_step_cap(const ValidationConfig& cfg, int map_size) {
  return cfg.step_cap > 0 ? cfg.step_cap : 10 * map_size;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

EpisodeResult aggregate_rollouts(const Agent& agent, const GridMap& map, const ValidationConfig& cfg, TimeMode mode) {
  if (cfg.trials < 1) throw InvalidArgument("trials must be >= 1");
  const int cap = effective_step_cap(cfg, map.size());
  std::vector<EpisodeResult> runs;
  runs.reserve(static_cast<std::size_t>(cfg.trials));
  for (int t = 0; t < cfg.trials; ++t)
    runs.push_back(rollout(agent, map, cap, cfg.mode, cfg.seed + static_cast<std::uint64_t>(t)));

  const auto reached = std::count_if(runs.begin(), runs.end(), [](const EpisodeResult& r) { return r.reached; });
  const bool verdict = 2 * reached > cfg.trials;
  std::vector<std::size_t> agree;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i].reached == verdict) agree.push_back(i);
  std::stable_sort(agree.begin(), agree.end(), [&](std::size_t a, std::size_t b) {
    return outcome_time(runs[a], mode) < outcome_time(runs[b], mode);
  });
  return runs[agree[(agree.size() - 1) / 2]];
}

double calibrate_epsilon(const Agent& agent, const GridMap& map, const ValidationConfig& cfg, TimeMode mode,
                         double factor) {
  if (cfg.trials < 1) throw InvalidArgument("trials must be >= 1");
  const int cap = effective_step_cap(cfg, map.size());
  std::vector<double> times;
  for (int t = 0; t < cfg.trials; ++t)
    times.push_back(outcome_time(rollout(agent, map, cap, cfg.mode, cfg.seed + static_cast<std::uint64_t>(t)), mode));
  const double eps = factor * median(std::move(times));
  // Wall-clock medians can round to zero on tiny maps.
  return eps > 0.0 ? eps : 1e-9;
}

FailureTags failure_tags(const GridMap& base, const DominantExample& example, const GradientBand* band, int near_radius,
                         double dense_factor) {
  FailureTags tags;
  const auto cheb = [](Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); };
  for (Cell c : example.baffle_cells) {
    tags.near_start |= cheb(c, base.start()) <= near_radius;
    tags.near_goal |= cheb(c, base.goal()) <= near_radius;
  }
  if (band == nullptr || example.baffle_cells.empty()) return tags;

  const int n = base.size();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n) * n, 0);
  std::size_t cells = 0, blocked = 0;
  for (Cell c : example.baffle_cells)
    for (int dy = -near_radius; dy <= near_radius; ++dy)
      for (int dx = -near_radius; dx <= near_radius; ++dx) {
        const Cell q{c.x + dx, c.y + dy};
        if (!base.in_bounds(q)) continue;
        auto& mark = seen[static_cast<std::size_t>(q.y) * n + q.x];
        if (mark) continue;
        mark = 1;
        if (!band->contains({static_cast<double>(q.x), static_cast<double>(q.y)})) continue;
        ++cells;
        blocked += base.is_obstacle(q);
      }
  const double map_density = static_cast<double>(base.obstacle_count()) / (static_cast<double>(n) * n);
  tags.dense_band_region = cells > 0 && static_cast<double>(blocked) / cells > dense_factor * map_density;
  return tags;
}

SampleSpaceReport validate_examples(const Agent& agent, const GridMap& base, std::span<const DominantExample> examples,
                                    const AttackParams& params, const ValidationConfig& cfg, const GradientBand* band) {
  validate_params(params);
  SampleSpaceReport report;
  report.map_id = fingerprint(base);
  report.params = params;
  report.step_cap = effective_step_cap(cfg, base.size());
  report.trials = cfg.trials;
  report.total = examples.size();
  report.scored.resize(examples.size());

  const auto score = [&](std::size_t i) {
    ScoredExample& s = report.scored[i];
    s.example = examples[i];
    s.outcome = aggregate_rollouts(agent, perturbed_map(base, examples[i]), cfg, params.time_mode);
    s.f_attack = f_attack(s.outcome, base.goal(), params);
    s.tags = failure_tags(base, examples[i], band, cfg.near_radius, cfg.dense_factor);
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(examples.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < examples.size(); ++i) score(i);
  } else {
    // Each worker writes only its own slots; merge order is the input order.
    std::vector<std::jthread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < examples.size(); i += static_cast<std::size_t>(jobs))
          score(i);
      });
  }

  for (const auto& s : report.scored)
    if (s.f_attack > 0.0) report.valid.push_back(s);
  if (report.total > 0) report.generation_precision = generation_precision(report.valid.size(), report.total);
  return report;
}

SampleSpaceReport rescore(const SampleSpaceReport& report, Cell goal) {
  SampleSpaceReport out = report;
  out.valid.clear();
  for (auto& s : out.scored) {
    s.f_attack = f_attack(s.outcome, goal, out.params);
    if (s.f_attack > 0.0) out.valid.push_back(s);
  }
  out.generation_precision.reset();
  if (out.total > 0) out.generation_precision = generation_precision(out.valid.size(), out.total);
  return out;
}

double generation_precision(std::size_t n_success, std::size_t m_total) {
  if (m_total == 0) throw UndefinedPrecision("generation precision undefined: no candidates");
  if (n_success > m_total) throw InvalidArgument("more successes than candidates");
  return static_cast<double>(n_success) / static_cast<double>(m_total);
}

double immune_precision(std::size_t i_success, std::size_t n_success) {
  if (n_success == 0) throw UndefinedPrecision("immune precision undefined: empty valid set");
  if (i_success > n_success) throw InvalidArgument("more immunized examples than valid ones");
  return static_cast<double>(i_success) / static_cast<double>(n_success);
}

std::string report_csv(const SampleSpaceReport& report) {
  std::ostringstream out;
  out << "example,time,time_unit,reached,arrived_x,arrived_y,f_attack,tags\n";
  char buf[64];
  for (const auto& s : report.scored) {
    const double t = outcome_time(s.outcome, report.params.time_mode);
    std::string tags;
    for (const auto& name : s.tags.names()) tags += (tags.empty() ? "" : ";") + name;
    std::snprintf(buf, sizeof buf, "%.6g", t);
    out << s.example.id() << ',' << buf << ',' << to_string(report.params.time_mode) << ','
        << (s.outcome.reached ? 1 : 0) << ',' << s.outcome.end_position.x << ',' << s.outcome.end_position.y << ',';
    std::snprintf(buf, sizeof buf, "%.2f", s.f_attack);
    out << buf << ',' << tags << '\n';
  }
  return out.str();
}

}  // namespace gradband
