#include "gradband/a3c.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace gradband {

int effective_step_cap(const TrainConfig& cfg, int map_size) {
  return cfg.step_cap > 0 ? cfg.step_cap : 10 * map_size;
}

void validate_config(const TrainConfig& cfg, int map_size) {
  if (cfg.workers < 1) throw InvalidArgument("workers must be >= 1");
  if (cfg.n_step < 1) throw InvalidArgument("n_step must be >= 1");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw InvalidArgument("gamma must lie in (0, 1)");
  if (!(cfg.lr > 0.0)) throw InvalidArgument("lr must be positive");
  if (cfg.entropy_coef < 0.0 || cfg.value_coef < 0.0) throw InvalidArgument("loss coefficients must be >= 0");
  if (cfg.step_cap != 0 && cfg.step_cap < 4 * map_size)
    throw InvalidArgument("step cap " + std::to_string(cfg.step_cap) + " below 4N = " + std::to_string(4 * map_size));
  if (!(cfg.random_start_prob >= 0.0 && cfg.random_start_prob <= 1.0))
    throw InvalidArgument("random_start_prob must lie in [0, 1]");
  if (cfg.hidden < 1 || cfg.window_radius < 0) throw InvalidArgument("bad network geometry");
}

Agent make_agent(const TrainConfig& cfg, std::uint64_t seed) {
  Agent agent;
  agent.arch = {observation_size(cfg.window_radius), cfg.hidden, cfg.hidden, kActionCount};
  agent.window_radius = cfg.window_radius;
  agent.seed = seed;
  std::mt19937_64 rng(seed);
  agent.params = init_params(agent.arch, rng);
  return agent;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

void adam_step(std::vector<double>& params, AdamState& s, std::span<const double> grad, double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++s.t;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * g;
    s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * g * g;
    params[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + kEps);
  }
}

// Parameter store shared by all actor-learners.
struct SharedStore {
  std::mutex mu;
  std::vector<double> params;
  AdamState adam;
  std::atomic<std::uint64_t> env_steps{0};
  std::atomic<std::uint64_t> episodes{0};
  std::atomic<std::uint64_t> goals{0};
  std::atomic<std::uint64_t> produced{0};
  std::atomic<std::uint64_t> applied{0};
  std::atomic<bool> abort{false};
  std::exception_ptr error;
};

struct MapContext {
  const GridMap* map;
  std::vector<Cell> starts;  // free cells other than the goal
};

std::uint64_t worker_seed(std::uint64_t seed, int worker) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker), 0x5eedu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

int sample_action(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

void run_worker(int id, SharedStore& store, std::span<const MapContext> maps, const TrainConfig& cfg,
                const Arch& arch) {
  std::mt19937_64 rng(worker_seed(cfg.seed, id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int obs_n = arch.inputs;
  const auto n_step = static_cast<std::size_t>(cfg.n_step);
  const LossWeights weights{cfg.entropy_coef, cfg.value_coef};

  std::vector<double> local(arch.param_count());
  std::vector<double> grad(arch.param_count());
  std::vector<std::vector<double>> inputs(n_step + 1, std::vector<double>(static_cast<std::size_t>(obs_n)));
  std::vector<Activations> acts(n_step + 1, Activations(arch));
  std::vector<int> actions(n_step);
  std::vector<double> rewards(n_step);
  std::vector<double> dlogits(static_cast<std::size_t>(arch.actions));

  std::size_t map_idx = static_cast<std::size_t>(id) % maps.size();
  Cell pos{};
  int episode_steps = 0;
  const auto reset_episode = [&] {
    const auto& ctx = maps[map_idx];
    pos = ctx.map->start();
    if (cfg.random_start_prob > 0.0 && unit(rng) < cfg.random_start_prob) {
      pos = ctx.starts[std::uniform_int_distribution<std::size_t>(0, ctx.starts.size() - 1)(rng)];
    }
    episode_steps = 0;
  };
  reset_episode();

  while (!store.abort.load(std::memory_order_relaxed) &&
         store.env_steps.load(std::memory_order_relaxed) < cfg.total_env_steps) {
    {
      std::lock_guard lock(store.mu);
      std::copy(store.params.begin(), store.params.end(), local.begin());
    }
    const GridMap& map = *maps[map_idx].map;
    const int cap = effective_step_cap(cfg, map.size());

    std::size_t taken = 0;
    bool terminal = false, truncated = false;
    for (; taken < n_step; ++taken) {
      encode_observation(map, pos, cfg.window_radius, inputs[taken]);
      forward(arch, local, inputs[taken], acts[taken]);
      const int a = sample_action(acts[taken].probs, rng);
      const auto out = step(map, pos, static_cast<Action>(a), cfg.reward);
      actions[taken] = a;
      rewards[taken] = out.reward;
      pos = out.pos;
      ++episode_steps;
      if (out.reached) {
        terminal = true;
        ++taken;
        break;
      }
      if (episode_steps >= cap) {
        truncated = true;
        ++taken;
        break;
      }
    }
    const std::uint64_t step_no = store.env_steps.fetch_add(taken, std::memory_order_relaxed) + taken;

    double ret = 0.0;
    if (!terminal) {
      encode_observation(map, pos, cfg.window_radius, inputs[taken]);
      forward(arch, local, inputs[taken], acts[taken]);
      ret = acts[taken].value;
    }

    // The goal cell is terminal; anchor its critic value one discount step
    // above the arrival return so the value surface peaks at the goal.
    const std::size_t batch = taken + (terminal ? 1 : 0);
    const double scale = 1.0 / static_cast<double>(batch);
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t t = taken; t-- > 0;) {
      ret = rewards[t] + cfg.gamma * ret;
      const double advantage = ret - acts[t].value;
      double dvalue = 0.0;
      loss += sample_loss_terms(acts[t], actions[t], ret, advantage, weights, dlogits, dvalue);
      for (auto& g : dlogits) g *= scale;
      backward(arch, local, inputs[t], acts[t], dlogits, dvalue * scale, grad);
    }
    if (terminal) {
      auto& in = inputs[taken];
      auto& act = acts[taken];
      encode_observation(map, pos, cfg.window_radius, in);
      forward(arch, local, in, act);
      double dvalue = 0.0;
      const double anchor = (cfg.reward.goal + cfg.reward.step) / cfg.gamma;
      loss += sample_loss_terms(act, -1, anchor, 0.0, weights, dlogits, dvalue);
      backward(arch, local, in, act, dlogits, dvalue * scale, grad);
    }
    loss *= scale;

    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    if (!std::isfinite(loss) || !std::isfinite(norm2)) {
      std::lock_guard lock(store.mu);
      if (!store.error)
        store.error = std::make_exception_ptr(TrainingDiverged(step_no, "non-finite loss " + std::to_string(loss)));
      store.abort = true;
      return;
    }
    if (cfg.max_grad_norm > 0.0 && norm2 > cfg.max_grad_norm * cfg.max_grad_norm) {
      const double s = cfg.max_grad_norm / std::sqrt(norm2);
      for (auto& g : grad) g *= s;
    }
    store.produced.fetch_add(1, std::memory_order_relaxed);
    {
      std::lock_guard lock(store.mu);
      adam_step(store.params, store.adam, grad, cfg.lr);
      store.applied.fetch_add(1, std::memory_order_relaxed);
    }

    if (terminal || truncated) {
      store.episodes.fetch_add(1, std::memory_order_relaxed);
      if (terminal) store.goals.fetch_add(1, std::memory_order_relaxed);
      map_idx = (map_idx + 1) % maps.size();
      reset_episode();
    }
  }
}

}  // namespace

Agent train(const GridMap& map, const TrainConfig& cfg, TrainStats* stats) {
  return train_on_maps(std::span<const GridMap>(&map, 1), cfg, nullptr, stats);
}

Agent train_on_maps(std::span<const GridMap> maps, const TrainConfig& cfg, const Agent* init, TrainStats* stats) {
  if (maps.empty()) throw InvalidArgument("no training maps");
  for (const auto& m : maps) validate_config(cfg, m.size());
  const auto t0 = std::chrono::steady_clock::now();

  Agent agent = init ? *init : make_agent(cfg, cfg.seed);
  if (agent.arch.inputs != observation_size(cfg.window_radius) || agent.window_radius != cfg.window_radius)
    throw InvalidArgument("agent observation encoding does not match the training config");
  if (agent.params.size() != agent.arch.param_count()) throw InvalidArgument("agent params do not match its arch");
  if (!init) agent.trained_on = fingerprint(maps.front());

  std::vector<MapContext> contexts;
  for (const auto& m : maps) {
    MapContext ctx{&m, {}};
    for (int y = 0; y < m.size(); ++y)
      for (int x = 0; x < m.size(); ++x)
        if (Cell c{x, y}; m.is_free(c) && c != m.goal()) ctx.starts.push_back(c);
    contexts.push_back(std::move(ctx));
  }

  SharedStore store;
  store.params = agent.params;
  store.adam.m.assign(store.params.size(), 0.0);
  store.adam.v.assign(store.params.size(), 0.0);

  if (cfg.total_env_steps > 0) {
    if (cfg.workers == 1) {
      run_worker(0, store, contexts, cfg, agent.arch);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(static_cast<std::size_t>(cfg.workers));
      for (int w = 0; w < cfg.workers; ++w)
        pool.emplace_back([&, w] {
          try {
            run_worker(w, store, contexts, cfg, agent.arch);
          } catch (...) {
            std::lock_guard lock(store.mu);
            if (!store.error) store.error = std::current_exception();
            store.abort = true;
          }
        });
    }
    if (store.error) std::rethrow_exception(store.error);
  }

  for (double p : store.params)
    if (!std::isfinite(p)) throw TrainingDiverged(store.env_steps.load(), "non-finite parameter");

  agent.params = std::move(store.params);
  agent.train_steps += store.env_steps.load();
  if (stats) {
    stats->env_steps = store.env_steps.load();
    stats->episodes = store.episodes.load();
    stats->goals_reached = store.goals.load();
    stats->gradients_produced = store.produced.load();
    stats->updates_applied = store.applied.load();
    stats->wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return agent;
}

EpisodeResult rollout(const Agent& agent, const GridMap& map, int step_cap, RolloutMode mode, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  Activations act(agent.arch);
  std::vector<double> input(static_cast<std::size_t>(agent.arch.inputs));
  const RewardConfig rewards{};

  EpisodeResult res;
  Cell pos = map.start();
  res.path.push_back(pos);
  while (res.steps < step_cap) {
    encode_observation(map, pos, agent.window_radius, input);
    forward(agent.arch, agent.params, input, act);
    const int a = mode == RolloutMode::Greedy ? argmax(act.logits) : sample_action(act.probs, rng);
    const auto out = step(map, pos, static_cast<Action>(a), rewards);
    pos = out.pos;
    ++res.steps;
    res.path.push_back(pos);
    if (out.reached) {
      res.reached = true;
      break;
    }
  }
  res.end_position = pos;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

double success_rate(const Agent& agent, const GridMap& map, int rollouts, int step_cap, RolloutMode mode,
                    std::uint64_t seed) {
  if (rollouts <= 0) return 0.0;
  int ok = 0;
  for (int i = 0; i < rollouts; ++i)
    if (rollout(agent, map, step_cap, mode, seed + static_cast<std::uint64_t>(i)).reached) ++ok;
  return static_cast<double>(ok) / rollouts;
}

ValueSurface extract_value_surface(const Agent& agent, const GridMap& map) {
  const int n = map.size();
  ValueSurface s;
  s.size = n;
  s.values.assign(static_cast<std::size_t>(n) * n, 0.0);
  s.free_mask.assign(static_cast<std::size_t>(n) * n, 0);
  Activations act(agent.arch);
  std::vector<double> input(static_cast<std::size_t>(agent.arch.inputs));
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Cell c{x, y};
      if (!map.is_free(c)) continue;
      encode_observation(map, c, agent.window_radius, input);
      forward(agent.arch, agent.params, input, act);
      const auto i = static_cast<std::size_t>(y) * n + x;
      s.values[i] = act.value;
      s.free_mask[i] = 1;
      lo = std::min(lo, act.value);
      hi = std::max(hi, act.value);
    }
  }
  for (std::size_t i = 0; i < s.values.size(); ++i)
    if (!s.free_mask[i]) s.values[i] = lo;
  s.value_max = hi;
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoint encoding.

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'G', 'B', 'A', 'G', 'E', 'N', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* field) {
    need(sizeof(T), field);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n, const char* field) {
    need(n, field);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n) throw LoadError(std::string("agent checkpoint truncated while reading ") + field);
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string encode_agent(const Agent& agent) {
  if (agent.params.size() != agent.arch.param_count()) throw InvalidArgument("agent params do not match its arch");
  std::string out(kMagic, sizeof kMagic);
  put(out, kFormatVersion);
  put<std::int32_t>(out, agent.arch.inputs);
  put<std::int32_t>(out, agent.arch.hidden1);
  put<std::int32_t>(out, agent.arch.hidden2);
  put<std::int32_t>(out, agent.arch.actions);
  put<std::int32_t>(out, agent.window_radius);
  put<std::uint64_t>(out, agent.seed);
  put<std::uint64_t>(out, agent.train_steps);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(agent.trained_on.size()));
  out += agent.trained_on;
  put<std::uint64_t>(out, agent.params.size());
  for (double p : agent.params) put(out, p);
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

Agent decode_agent(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof kMagic, "magic") != std::string_view(kMagic, sizeof kMagic))
    throw LoadError("not an agent checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kFormatVersion)
    throw LoadError("unsupported agent checkpoint version " + std::to_string(version));
  Agent a;
  a.arch.inputs = r.get<std::int32_t>("arch");
  a.arch.hidden1 = r.get<std::int32_t>("arch");
  a.arch.hidden2 = r.get<std::int32_t>("arch");
  a.arch.actions = r.get<std::int32_t>("arch");
  a.window_radius = r.get<std::int32_t>("window radius");
  a.seed = r.get<std::uint64_t>("seed");
  a.train_steps = r.get<std::uint64_t>("train steps");
  const auto id_len = r.get<std::uint32_t>("map id length");
  a.trained_on = std::string(r.take(id_len, "map id"));
  const auto count = r.get<std::uint64_t>("parameter count");
  if (a.arch.inputs < 1 || a.arch.hidden1 < 1 || a.arch.hidden2 < 1 || a.arch.actions < 1 ||
      count != a.arch.param_count())
    throw LoadError("parameter count does not match the stored architecture");
  if (r.remaining() < count * sizeof(double) + sizeof(std::uint64_t))
    throw LoadError("agent checkpoint truncated while reading parameters");
  a.params.resize(count);
  for (auto& p : a.params) p = r.get<double>("parameters");
  const std::size_t body = r.pos();
  const auto checksum = r.get<std::uint64_t>("checksum");
  if (checksum != fnv1a(bytes.substr(0, body))) throw LoadError("agent checkpoint checksum mismatch");
  if (r.remaining() != 0) throw LoadError("trailing bytes after agent checkpoint");
  return a;
}

void save_agent(const Agent& agent, const std::string& path) {
  const auto bytes = encode_agent(agent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write agent file " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

Agent load_agent(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open agent file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_agent(ss.str());
}

}  // namespace gradband
