#include "gradband/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gradband {

namespace fs = std::filesystem;

std::uint64_t training_budget(const ExperimentConfig& cfg, int map_size) {
  return cfg.steps_per_cell * static_cast<std::uint64_t>(map_size) * static_cast<std::uint64_t>(map_size);
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string fmt_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  try {
    if (s.empty() || s[0] == '-') throw std::invalid_argument("negative");
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + s + "'");
  }
}

int parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

struct Binding {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& name, const std::string&)> set;
};

#define GB_DOUBLE(sec, key, expr)                                                                        \
  Binding {                                                                                              \
    sec, key, [](const ExperimentConfig& c) { return fmt_double(c.expr); },                              \
        [](ExperimentConfig& c, const std::string& n, const std::string& v) { c.expr = parse_double(n, v); } \
  }
#define GB_INT(sec, key, expr)                                                                          \
  Binding {                                                                                             \
    sec, key, [](const ExperimentConfig& c) { return std::to_string(c.expr); },                         \
        [](ExperimentConfig& c, const std::string& n, const std::string& v) { c.expr = parse_int(n, v); } \
  }
#define GB_U64(sec, key, expr)                                                                          \
  Binding {                                                                                             \
    sec, key, [](const ExperimentConfig& c) { return std::to_string(c.expr); },                         \
        [](ExperimentConfig& c, const std::string& n, const std::string& v) {                           \
          c.expr = static_cast<decltype(c.expr)>(parse_u64(n, v));                                      \
        }                                                                                               \
  }
#define GB_BOOL(sec, key, expr)                                                                          \
  Binding {                                                                                              \
    sec, key, [](const ExperimentConfig& c) { return std::string(c.expr ? "true" : "false"); },          \
        [](ExperimentConfig& c, const std::string& n, const std::string& v) { c.expr = parse_bool(n, v); } \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      GB_U64("experiment", "seed", seed),
      GB_INT("experiment", "jobs", jobs),

      GB_U64("train", "steps_per_cell", steps_per_cell),
      GB_INT("train", "workers", train.workers),
      GB_INT("train", "n_step", train.n_step),
      GB_DOUBLE("train", "gamma", train.gamma),
      GB_DOUBLE("train", "lr", train.lr),
      GB_DOUBLE("train", "entropy_coef", train.entropy_coef),
      GB_DOUBLE("train", "value_coef", train.value_coef),
      GB_INT("train", "step_cap", train.step_cap),
      GB_DOUBLE("train", "reward_goal", train.reward.goal),
      GB_DOUBLE("train", "reward_step", train.reward.step),
      GB_DOUBLE("train", "reward_collision", train.reward.collision),
      GB_DOUBLE("train", "random_start_prob", train.random_start_prob),
      GB_DOUBLE("train", "max_grad_norm", train.max_grad_norm),
      GB_INT("train", "hidden", train.hidden),
      GB_INT("train", "window_radius", train.window_radius),

      GB_INT("cdg", "degree", cdg.degree),
      GB_DOUBLE("cdg", "stop_height", cdg.descent.stop_height),
      GB_INT("cdg", "iteration_cap", cdg.descent.iteration_cap),
      GB_DOUBLE("cdg", "initial_step", cdg.descent.initial_step),
      GB_DOUBLE("cdg", "backtrack", cdg.descent.backtrack),
      GB_DOUBLE("cdg", "armijo_c", cdg.descent.armijo_c),
      GB_INT("cdg", "max_backtracks", cdg.descent.max_backtracks),
      Binding{"cdg", "trace_start",
              [](const ExperimentConfig& c) {
                return std::string(c.cdg.trace_start == TraceStart::RobotStart ? "start" : "maximum");
              },
              [](ExperimentConfig& c, const std::string& n, const std::string& v) {
                if (v == "start")
                  c.cdg.trace_start = TraceStart::RobotStart;
                else if (v == "maximum")
                  c.cdg.trace_start = TraceStart::SurfaceMaximum;
                else
                  throw ConfigError(n + ": expected start or maximum, got '" + v + "'");
              }},
      GB_DOUBLE("cdg", "near_vertical_ratio", cdg.near_vertical_ratio),
      GB_INT("cdg", "min_baffle_length", cdg.min_baffle_length),

      GB_DOUBLE("validation", "omega1", attack.omega1),
      GB_DOUBLE("validation", "omega2", attack.omega2),
      GB_DOUBLE("validation", "epsilon", attack.epsilon),
      GB_BOOL("validation", "fixed_epsilon", fixed_epsilon),
      GB_DOUBLE("validation", "epsilon_factor", epsilon_factor),
      Binding{"validation", "time_mode",
              [](const ExperimentConfig& c) { return std::string(to_string(c.attack.time_mode)); },
              [](ExperimentConfig& c, const std::string& n, const std::string& v) {
                try {
                  c.attack.time_mode = parse_time_mode(v);
                } catch (const InvalidArgument& e) {
                  throw ConfigError(n + ": " + e.what());
                }
              }},
      GB_INT("validation", "trials", validation.trials),
      GB_INT("validation", "step_cap", validation.step_cap),
      GB_INT("validation", "near_radius", validation.near_radius),
      GB_DOUBLE("validation", "dense_factor", validation.dense_factor),
      GB_INT("validation", "jobs", validation.jobs),

      GB_DOUBLE("immunize", "budget_fraction", retrain.budget_fraction),
      GB_BOOL("immunize", "from_scratch", retrain.from_scratch),
      GB_BOOL("immunize", "mix_clean", retrain.mix_clean),
      GB_INT("immunize", "verify_rollouts", retrain.verify_rollouts),
      GB_INT("immunize", "verify_min_success", retrain.verify_min_success),
      GB_BOOL("immunize", "baseline", run_baseline),
      GB_U64("immunize", "baseline_min_examples", baseline_min_examples),
  };
  return table;
}

void check(const ExperimentConfig& c) {
  try {
    validate_config(c.train, 5);
    AttackParams a = c.attack;
    if (!c.fixed_epsilon) a.epsilon = 1.0;
    validate_params(a);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (c.steps_per_cell == 0) throw ConfigError("train.steps_per_cell must be positive");
  if (c.cdg.degree < 1 || c.cdg.degree > 6) throw ConfigError("cdg.degree must lie in 1..6");
  if (c.cdg.min_baffle_length < 1) throw ConfigError("cdg.min_baffle_length must be >= 1");
  if (!(c.epsilon_factor > 0.0)) throw ConfigError("validation.epsilon_factor must be positive");
  if (c.validation.trials < 1) throw ConfigError("validation.trials must be >= 1");
  if (c.validation.jobs < 1 || c.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (c.retrain.budget_fraction < 0.0 || c.retrain.budget_fraction > 0.2)
    throw ConfigError("immunize.budget_fraction must lie in [0, 0.2]");
  if (c.retrain.verify_rollouts < 1 || c.retrain.verify_min_success < 0 ||
      c.retrain.verify_min_success > c.retrain.verify_rollouts)
    throw ConfigError("immunize verification counts are inconsistent");
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config line ") + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      const auto it = std::find_if(bindings().begin(), bindings().end(), [&](const Binding& b) {
        return section == b.section && key == b.key;
      });
      if (it == bindings().end()) throw ConfigError("unknown key " + section + "." + key);
      it->set(cfg, section + "." + key, value.get_value<std::string>());
    }
  }
  check(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_experiment_config(in);
}

std::string dump_experiment_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& b : bindings()) {
    if (section != b.section) {
      if (!section.empty()) out << '\n';
      section = b.section;
      out << '[' << section << "]\n";
    }
    out << b.key << " = " << b.get(cfg) << '\n';
  }
  return out.str();
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
  // jobs settings do not change results.
  ExperimentConfig c = cfg;
  c.jobs = 1;
  c.validation.jobs = 1;
  const std::string text = dump_experiment_config(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Corpus

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a simple combination.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Json to_json(const Manifest& m) {
  Json maps = Json::array();
  for (const auto& e : m.maps) maps.push_back({{"file", e.file}, {"seed", e.seed}, {"fingerprint", e.fingerprint}});
  return {{"schema", kManifestSchema}, {"size", m.size}, {"density", m.density}, {"seed", m.seed}, {"maps", maps}};
}

Manifest read_manifest(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    if (j.at("schema").get<std::string>() != kManifestSchema) throw SchemaError(path + ": not a map manifest");
    Manifest m;
    m.size = j.at("size").get<int>();
    m.density = j.at("density").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("maps"))
      m.maps.push_back({e.at("file").get<std::string>(), e.at("seed").get<std::uint64_t>(),
                        e.at("fingerprint").get<std::string>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

Manifest generate_corpus(int n, int count, double density, std::uint64_t seed, const std::string& out_dir) {
  if (count < 0) throw InvalidArgument("map count must be >= 0");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Error("cannot create directory " + out_dir);

  Manifest m{n, density, seed, {}};
  char name[64];
  for (int i = 0; i < count; ++i) {
    std::snprintf(name, sizeof name, "n%d_%04d.map", n, i);
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(i));
    const fs::path file = fs::path(out_dir) / name;
    std::string fp;
    if (fs::exists(file)) {
      try {
        const GridMap existing = read_map_file(file.string());
        if (existing.size() == n) fp = fingerprint(existing);
      } catch (const Error&) {
      }
    }
    const GridMap map = generate_random_map(n, density, s);
    if (fp != fingerprint(map)) write_text_file_atomic(file.string(), serialize(map));
    m.maps.push_back({name, s, fingerprint(map)});
  }
  write_json_file((fs::path(out_dir) / "manifest.json").string(), to_json(m));
  return m;
}

// ---------------------------------------------------------------------------
// Map records

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> opt_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

Json to_json(const MapRecord& r) {
  return {{"schema", "gradband.map-record/1"},
          {"name", r.name},
          {"map_id", r.map_id},
          {"map_path", r.map_path},
          {"size", r.size},
          {"seed", r.seed},
          {"config_fingerprint", r.config_fingerprint},
          {"status", r.status},
          {"error", r.error},
          {"train_seconds", r.train_seconds},
          {"train_steps", r.train_steps},
          {"clean_reached", r.clean_reached},
          {"clean_steps", r.clean_steps},
          {"band_case", r.band_case},
          {"band_swapped", r.band_swapped},
          {"epsilon", r.epsilon},
          {"candidates", r.candidates},
          {"valid", r.valid},
          {"generation_precision", opt(r.generation_precision)},
          {"training_example_id", r.training_example_id},
          {"selection_seed", r.selection_seed},
          {"retrain_verified", r.retrain_verified},
          {"training_example_immunized", r.training_example_immunized},
          {"remaining", r.remaining},
          {"immune_precision", opt(r.immune_precision)},
          {"clean_success", opt(r.clean_success)},
          {"retrain_seconds", opt(r.retrain_seconds)},
          {"baseline_seconds", opt(r.baseline_seconds)},
          {"baseline_examples", r.baseline_examples},
          {"speedup", opt(r.speedup)}};
}

MapRecord map_record_from_json(const Json& j) {
  try {
    MapRecord r;
    r.name = j.at("name").get<std::string>();
    r.map_id = j.at("map_id").get<std::string>();
    r.map_path = j.at("map_path").get<std::string>();
    r.size = j.at("size").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.train_seconds = j.at("train_seconds").get<double>();
    r.train_steps = j.at("train_steps").get<std::uint64_t>();
    r.clean_reached = j.at("clean_reached").get<bool>();
    r.clean_steps = j.at("clean_steps").get<int>();
    r.band_case = j.at("band_case").get<std::string>();
    r.band_swapped = j.at("band_swapped").get<bool>();
    r.epsilon = j.at("epsilon").get<double>();
    r.candidates = j.at("candidates").get<std::size_t>();
    r.valid = j.at("valid").get<std::size_t>();
    r.generation_precision = opt_from(j, "generation_precision");
    r.training_example_id = j.at("training_example_id").get<std::string>();
    r.selection_seed = j.at("selection_seed").get<std::uint64_t>();
    r.retrain_verified = j.at("retrain_verified").get<bool>();
    r.training_example_immunized = j.at("training_example_immunized").get<bool>();
    r.remaining = j.at("remaining").get<std::size_t>();
    r.immune_precision = opt_from(j, "immune_precision");
    r.clean_success = opt_from(j, "clean_success");
    r.retrain_seconds = opt_from(j, "retrain_seconds");
    r.baseline_seconds = opt_from(j, "baseline_seconds");
    r.baseline_examples = j.at("baseline_examples").get<std::size_t>();
    r.speedup = opt_from(j, "speedup");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("map record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Per-map pipeline

MapRecord run_map(const MapInput& input, const ExperimentConfig& cfg, const std::string& out_dir,
                  MapArtifacts* artifacts) {
  const GridMap& map = input.map;
  MapRecord rec;
  rec.name = input.name;
  rec.map_id = fingerprint(map);
  rec.map_path = input.path;
  rec.size = map.size();
  rec.seed = input.seed;
  rec.config_fingerprint = config_fingerprint(cfg);

  const bool write = !out_dir.empty();
  if (write) fs::create_directories(out_dir);
  const auto path = [&](const char* file) { return (fs::path(out_dir) / file).string(); };
  const auto finish = [&]() -> MapRecord {
    if (write) write_json_file(path("record.json"), to_json(rec));
    return rec;
  };

  // 1. Train on the clean map.
  TrainConfig tc = cfg.train;
  tc.total_env_steps = training_budget(cfg, map.size());
  tc.seed = derive_seed(cfg.seed, input.seed, 1);
  Agent agent;
  try {
    TrainStats stats;
    agent = train(map, tc, &stats);
    agent.trained_on = rec.map_id;
    rec.train_seconds = stats.wall_seconds;
    rec.train_steps = agent.train_steps;
  } catch (const Error& e) {
    rec.status = "train-failed";
    rec.error = e.what();
    return finish();
  }
  if (write) save_agent(agent, path("agent.bin"));
  if (artifacts) artifacts->agent = agent;

  ValidationConfig vc = cfg.validation;
  vc.seed = derive_seed(cfg.seed, input.seed, 4);
  const auto clean = aggregate_rollouts(agent, map, vc, cfg.attack.time_mode);
  rec.clean_reached = clean.reached;
  rec.clean_steps = clean.steps;

  // 2. Generate candidates.
  CdgRun run;
  try {
    run = cdg(map, agent, cfg.cdg);
  } catch (const Error& e) {
    rec.status = "cdg-failed";
    rec.error = e.what();
    return finish();
  }
  rec.band_case = to_string(run.band.band_case);
  rec.band_swapped = run.band.swapped;
  rec.candidates = run.examples.size();
  if (write) write_json_file(path("cdg_run.json"), cdg_run_record(map, run));

  // 3. Validate.
  AttackParams params = cfg.attack;
  if (!cfg.fixed_epsilon) params.epsilon = calibrate_epsilon(agent, map, vc, params.time_mode, cfg.epsilon_factor);
  rec.epsilon = params.epsilon;
  const auto report = validate_examples(agent, map, run.examples, params, vc, &run.band);
  rec.valid = report.valid.size();
  rec.generation_precision = report.generation_precision;
  if (write) {
    write_json_file(path("validation.json"), validation_record(report));
    write_text_file_atomic(path("validation.csv"), report_csv(report));
  }
  if (artifacts) {
    artifacts->cdg = run;
    artifacts->validation = report;
  }
  if (report.valid.size() < 2) return finish();

  // 4. Single-example retraining on a uniformly drawn valid example.
  rec.selection_seed = derive_seed(cfg.seed, input.seed, 2);
  std::mt19937_64 pick_rng(rec.selection_seed);
  const std::size_t pick = static_cast<std::size_t>(pick_rng() % report.valid.size());
  const DominantExample& chosen = report.valid[pick].example;
  rec.training_example_id = chosen.id();

  RetrainConfig rc = cfg.retrain;
  rc.train = tc;
  rc.seed = derive_seed(cfg.seed, input.seed, 3);
  Agent agent_new;
  try {
    const auto r = gradient_band_retrain(agent, map, chosen, rc);
    agent_new = r.agent;
    rec.retrain_seconds = r.wall_seconds;
    rec.retrain_verified = true;
  } catch (const RetrainFailed& e) {
    agent_new = e.agent();
    rec.retrain_verified = false;
    rec.error = e.what();
  }
  if (write) save_agent(agent_new, path("agent_new.bin"));

  const auto own = aggregate_rollouts(agent_new, perturbed_map(map, chosen), vc, params.time_mode);
  rec.training_example_immunized = f_attack(own, map.goal(), params) == 0.0;

  std::vector<ScoredExample> remaining;
  for (std::size_t i = 0; i < report.valid.size(); ++i)
    if (i != pick) remaining.push_back(report.valid[i]);
  rec.remaining = remaining.size();
  auto immunity = evaluate_immunity(agent_new, map, remaining, params, vc, &run.band);
  immunity.training_example_id = chosen.id();
  immunity.retrain_verified = rec.retrain_verified;
  immunity.training_example_immunized = rec.training_example_immunized;
  rec.immune_precision = immunity.immune_precision;
  rec.clean_success = immunity.clean_success;

  // 5. Traditional adversarial training over the whole valid set.
  if (cfg.run_baseline && report.valid.size() >= cfg.baseline_min_examples) {
    std::vector<DominantExample> all;
    for (const auto& s : report.valid) all.push_back(s.example);
    double seconds = 0.0;
    try {
      seconds = traditional_adversarial_training(agent, map, all, rc).wall_seconds;
    } catch (const RetrainFailed&) {
      // The timing is what matters here; an unconverged baseline still cost it.
      seconds = -1.0;
    }
    if (seconds >= 0.0) {
      rec.baseline_seconds = seconds;
      rec.baseline_examples = all.size();
      immunity.baseline_wall_seconds = seconds;
      immunity.baseline_examples = all.size();
      if (rec.retrain_seconds && *rec.retrain_seconds > 0.0) {
        rec.speedup = seconds / *rec.retrain_seconds;
        immunity.speedup = rec.speedup;
      }
    }
  }
  immunity.retrain_wall_seconds = rec.retrain_seconds.value_or(0.0);
  if (write) {
    write_json_file(path("immunity.json"), immunity_record(immunity));
    write_text_file_atomic(path("immunity.csv"), immunity_csv(immunity, params.time_mode));
  }
  if (artifacts) {
    artifacts->agent_new = agent_new;
    artifacts->immunity = immunity;
  }
  return finish();
}

// ---------------------------------------------------------------------------
// Aggregation

CorpusReport aggregate(std::vector<MapRecord> records) {
  std::sort(records.begin(), records.end(), [](const MapRecord& a, const MapRecord& b) { return a.name < b.name; });
  std::map<int, SizeSummary> by_size;
  struct Sums {
    double gen = 0, imm = 0, clean = 0, retrain = 0, baseline = 0, speedup = 0;
    std::size_t n_gen = 0, n_imm = 0, n_timed = 0;
  };
  std::map<int, Sums> sums;
  for (const auto& r : records) {
    auto& s = by_size[r.size];
    auto& t = sums[r.size];
    s.size = r.size;
    ++s.maps;
    s.maps_ok += r.status == "ok";
    s.candidates += r.candidates;
    s.valid += r.valid;
    if (r.generation_precision) {
      ++s.maps_with_candidates;
      t.gen += *r.generation_precision;
      ++t.n_gen;
    }
    if (r.immune_precision) {
      ++s.maps_with_immunity;
      t.imm += *r.immune_precision;
      t.clean += r.clean_success.value_or(0.0);
      ++t.n_imm;
    }
    if (r.retrain_seconds && r.baseline_seconds && r.speedup) {
      t.retrain += *r.retrain_seconds;
      t.baseline += *r.baseline_seconds;
      t.speedup += *r.speedup;
      ++t.n_timed;
    }
  }
  CorpusReport out;
  for (auto& [size, s] : by_size) {
    const auto& t = sums[size];
    if (t.n_gen) s.generation_precision = t.gen / static_cast<double>(t.n_gen);
    if (t.n_imm) {
      s.immune_precision = t.imm / static_cast<double>(t.n_imm);
      s.clean_success = t.clean / static_cast<double>(t.n_imm);
    }
    s.timed_maps = t.n_timed;
    if (t.n_timed) {
      s.retrain_seconds = t.retrain / static_cast<double>(t.n_timed);
      s.baseline_seconds = t.baseline / static_cast<double>(t.n_timed);
      s.speedup = t.speedup / static_cast<double>(t.n_timed);
    }
    out.sizes.push_back(s);
  }
  out.maps = std::move(records);
  return out;
}

Json to_json(const CorpusReport& report) {
  Json sizes = Json::array();
  for (const auto& s : report.sizes)
    sizes.push_back({{"size", s.size},
                     {"maps", s.maps},
                     {"maps_ok", s.maps_ok},
                     {"maps_with_candidates", s.maps_with_candidates},
                     {"maps_with_immunity", s.maps_with_immunity},
                     {"candidates", s.candidates},
                     {"valid", s.valid},
                     {"generation_precision", opt(s.generation_precision)},
                     {"immune_precision", opt(s.immune_precision)},
                     {"clean_success", opt(s.clean_success)},
                     {"retrain_seconds", opt(s.retrain_seconds)},
                     {"baseline_seconds", opt(s.baseline_seconds)},
                     {"speedup", opt(s.speedup)},
                     {"timed_maps", s.timed_maps}});
  Json maps = Json::array();
  for (const auto& r : report.maps) maps.push_back(to_json(r));
  return {{"schema", kCorpusSchema}, {"sizes", sizes}, {"maps", maps}};
}

CorpusReport corpus_report_from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != kCorpusSchema) throw SchemaError("not a corpus report");
    std::vector<MapRecord> records;
    for (const auto& m : j.at("maps")) records.push_back(map_record_from_json(m));
    return aggregate(std::move(records));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("corpus report: ") + e.what());
  }
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

std::string precision_csv(const CorpusReport& report) {
  std::ostringstream out;
  out << "size,maps,maps_with_candidates,candidates,valid,generation_precision,maps_with_immunity,immune_precision,"
         "clean_success\n";
  for (const auto& s : report.sizes)
    out << s.size << ',' << s.maps << ',' << s.maps_with_candidates << ',' << s.candidates << ',' << s.valid << ','
        << cell(s.generation_precision) << ',' << s.maps_with_immunity << ',' << cell(s.immune_precision) << ','
        << cell(s.clean_success) << '\n';
  return out.str();
}

std::string timing_csv(const CorpusReport& report) {
  std::ostringstream out;
  out << "method,size,maps,mean_wall_seconds,mean_speedup\n";
  for (const auto& s : report.sizes) {
    out << "traditional," << s.size << ',' << s.timed_maps << ',' << cell(s.baseline_seconds) << ",\n";
    out << "gradient-band," << s.size << ',' << s.timed_maps << ',' << cell(s.retrain_seconds) << ','
        << cell(s.speedup) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Corpus run

CorpusReport run_experiment(const std::vector<MapInput>& maps, const ExperimentConfig& cfg, const RunOptions& opts) {
  const bool write = !opts.out_dir.empty();
  if (write) {
    std::error_code ec;
    fs::create_directories(fs::path(opts.out_dir) / "maps", ec);
    if (ec) throw Error("cannot create " + opts.out_dir + ": " + ec.message());
    write_text_file_atomic((fs::path(opts.out_dir) / "config.ini").string(), dump_experiment_config(cfg));
  }
  const std::string fp = config_fingerprint(cfg);

  std::vector<MapRecord> records(maps.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mu;
  const auto worker = [&] {
    for (std::size_t i = next++; i < maps.size(); i = next++) {
      const auto dir = write ? (fs::path(opts.out_dir) / "maps" / maps[i].name).string() : std::string();
      bool resumed = false;
      if (write && opts.resume && fs::exists(fs::path(dir) / "record.json")) {
        try {
          auto rec = map_record_from_json(read_json_file((fs::path(dir) / "record.json").string()));
          if (rec.config_fingerprint == fp && rec.map_id == fingerprint(maps[i].map)) {
            records[i] = std::move(rec);
            resumed = true;
          }
        } catch (const Error&) {
        }
      }
      if (!resumed) {
        try {
          records[i] = run_map(maps[i], cfg, dir);
        } catch (const std::exception& e) {
          MapRecord rec;
          rec.name = maps[i].name;
          rec.map_id = fingerprint(maps[i].map);
          rec.map_path = maps[i].path;
          rec.size = maps[i].map.size();
          rec.seed = maps[i].seed;
          rec.config_fingerprint = fp;
          rec.status = "error";
          rec.error = e.what();
          records[i] = rec;
        }
      }
      if (opts.on_map_done) {
        std::lock_guard lock(report_mu);
        opts.on_map_done(records[i], resumed);
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(maps.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
  }

  CorpusReport report = aggregate(std::move(records));
  if (write) {
    write_json_file((fs::path(opts.out_dir) / "report.json").string(), to_json(report));
    write_text_file_atomic((fs::path(opts.out_dir) / "precision.csv").string(), precision_csv(report));
    write_text_file_atomic((fs::path(opts.out_dir) / "timing.csv").string(), timing_csv(report));
  }
  return report;
}

}  // namespace gradband
