// gradband: map corpora, experiments and figures.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 experiment failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradband/experiment.hpp"
#include "gradband/plot.hpp"

namespace fs = std::filesystem;
using namespace gradband;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kFailure = 3;

class ExitError {
 public:
  ExitError(int code, std::string what) : code(code), what(std::move(what)) {}
  int code;
  std::string what;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

int env_jobs(int fallback) {
  const auto v = env("GRADBAND_JOBS");
  if (!v) return fallback;
  try {
    const int jobs = std::stoi(*v);
    if (jobs >= 1) return jobs;
  } catch (const std::exception&) {
  }
  throw ExitError(kUsage, "GRADBAND_JOBS must be a positive integer");
}

std::uint64_t seed_from_fingerprint(const std::string& hex) { return std::stoull(hex, nullptr, 16); }

// Directories contribute their manifest (or every *.map file); files stand
// for themselves.
std::vector<MapInput> collect_maps(const std::vector<std::string>& paths) {
  std::vector<MapInput> out;
  std::map<std::string, std::string> names;
  const auto add = [&](const fs::path& file, std::optional<std::uint64_t> seed) {
    GridMap map = read_map_file(file.string());
    const std::string name = file.stem().string();
    if (auto [it, fresh] = names.emplace(name, file.string()); !fresh)
      throw ExitError(kData, "duplicate map name '" + name + "': " + it->second + " and " + file.string());
    const std::uint64_t s = seed ? *seed : seed_from_fingerprint(fingerprint(map));
    out.push_back({name, file.string(), std::move(map), s});
  };
  for (const auto& p : paths) {
    const fs::path path(p);
    if (fs::is_directory(path)) {
      const fs::path manifest = path / "manifest.json";
      if (fs::exists(manifest)) {
        const Manifest m = read_manifest(manifest.string());
        for (const auto& e : m.maps) {
          add(path / e.file, e.seed);
          if (fingerprint(out.back().map) != e.fingerprint)
            throw ExitError(kData, (path / e.file).string() + " does not match its manifest fingerprint");
        }
      } else {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path))
          if (entry.path().extension() == ".map") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) add(f, std::nullopt);
      }
    } else if (fs::exists(path)) {
      add(path, std::nullopt);
    } else {
      throw ExitError(kData, "no such map file or directory: " + p);
    }
  }
  if (out.empty()) throw ExitError(kData, "no maps found");
  return out;
}

void write_file(const fs::path& path, const std::string& text) { write_text_file_atomic(path.string(), text); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-band adversarial examples for grid path finding"};
  app.require_subcommand(1);

  // gen-maps
  auto* gen = app.add_subcommand("gen-maps", "Generate a seeded random map corpus");
  int gen_n = 10, gen_count = 20;
  double gen_density = 0.15;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Map side length")->check(CLI::Range(5, 1000));
  gen->add_option("--count", gen_count, "Number of maps")->check(CLI::NonNegativeNumber);
  gen->add_option("--density", gen_density, "Obstacle density in [0, 1)");
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--out-dir", gen_out, "Output directory")->required();

  // run-experiment
  auto* run = app.add_subcommand("run-experiment", "Train, attack and immunize every map");
  std::vector<std::string> run_maps;
  std::string run_config, run_out;
  int run_jobs = 0;
  bool run_fresh = false;
  run->add_option("--maps", run_maps, "Map directories (with manifest.json) or .map files")->required();
  run->add_option("--config", run_config, "INI configuration (defaults when omitted)");
  run->add_option("--out", run_out, "Output directory (env GRADBAND_OUT_DIR)");
  run->add_option("--jobs", run_jobs, "Maps processed in parallel (env GRADBAND_JOBS)");
  run->add_flag("--fresh", run_fresh, "Ignore existing per-map checkpoints");

  // plot
  auto* plot = app.add_subcommand("plot", "Render figures from a CDG run record");
  std::string plot_record, plot_out, plot_report;
  plot->add_option("--run-record", plot_record, "cdg_run.json")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();
  plot->add_option("--report", plot_report, "Corpus report.json for the precision curve (found next to the run by default)");

  // config
  auto* show = app.add_subcommand("config", "Print the effective configuration");
  std::string show_config;
  show->add_option("--config", show_config, "INI configuration to merge over the defaults");

  // train
  auto* tr = app.add_subcommand("train", "Train an agent on one map");
  std::string tr_map, tr_out, tr_config;
  std::uint64_t tr_seed = 1;
  tr->add_option("--map", tr_map, "Map file")->required();
  tr->add_option("--out", tr_out, "Agent checkpoint path")->required();
  tr->add_option("--config", tr_config, "INI configuration");
  tr->add_option("--seed", tr_seed, "Training seed");

  // cdg
  auto* gen_ex = app.add_subcommand("cdg", "Generate dominant adversarial examples for a trained agent");
  std::string cd_map, cd_agent, cd_out, cd_config;
  gen_ex->add_option("--map", cd_map, "Map file")->required();
  gen_ex->add_option("--agent", cd_agent, "Agent checkpoint")->required();
  gen_ex->add_option("--out", cd_out, "Run record path")->required();
  gen_ex->add_option("--config", cd_config, "INI configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  const auto config = [](const std::string& path) {
    return path.empty() ? ExperimentConfig{} : load_experiment_config(path);
  };

  try {
    if (*gen) {
      const auto m = generate_corpus(gen_n, gen_count, gen_density, gen_seed, gen_out);
      std::printf("wrote %zu maps and manifest.json to %s\n", m.maps.size(), gen_out.c_str());
      return 0;
    }

    if (*run) {
      if (run_out.empty()) run_out = env("GRADBAND_OUT_DIR").value_or("");
      if (run_out.empty()) throw ExitError(kUsage, "--out is required (or set GRADBAND_OUT_DIR)");
      ExperimentConfig cfg = config(run_config);
      RunOptions opts;
      opts.out_dir = run_out;
      opts.jobs = run_jobs > 0 ? run_jobs : env_jobs(cfg.jobs);
      opts.resume = !run_fresh;
      opts.on_map_done = [](const MapRecord& r, bool resumed) {
        std::fprintf(stderr, "%-16s %-12s cand=%zu valid=%zu gen=%s imm=%s%s\n", r.name.c_str(), r.status.c_str(),
                     r.candidates, r.valid,
                     r.generation_precision ? std::to_string(*r.generation_precision).c_str() : "-",
                     r.immune_precision ? std::to_string(*r.immune_precision).c_str() : "-",
                     resumed ? " (checkpoint)" : "");
      };
      const auto maps = collect_maps(run_maps);
      const auto report = run_experiment(maps, cfg, opts);
      std::fputs(precision_csv(report).c_str(), stdout);
      std::fputs(timing_csv(report).c_str(), stdout);
      std::size_t ok = 0;
      for (const auto& r : report.maps) ok += r.status == "ok";
      if (ok == 0) {
        std::fprintf(stderr, "error: no map completed the pipeline\n");
        return kFailure;
      }
      return 0;
    }

    if (*plot) {
      const auto record = parse_cdg_run_record(read_json_file(plot_record));
      std::optional<CorpusReport> report;
      if (plot_report.empty()) {
        // run-experiment layout: <out>/maps/<name>/cdg_run.json next to <out>/report.json
        const fs::path guess = fs::absolute(plot_record).parent_path().parent_path().parent_path() / "report.json";
        if (fs::exists(guess)) plot_report = guess.string();
      }
      if (!plot_report.empty()) report = corpus_report_from_json(read_json_file(plot_report));
      fs::create_directories(plot_out);
      const fs::path out(plot_out);
      write_file(out / "contour.svg", contour_svg(record));
      write_file(out / "band.svg", band_svg(record));
      write_file(out / "precision.svg", precision_svg(report ? &*report : nullptr));
      write_file(out / "surface.csv", surface_csv(record.surface));
      std::printf("wrote contour.svg, band.svg, precision.svg and surface.csv to %s\n", plot_out.c_str());
      return 0;
    }

    if (*show) {
      std::fputs(dump_experiment_config(config(show_config)).c_str(), stdout);
      return 0;
    }

    if (*tr) {
      const ExperimentConfig cfg = config(tr_config);
      const GridMap map = read_map_file(tr_map);
      TrainConfig tc = cfg.train;
      tc.total_env_steps = training_budget(cfg, map.size());
      tc.seed = tr_seed;
      TrainStats stats;
      Agent agent = train(map, tc, &stats);
      agent.trained_on = fingerprint(map);
      save_agent(agent, tr_out);
      const auto r = rollout(agent, map, effective_step_cap(tc, map.size()), RolloutMode::Greedy);
      std::printf("trained %llu steps in %.2f s; greedy rollout %s in %d steps\n",
                  static_cast<unsigned long long>(stats.env_steps), stats.wall_seconds,
                  r.reached ? "reached the goal" : "did not reach the goal", r.steps);
      return 0;
    }

    if (*gen_ex) {
      const ExperimentConfig cfg = config(cd_config);
      const GridMap map = read_map_file(cd_map);
      const Agent agent = load_agent(cd_agent);
      const auto result = cdg(map, agent, cfg.cdg);
      write_json_file(cd_out, cdg_run_record(map, result));
      std::printf("%zu candidates, band %s\n", result.examples.size(), to_string(result.band.band_case));
      return 0;
    }
  } catch (const ExitError& e) {
    std::fprintf(stderr, "error: %s\n", e.what.c_str());
    return e.code;
  } catch (const GenerationFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  } catch (const DegenerateFit& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
