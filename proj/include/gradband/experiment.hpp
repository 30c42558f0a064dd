#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradband/a3c.hpp"
#include "gradband/cdg.hpp"
#include "gradband/immunize.hpp"
#include "gradband/records.hpp"
#include "gradband/validation.hpp"

namespace gradband {

// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  TrainConfig train;
  // Training budget is steps_per_cell * N^2 environment steps.
  std::uint64_t steps_per_cell = 1000;
  CdgConfig cdg;
  AttackParams attack;
  // epsilon = epsilon_factor * median clean rollout time unless fixed_epsilon.
  double epsilon_factor = 3.0;
  bool fixed_epsilon = false;
  ValidationConfig validation;
  RetrainConfig retrain;
  bool run_baseline = true;
  std::size_t baseline_min_examples = 2;
  std::uint64_t seed = 1;
  int jobs = 1;
};

std::uint64_t training_budget(const ExperimentConfig& cfg, int map_size);

// INI document with sections [experiment], [train], [cdg], [validation] and
// [immunize]. Missing keys keep their defaults; unknown keys are errors.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);
// The effective configuration as INI text; parsing it back reproduces every
// value exactly.
std::string dump_experiment_config(const ExperimentConfig& cfg);
// Fingerprint of the dumped configuration, used to invalidate checkpoints.
std::string config_fingerprint(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Map corpus

struct ManifestEntry {
  std::string file;  // relative to the manifest directory
  std::uint64_t seed = 0;
  std::string fingerprint;
};

struct Manifest {
  int size = 0;
  double density = 0.0;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> maps;
};

inline constexpr const char* kManifestSchema = "gradband.manifest/1";

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Writes `count` maps plus manifest.json into out_dir. Existing files whose
// fingerprint matches are kept, so an interrupted run resumes.
Manifest generate_corpus(int n, int count, double density, std::uint64_t seed, const std::string& out_dir);
Json to_json(const Manifest& m);
Manifest read_manifest(const std::string& path);

// ---------------------------------------------------------------------------
// Per-map pipeline

struct MapInput {
  std::string name;  // unique, used as the checkpoint directory name
  std::string path;  // map file, informational
  GridMap map;
  std::uint64_t seed = 0;
};

struct MapRecord {
  std::string name;
  std::string map_id;
  std::string map_path;
  int size = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  // ok, train-failed, cdg-failed, or error
  std::string status = "ok";
  std::string error;

  double train_seconds = 0.0;
  std::uint64_t train_steps = 0;
  bool clean_reached = false;
  int clean_steps = 0;

  std::string band_case;
  bool band_swapped = false;
  double epsilon = 0.0;
  std::size_t candidates = 0;
  std::size_t valid = 0;
  std::optional<double> generation_precision;

  std::string training_example_id;
  std::uint64_t selection_seed = 0;
  bool retrain_verified = false;
  bool training_example_immunized = false;
  std::size_t remaining = 0;
  std::optional<double> immune_precision;
  std::optional<double> clean_success;
  std::optional<double> retrain_seconds;
  std::optional<double> baseline_seconds;
  std::size_t baseline_examples = 0;
  std::optional<double> speedup;
};

Json to_json(const MapRecord& r);
MapRecord map_record_from_json(const Json& j);

// In-memory artifacts of one map, for callers that want more than the record.
struct MapArtifacts {
  Agent agent;
  std::optional<CdgRun> cdg;
  std::optional<SampleSpaceReport> validation;
  std::optional<Agent> agent_new;
  std::optional<ImmunityReport> immunity;
};

// train -> cdg -> validate -> pick a random valid example -> retrain ->
// evaluate immunity (-> traditional baseline). Stage failures are recorded in
// the returned record, never thrown. When out_dir is non-empty every artifact
// is written there and record.json is written last.
MapRecord run_map(const MapInput& input, const ExperimentConfig& cfg, const std::string& out_dir = {},
                  MapArtifacts* artifacts = nullptr);

// ---------------------------------------------------------------------------
// Corpus

struct SizeSummary {
  int size = 0;
  std::size_t maps = 0;
  std::size_t maps_ok = 0;
  std::size_t maps_with_candidates = 0;
  std::size_t maps_with_immunity = 0;
  std::size_t candidates = 0;
  std::size_t valid = 0;
  // Means of the per-map values over maps where they are defined.
  std::optional<double> generation_precision;
  std::optional<double> immune_precision;
  std::optional<double> clean_success;
  std::optional<double> retrain_seconds;
  std::optional<double> baseline_seconds;
  std::optional<double> speedup;
  std::size_t timed_maps = 0;
};

struct CorpusReport {
  std::vector<SizeSummary> sizes;  // ascending size
  std::vector<MapRecord> maps;     // sorted by name
};

inline constexpr const char* kCorpusSchema = "gradband.corpus/1";

CorpusReport aggregate(std::vector<MapRecord> records);
Json to_json(const CorpusReport& report);
CorpusReport corpus_report_from_json(const Json& j);
// Generation and immune precision per size class.
std::string precision_csv(const CorpusReport& report);
// Method x size wall-clock rows for single-example vs traditional training.
std::string timing_csv(const CorpusReport& report);

struct RunOptions {
  std::string out_dir;  // empty: nothing written
  int jobs = 1;
  bool resume = true;
  std::function<void(const MapRecord&, bool resumed)> on_map_done;
};

// Runs every map (map-level parallelism), resuming completed checkpoints, and
// writes report.json, precision.csv and timing.csv under out_dir.
CorpusReport run_experiment(const std::vector<MapInput>& maps, const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace gradband
