#pragma once

// JSON documents exchanged between the pipeline stages, the CLI and the
// plotter. Every top-level document carries a "schema" string.

#include <string>

#include <json.hpp>

#include "gradband/a3c.hpp"
#include "gradband/cdg.hpp"
#include "gradband/immunize.hpp"
#include "gradband/validation.hpp"

namespace gradband {

using Json = nlohmann::json;

inline constexpr const char* kCdgRunSchema = "gradband.cdg-run/1";
inline constexpr const char* kValidationSchema = "gradband.validation/1";
inline constexpr const char* kImmunitySchema = "gradband.immunity/1";

// Thrown when a document lacks a field or has the wrong schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

Json to_json(Cell c);
Json to_json(Point p);
Json to_json(const EpisodeResult& r);
Json to_json(const DominantExample& e);
Json to_json(const GradientFit& f);
Json to_json(const GradientBand& b);
Json to_json(const ScoredExample& s);
Json to_json(const AttackParams& p);

// The run record: map text, surfaces, trace, fit, band and candidates.
Json cdg_run_record(const GridMap& map, const CdgRun& run);
Json validation_record(const SampleSpaceReport& report);
Json immunity_record(const ImmunityReport& report);

// Parsed view of a CDG run record, enough to redraw every figure.
struct CdgRecordView {
  GridMap map;
  ValueSurface surface;
  GradientTrace trace;
  GradientBand band;
  std::vector<DominantExample> examples;
};

CdgRecordView parse_cdg_run_record(const Json& doc);

Json read_json_file(const std::string& path);
// Writes through a temporary file and renames, so readers never see a torn file.
void write_text_file_atomic(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const Json& doc);

}  // namespace gradband
