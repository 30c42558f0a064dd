#include "gradband/records.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace gradband {

Json to_json(Cell c) { return Json::array({c.x, c.y}); }
Json to_json(Point p) { return Json::array({p.x, p.y}); }

Json to_json(const EpisodeResult& r) {
  Json path = Json::array();
  for (Cell c : r.path) path.push_back(to_json(c));
  return {{"reached", r.reached},
          {"steps", r.steps},
          {"wall_seconds", r.wall_seconds},
          {"end_position", to_json(r.end_position)},
          {"path", path}};
}

Json to_json(const DominantExample& e) {
  Json cells = Json::array();
  for (Cell c : e.baffle_cells) cells.push_back(to_json(c));
  return {{"id", e.id()},
          {"base_map_id", e.base_map_id},
          {"orientation", to_string(e.orientation)},
          {"index", e.index},
          {"baffle_cells", cells}};
}

Json to_json(const GradientFit& f) {
  return {{"degree", f.degree}, {"coeffs", f.coeffs}, {"residual", f.residual}};
}

namespace {

Json optional_cell(const std::optional<Cell>& c) { return c ? to_json(*c) : Json(nullptr); }

Json surface_json(const ValueSurface& s) {
  return {{"size", s.size}, {"value_max", s.value_max}, {"values", s.values}, {"free_mask", s.free_mask}};
}

}  // namespace

Json to_json(const GradientBand& b) {
  return {{"fit", to_json(b.fit)},
          {"upper", b.upper},
          {"lower", b.lower},
          {"x_lo", b.x_lo},
          {"y_lo", b.y_lo},
          {"x_max", b.x_max},
          {"y_max", b.y_max},
          {"case", to_string(b.band_case)},
          {"swapped", b.swapped},
          {"upper_from_obstacle", b.upper_from_obstacle},
          {"lower_from_obstacle", b.lower_from_obstacle},
          {"nearest_above", optional_cell(b.nearest_above)},
          {"nearest_below", optional_cell(b.nearest_below)},
          {"nearest_above_distance", b.nearest_above_distance},
          {"nearest_below_distance", b.nearest_below_distance},
          {"upper_anchor", optional_cell(b.upper_anchor)},
          {"lower_anchor", optional_cell(b.lower_anchor)},
          {"corner_offsets", {b.corner_offsets[0], b.corner_offsets[1]}}};
}

Json to_json(const ScoredExample& s) {
  return {{"example", to_json(s.example)},
          {"outcome", to_json(s.outcome)},
          {"f_attack", s.f_attack},
          {"failure_tags", s.tags.names()}};
}

Json to_json(const AttackParams& p) {
  return {{"omega1", p.omega1}, {"omega2", p.omega2}, {"epsilon", p.epsilon}, {"time_mode", to_string(p.time_mode)}};
}

Json cdg_run_record(const GridMap& map, const CdgRun& run) {
  Json trace = Json::array();
  for (const auto& p : run.trace.points) trace.push_back(to_json(p));
  Json steps = Json::array();
  for (const auto& s : run.trace.steps) steps.push_back(to_json(s));
  Json examples = Json::array();
  for (const auto& e : run.examples) examples.push_back(to_json(e));
  return {{"schema", kCdgRunSchema},
          {"map_id", run.map_id},
          {"map", serialize(map)},
          {"surface", surface_json(run.surface)},
          {"preprocessed", surface_json(run.preprocessed)},
          {"trace", {{"points", trace}, {"steps", steps}, {"degenerate", run.trace.degenerate}}},
          {"fit", to_json(run.fit)},
          {"band", to_json(run.band)},
          {"examples", examples}};
}

Json validation_record(const SampleSpaceReport& report) {
  Json scored = Json::array();
  for (const auto& s : report.scored) scored.push_back(to_json(s));
  Json valid = Json::array();
  for (const auto& s : report.valid) valid.push_back(s.example.id());
  return {{"schema", kValidationSchema},
          {"map_id", report.map_id},
          {"params", to_json(report.params)},
          {"step_cap", report.step_cap},
          {"trials", report.trials},
          {"total", report.total},
          {"valid", valid},
          {"generation_precision",
           report.generation_precision ? Json(*report.generation_precision) : Json(nullptr)},
          {"scored", scored}};
}

Json immunity_record(const ImmunityReport& report) {
  Json scored = Json::array();
  for (const auto& s : report.scored) scored.push_back(to_json(s));
  const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return {{"schema", kImmunitySchema},
          {"map_id", report.map_id},
          {"training_example_id", report.training_example_id},
          {"retrain_wall_seconds", report.retrain_wall_seconds},
          {"retrain_verified", report.retrain_verified},
          {"baseline_wall_seconds", opt(report.baseline_wall_seconds)},
          {"baseline_examples", report.baseline_examples},
          {"speedup", opt(report.speedup)},
          {"immune_precision", opt(report.immune_precision)},
          {"training_example_immunized", report.training_example_immunized},
          {"clean_success", report.clean_success},
          {"scored", scored}};
}

namespace {

const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  return obj.at(key);
}

template <class T>
T get(const Json& obj, const char* key) {
  try {
    return field(obj, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("field '") + key + "': " + e.what());
  }
}

Cell cell_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw SchemaError("cell must be a two-element array");
  return {j[0].get<int>(), j[1].get<int>()};
}

std::optional<Cell> optional_cell_from(const Json& obj, const char* key) {
  const Json& j = field(obj, key);
  if (j.is_null()) return std::nullopt;
  return cell_from(j);
}

ValueSurface surface_from(const Json& j) {
  ValueSurface s;
  s.size = get<int>(j, "size");
  s.value_max = get<double>(j, "value_max");
  s.values = get<std::vector<double>>(j, "values");
  s.free_mask = get<std::vector<std::uint8_t>>(j, "free_mask");
  const auto cells = static_cast<std::size_t>(s.size) * static_cast<std::size_t>(s.size);
  if (s.values.size() != cells || s.free_mask.size() != cells) throw SchemaError("surface has the wrong shape");
  return s;
}

BandCase band_case_from(const std::string& s) {
  if (s == to_string(BandCase::BothSides)) return BandCase::BothSides;
  if (s == to_string(BandCase::OneSide)) return BandCase::OneSide;
  if (s == to_string(BandCase::Degenerate)) return BandCase::Degenerate;
  throw SchemaError("unknown band case '" + s + "'");
}

}  // namespace

CdgRecordView parse_cdg_run_record(const Json& doc) {
  if (get<std::string>(doc, "schema") != kCdgRunSchema) throw SchemaError("not a CDG run record");
  CdgRecordView v{parse(get<std::string>(doc, "map")), {}, {}, {}, {}};
  v.surface = surface_from(field(doc, "surface"));
  if (v.surface.size != v.map.size()) throw SchemaError("surface size differs from map size");

  const Json& trace = field(doc, "trace");
  for (const auto& p : field(trace, "points")) v.trace.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  v.trace.degenerate = get<bool>(trace, "degenerate");

  const Json& band = field(doc, "band");
  const Json& fit = field(band, "fit");
  v.band.fit.degree = get<int>(fit, "degree");
  v.band.fit.coeffs = get<std::vector<double>>(fit, "coeffs");
  v.band.fit.residual = get<double>(fit, "residual");
  v.band.upper = get<double>(band, "upper");
  v.band.lower = get<double>(band, "lower");
  v.band.x_lo = get<double>(band, "x_lo");
  v.band.y_lo = get<double>(band, "y_lo");
  v.band.x_max = get<double>(band, "x_max");
  v.band.y_max = get<double>(band, "y_max");
  v.band.band_case = band_case_from(get<std::string>(band, "case"));
  v.band.swapped = get<bool>(band, "swapped");
  v.band.upper_from_obstacle = get<bool>(band, "upper_from_obstacle");
  v.band.lower_from_obstacle = get<bool>(band, "lower_from_obstacle");
  v.band.nearest_above = optional_cell_from(band, "nearest_above");
  v.band.nearest_below = optional_cell_from(band, "nearest_below");
  v.band.upper_anchor = optional_cell_from(band, "upper_anchor");
  v.band.lower_anchor = optional_cell_from(band, "lower_anchor");

  for (const auto& e : field(doc, "examples")) {
    DominantExample ex;
    ex.base_map_id = get<std::string>(e, "base_map_id");
    ex.index = get<int>(e, "index");
    const auto orient = get<std::string>(e, "orientation");
    if (orient != "row" && orient != "column") throw SchemaError("unknown orientation '" + orient + "'");
    ex.orientation = orient == "row" ? Orientation::Row : Orientation::Column;
    for (const auto& c : field(e, "baffle_cells")) ex.baffle_cells.push_back(cell_from(c));
    v.examples.push_back(std::move(ex));
  }
  return v;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": " + e.what());
  }
}

void write_text_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << text;
    if (!out.flush()) throw Error("cannot write " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp + ": " + ec.message());
}

void write_json_file(const std::string& path, const Json& doc) { write_text_file_atomic(path, doc.dump(2) + "\n"); }

}  // namespace gradband
