#include "gradband/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gradband {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// Five-stop perceptual ramp (dark blue to yellow).
std::string ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops = {
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(i);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[i][0] * (1 - f) + stops[i + 1][0] * f)),
                static_cast<int>(std::lround(stops[i][1] * (1 - f) + stops[i + 1][1] * f)),
                static_cast<int>(std::lround(stops[i][2] * (1 - f) + stops[i + 1][2] * f)));
  return buf;
}

void header(std::ostringstream& out, double w, double h) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h) << "\" fill=\"white\"/>\n";
}

void cell_rect(std::ostringstream& out, const PixelFrame& f, Cell c, const std::string& fill,
               const char* extra = "") {
  out << "<rect x=\"" << num(f.px(c.x) - 0.5 * f.cell_px) << "\" y=\"" << num(f.py(c.y) - 0.5 * f.cell_px)
      << "\" width=\"" << num(f.cell_px) << "\" height=\"" << num(f.cell_px) << "\" fill=\"" << fill << "\"" << extra
      << "/>\n";
}

void marker(std::ostringstream& out, const PixelFrame& f, Cell c, const char* label, const char* color) {
  out << "<circle cx=\"" << num(f.px(c.x)) << "\" cy=\"" << num(f.py(c.y)) << "\" r=\"" << num(0.35 * f.cell_px)
      << "\" fill=\"" << color << "\" stroke=\"black\" stroke-width=\"0.5\"><title>" << label << "</title></circle>\n";
}

// Marching squares over cell centres; emits one <path> per level.
void iso_lines(std::ostringstream& out, const PixelFrame& f, const ValueSurface& s, double level) {
  const int n = s.size;
  std::ostringstream d;
  const auto v = [&](int x, int y) { return s.values[static_cast<std::size_t>(y) * n + x]; };
  const auto lerp = [&](double a, double b) { return (level - a) / (b - a); };
  for (int y = 0; y + 1 < n; ++y)
    for (int x = 0; x + 1 < n; ++x) {
      const double a = v(x, y), b = v(x + 1, y), c = v(x + 1, y + 1), e = v(x, y + 1);
      std::vector<Point> hits;
      if ((a < level) != (b < level)) hits.push_back({x + lerp(a, b), static_cast<double>(y)});
      if ((b < level) != (c < level)) hits.push_back({x + 1.0, y + lerp(b, c)});
      if ((e < level) != (c < level)) hits.push_back({x + lerp(e, c), y + 1.0});
      if ((a < level) != (e < level)) hits.push_back({static_cast<double>(x), y + lerp(a, e)});
      for (std::size_t k = 0; k + 1 < hits.size(); k += 2)
        d << 'M' << num(f.px(hits[k].x)) << ',' << num(f.py(hits[k].y)) << 'L' << num(f.px(hits[k + 1].x)) << ','
          << num(f.py(hits[k + 1].y));
    }
  if (!d.str().empty())
    out << "<path class=\"iso\" d=\"" << d.str() << "\" fill=\"none\" stroke=\"white\" stroke-opacity=\"0.7\" "
        << "stroke-width=\"0.6\"/>\n";
}

// Polyline(s) of y = p(t) + offset in band coordinates, drawn in map
// coordinates and clipped to the map box.
void bound_curve(std::ostringstream& out, const PixelFrame& f, const GradientBand& band, double offset,
                 const char* cls, const char* color) {
  const int n = f.size;
  constexpr int kSamples = 4000;
  const double lo = -0.5, hi = n - 0.5;
  std::ostringstream pts;
  const auto flush = [&] {
    if (!pts.str().empty())
      out << "<polyline class=\"" << cls << "\" points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1\"/>\n";
    pts.str("");
  };
  for (int i = 0; i <= kSamples; ++i) {
    const double t = lo + (hi - lo) * i / kSamples;
    const double u = band.fit.eval(t) + offset;
    if (!(u >= lo && u <= hi)) {
      flush();
      continue;
    }
    const double mx = band.swapped ? u : t;
    const double my = band.swapped ? t : u;
    pts << num(f.px(mx)) << ',' << num(f.py(my)) << ' ';
  }
  flush();
}

}  // namespace

std::string contour_svg(const CdgRecordView& r, double cell_px) {
  const int n = r.map.size();
  const PixelFrame f{n, cell_px, 0.0};
  std::ostringstream out;
  header(out, n * cell_px, n * cell_px);

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < r.surface.values.size(); ++i)
    if (r.surface.free_mask[i]) {
      lo = std::min(lo, r.surface.values[i]);
      hi = std::max(hi, r.surface.values[i]);
    }
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const Cell c{x, y};
      cell_rect(out, f, c, r.map.is_obstacle(c) ? std::string("#202020") : ramp((r.surface.at(c) - lo) / span));
    }
  for (int k = 1; k < 10; ++k) iso_lines(out, f, r.surface, lo + span * k / 10.0);

  if (!r.trace.points.empty()) {
    out << "<polyline class=\"trace\" points=\"";
    for (const auto& p : r.trace.points) out << num(f.px(p.x)) << ',' << num(f.py(p.y)) << ' ';
    out << "\" fill=\"none\" stroke=\"#e4002b\" stroke-width=\"1.5\" stroke-dasharray=\"3,1.5\"/>\n";
  }
  marker(out, f, r.map.start(), "start", "#ffffff");
  marker(out, f, r.map.goal(), "goal", "#e4002b");
  out << "</svg>\n";
  return out.str();
}

std::string band_svg(const CdgRecordView& r, double cell_px) {
  const int n = r.map.size();
  const PixelFrame f{n, cell_px, 0.0};
  std::ostringstream out;
  header(out, n * cell_px, n * cell_px);

  const bool draw_band = r.band.band_case != BandCase::Degenerate;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const Cell c{x, y};
      if (r.map.is_obstacle(c))
        cell_rect(out, f, c, "#202020");
      else if (draw_band && r.band.contains({static_cast<double>(x), static_cast<double>(y)}))
        cell_rect(out, f, c, "#cfe3f7", " class=\"band-cell\"");
      else
        cell_rect(out, f, c, "#ffffff", " stroke=\"#e8e8e8\" stroke-width=\"0.3\"");
    }
  for (const auto& ex : r.examples)
    for (Cell c : ex.baffle_cells) cell_rect(out, f, c, "#ff8c00", " fill-opacity=\"0.45\" class=\"baffle\"");

  if (!r.band.fit.coeffs.empty()) {
    bound_curve(out, f, r.band, 0.0, "fit", "#e4002b");
    if (draw_band) {
      bound_curve(out, f, r.band, r.band.upper, "upper-bound", "#1f5fbf");
      bound_curve(out, f, r.band, r.band.lower, "lower-bound", "#1f5fbf");
    }
  }
  const auto anchor = [&](const std::optional<Cell>& a, const char* cls) {
    if (!a) return;
    const Cell m = r.band.swapped ? Cell{a->y, a->x} : *a;
    out << "<circle class=\"" << cls << "\" cx=\"" << num(f.px(m.x)) << "\" cy=\"" << num(f.py(m.y))
        << "\" r=\"1.5\" fill=\"#1f5fbf\"/>\n";
  };
  if (draw_band) {
    anchor(r.band.upper_anchor, "upper-anchor");
    anchor(r.band.lower_anchor, "lower-anchor");
  }
  marker(out, f, r.map.start(), "start", "#2ca02c");
  marker(out, f, r.map.goal(), "goal", "#e4002b");
  out << "</svg>\n";
  return out.str();
}

std::string precision_svg(const CorpusReport* report) {
  constexpr double W = 480, H = 320, L = 56, R = 20, T = 24, B = 48;
  std::ostringstream out;
  header(out, W, H);
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  const auto yp = [&](double v) { return H - B - v * (H - B - T); };
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    out << "<line x1=\"" << L - 4 << "\" y1=\"" << num(yp(v)) << "\" x2=\"" << W - R << "\" y2=\"" << num(yp(v))
        << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << L - 8 << "\" y=\"" << num(yp(v) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
        << num(v).substr(0, 3) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">map size N</text>\n";
  out << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << (T + H - B) / 2 << ")\">precision</text>\n";

  if (report == nullptr || report->sizes.empty()) {
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << (T + H - B) / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#808080\">no corpus report</text>\n</svg>\n";
    return out.str();
  }
  const int smin = report->sizes.front().size, smax = report->sizes.back().size;
  const auto xp = [&](int s) {
    return smax == smin ? (L + W - R) / 2 : L + 20 + (W - R - L - 40) * (s - smin) / static_cast<double>(smax - smin);
  };
  for (const auto& s : report->sizes)
    out << "<text x=\"" << num(xp(s.size)) << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
        << s.size << "</text>\n";

  const auto series = [&](auto get, const char* cls, const char* color, int legend_row) {
    std::ostringstream pts;
    for (const auto& s : report->sizes)
      if (const auto v = get(s)) {
        pts << num(xp(s.size)) << ',' << num(yp(*v)) << ' ';
        out << "<circle class=\"" << cls << "-point\" cx=\"" << num(xp(s.size)) << "\" cy=\"" << num(yp(*v))
            << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    if (!pts.str().empty())
      out << "<polyline class=\"" << cls << "\" points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\"/>\n";
    const double ly = T + 6 + 16 * legend_row;
    out << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly << "\" x2=\"" << W - R - 130 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R - 124 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << cls << "</text>\n";
  };
  series([](const SizeSummary& s) { return s.generation_precision; }, "generation", "#1f5fbf", 0);
  series([](const SizeSummary& s) { return s.immune_precision; }, "immune", "#e4002b", 1);
  out << "</svg>\n";
  return out.str();
}

std::string surface_csv(const ValueSurface& s) {
  std::ostringstream out;
  out << "x,y,value,free\n";
  char buf[32];
  for (int y = 0; y < s.size; ++y)
    for (int x = 0; x < s.size; ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", s.at({x, y}));
      out << x << ',' << y << ',' << buf << ',' << (s.is_free({x, y}) ? 1 : 0) << '\n';
    }
  return out.str();
}

}  // namespace gradband
